from .files import ensure_output_dir, write_csv, write_json, write_lines
from .streams import philox
