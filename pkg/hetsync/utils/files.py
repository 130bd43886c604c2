import json
import tempfile
from pathlib import Path
from typing import Any, Iterable, Union

import pandas as pd

from hetsync.exceptions import OutputDirError


def ensure_output_dir(path: Union[str, Path]) -> Path:
    """Create `path` if needed and check that files can be written in it."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
        with tempfile.TemporaryFile(dir=path):
            pass
    except OSError as err:
        raise OutputDirError(f'output directory {path} is not writable: {err}') from err
    return path


def write_csv(frame: pd.DataFrame, path: Path) -> Path:
    """UTF-8, LF line endings, no index column."""
    frame.to_csv(path, index=False, encoding='utf-8', lineterminator='\n')
    return path


def write_lines(lines: Iterable[str], path: Path) -> Path:
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        for line in lines:
            file.write(line + '\n')
    return path


def write_json(data: Any, path: Path) -> Path:
    with open(path, 'w', encoding='utf-8', newline='\n') as file:
        json.dump(data, file, indent=2, sort_keys=True)
        file.write('\n')
    return path
