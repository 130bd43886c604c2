import pathlib
from setuptools import setup, find_packages

# The directory containing this file
HERE = pathlib.Path(__file__).parent

# The text of the README file
README = (HERE / "README.md").read_text()

setup(
    name="hetsync",
    version="0.1.0",
    description="Simulator and barrier solver for load-balanced local SGD on heterogeneous clusters",
    long_description=README,
    long_description_content_type="text/markdown",
    license="GPLv3",
    classifiers=[
        "License :: OSI Approved :: GNU General Public License v3 (GPLv3)",
        "Programming Language :: Python :: 3",
        "Programming Language :: Python :: 3.10",
    ],
    python_requires=">=3.10",
    install_requires=[
        "numpy",
        "pandas>=1.5",
        "packaging",
    ],
    extras_require={
        "test": ["pytest"],
    },
    entry_points={
        "console_scripts": ["hetsync=hetsync.cli:main"],
    },
    packages=find_packages(exclude=("tests", "examples", "examples.*")),
)
