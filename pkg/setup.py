"""
Setup script for building the ckptplan command-line executable
"""
import sys

# cx_Freeze is only needed to freeze the executable; plain (editable) installs
# use setuptools and install the top-level modules.
FREEZE = 'build_exe' in sys.argv
if FREEZE:
    from cx_Freeze import setup, Executable
else:
    from setuptools import setup

build_options = {
    'packages': [
        'numpy', 'pandas', 'pydantic', 'psutil', 'concurrent.futures',
        'json', 'pathlib', 'logging', 'argparse',
    ],
    'excludes': ['test', 'unittest', 'pydoc', 'doctest', 'tkinter'],
    'include_files': [
        'config.json',
        'requirements.txt',
    ],
    'zip_include_packages': ['*'],
    'zip_exclude_packages': []
}

executables = [
    Executable(
        'cli.py',
        base=None,
        target_name='ckptplan.exe' if sys.platform == "win32" else 'ckptplan',
    )
] if FREEZE else []

setup(
    name='ckptplan',
    version='1.0.0',
    description='Checkpoint placement for fault-injection campaigns',
    py_modules=[
        'cachesim', 'cli', 'config', 'distribution_core', 'distribution_io',
        'experiment_runner', 'genetic', 'ilp_export', 'main', 'metrics',
        'placement', 'synthgen',
    ],
    install_requires=['numpy>=1.24.0', 'pandas>=2.0.0', 'pydantic>=2.0.0', 'psutil>=5.9.0'],
    **({'options': {'build_exe': build_options}, 'executables': executables} if FREEZE else {})
)
