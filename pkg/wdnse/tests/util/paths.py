from inspect import getsourcefile
from os.path import abspath
import pathlib


# Adapted from https://stackoverflow.com/a/18489147
THIS_FILE = pathlib.Path(abspath(str(getsourcefile(lambda: 0))))
TESTS_CODE_DIR = THIS_FILE.parent.parent
PROJECT_ROOT_DIR = TESTS_CODE_DIR.parent
TEST_ASSETS_DIR = PROJECT_ROOT_DIR / "tests/assets"
REPO_ROOT_DIR = PROJECT_ROOT_DIR.parent


def networks() -> pathlib.Path:
    return TEST_ASSETS_DIR / "networks"


def measurements() -> pathlib.Path:
    return TEST_ASSETS_DIR / "measurements"


def unittests() -> pathlib.Path:
    return TESTS_CODE_DIR


def run_script() -> pathlib.Path:
    return REPO_ROOT_DIR / "run.py"
