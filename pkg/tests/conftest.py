import pathlib
import sys

import pytest

sys.path.insert(0, str(pathlib.Path(__file__).parent))

from borelknn.core import load_csv

DATA_DIR = pathlib.Path(__file__).resolve().parent.parent / "data"


@pytest.fixture(scope="session")
def iris():
    return load_csv(DATA_DIR / "iris.csv", "class")


@pytest.fixture(scope="session")
def balance():
    return load_csv(DATA_DIR / "balance-scale.csv", "class")
