import json
from pathlib import Path

import numpy as np
import pytest

from varlatent.ingest import DataTable, generate_synthetic

DATA = Path(__file__).parent / "data"
MNIST_IMAGES = DATA / "mnist-desk-images-idx3-ubyte.gz"
MNIST_LABELS = DATA / "mnist-desk-labels-idx1-ubyte.gz"


@pytest.fixture(scope="session")
def synthetic() -> DataTable:
    return generate_synthetic(0)


@pytest.fixture(scope="session")
def frozen() -> dict:
    return json.loads((DATA / "frozen_oracles.json").read_text(encoding="utf-8"))


def table(*cols, names=None) -> DataTable:
    values = np.column_stack([np.asarray(c, dtype=float) for c in cols])
    names = names or [f"v{i}" for i in range(values.shape[1])]
    return DataTable(list(names), values)
