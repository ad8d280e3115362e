# pin BLAS to one thread before numpy loads: keeps runs reproducible and
# makes the acceptance timing an honest single-core measurement
import os

for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
            "NUMEXPR_NUM_THREADS"):
    os.environ.setdefault(var, "1")

import numpy as np  # noqa: E402
import pytest  # noqa: E402

from suda.data import Dataset, DatasetMeta  # noqa: E402


@pytest.fixture
def tiny_labeled():
    t = np.arange(6)
    readings = np.array([[100.0, 110.0], [101, 111], [102, 112],
                         [103, 113], [104, 114], [105, 115]])
    angles = np.array([40.0, 41, 42, 43, 44, 45])
    return Dataset(t, readings, angles, DatasetMeta(provenance="fixture"))


def make_line_dataset(n=400, lo=40.0, hi=160.0, labeled=True):
    """Noiseless affine cloud: readings trace a straight segment."""
    angles = np.linspace(lo, hi, n)
    readings = np.stack([5.0 * angles + 100.0, 4.0 * angles + 120.0], axis=1)
    return Dataset(np.arange(n), readings, angles if labeled else None)
