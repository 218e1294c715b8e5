"""The MNIST graph protocol on the 5000-image sample shipped with mlxtend.

This does not replace the 10k-point criterion; it exercises IDX ingestion,
the kNN graph and both schemes on real digits when the full files are absent.
"""
import gzip
import os

import numpy as np
import pytest

from momentumgl import acceptance as A
from momentumgl.ingest import load_mnist_idx, write_idx_images, write_idx_labels

mlxtend = pytest.importorskip("mlxtend")


@pytest.fixture(scope="module")
def sample(tmp_path_factory):
    path = os.path.join(os.path.dirname(mlxtend.__file__), "data", "data", "mnist_5k.csv.gz")
    if not os.path.exists(path):
        pytest.skip("mlxtend MNIST sample not installed")
    with gzip.open(path) as fh:
        raw = np.loadtxt(fh, delimiter=",", dtype=np.uint8)
    # the file is sorted by digit; shuffle once so that file order is not class order
    raw = raw[np.random.default_rng(0).permutation(raw.shape[0])]
    d = tmp_path_factory.mktemp("mnist")
    write_idx_images(d / "images", raw[:, :784].reshape(-1, 28, 28))
    write_idx_labels(d / "labels", raw[:, 784])
    return load_mnist_idx(d / "images", d / "labels")


def test_sample_ingestion(sample):
    assert sample.N == 5000 and sample.points.shape[1] == 784
    assert 0.0 <= sample.points.min() and sample.points.max() <= 1.0
    assert np.bincount(sample.labels).tolist() == [500] * 10


def test_sample_protocol(sample):
    setup, runs = A.mnist_protocol(sample, M=5000)
    ok, detail = A._mnist_checks(setup, runs)
    print("MNIST-5k sample:", detail)
    for r in runs.values():
        assert float(np.max(r.trace["max_row_sum_error"])) <= A.ROW_SUM_TOL
        # 50 labels over 5000 digits: well above chance, below the 10k target
        assert r.extra["accuracy_connected"] > 0.65
    E = [runs[("gd", t)].trace["gl_energy"] for t in (1e2, 1e3, 1e4)]
    assert np.allclose(E[0], E[2], rtol=A.MNIST_TRACE_TOL)
