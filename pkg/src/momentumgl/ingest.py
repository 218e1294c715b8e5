"""Datasets: MNIST IDX files, seeded Gaussian blobs, label subsampling."""
import struct
from dataclasses import dataclass, field

import numpy as np

IMAGE_MAGIC = 2051
LABEL_MAGIC = 2049
CACHE_VERSION = 1


class IdxError(ValueError):
    pass


class IdxMagicError(IdxError):
    pass


class IdxTruncatedError(IdxError):
    pass


class IdxCountMismatchError(IdxError):
    pass


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray
    k: int
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.points.ndim != 2 or self.points.shape[0] != self.labels.shape[0]:
            raise ValueError("points must be N x d with one label per point")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.k):
            raise ValueError("labels out of range [0, k)")

    @property
    def N(self):
        return self.points.shape[0]

    def head(self, m):
        return Dataset(self.points[:m], self.labels[:m], self.k, dict(self.meta, subset=m))


def _read_idx(path, magic, ndim):
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: no magic number")
    (found,) = struct.unpack(">i", raw[:4])
    if found != magic:
        raise IdxMagicError(f"{path}: magic {found}, expected {magic}")
    if len(raw) < 4 + 4 * ndim:
        raise IdxTruncatedError(f"{path}: header shorter than {4 + 4 * ndim} bytes")
    dims = struct.unpack(">" + "i" * ndim, raw[4:4 + 4 * ndim])
    body = raw[4 + 4 * ndim:]
    need = int(np.prod(dims))
    if len(body) < need:
        raise IdxTruncatedError(f"{path}: {len(body)} data bytes, header promises {need}")
    return np.frombuffer(body, dtype=np.uint8, count=need).reshape(dims)


def load_mnist_idx(images_path, labels_path):
    """Read an IDX image/label pair; pixels are scaled to [0, 1] and flattened."""
    images = _read_idx(images_path, IMAGE_MAGIC, 3)
    labels = _read_idx(labels_path, LABEL_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise IdxCountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    points = images.reshape(images.shape[0], -1).astype(float) / 255.0
    return Dataset(points, labels.astype(np.int64), 10,
                   {"source": "mnist-idx", "images": str(images_path),
                    "labels": str(labels_path)})


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">iiii", IMAGE_MAGIC, *images.shape))
        fh.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">ii", LABEL_MAGIC, labels.size))
        fh.write(labels.tobytes())


def make_blobs(n=2000, k=5, std=1.1, box_half_width=10.0, seed=0, dim=2):
    """Isotropic Gaussian clusters; point i belongs to class i mod k."""
    if n < k:
        raise ValueError("need at least one point per class")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-box_half_width, box_half_width, size=(k, dim))
    labels = np.arange(n) % k
    points = centers[labels] + std * rng.standard_normal((n, dim))
    return Dataset(points, labels, k,
                   {"source": "blobs", "n": n, "k": k, "std": std,
                    "box_half_width": box_half_width, "seed": seed,
                    "centers": centers.tolist()})


def sample_labels(dataset, fraction, seed=0):
    """round(fraction * N) distinct indices, uniformly without replacement, sorted."""
    if not 0 < fraction <= 1:
        raise ValueError("fraction must lie in (0, 1]")
    N = dataset.N if hasattr(dataset, "N") else int(dataset)
    m = int(round(fraction * N))
    if m == 0:
        raise ValueError(f"fraction {fraction} of {N} points labels nothing")
    rng = np.random.default_rng(seed)
    return np.sort(rng.permutation(N)[:m])


def write_cache(path, dataset):
    """Binary container: version byte, N, d, k (int64), row-major doubles, int64 labels."""
    with open(path, "wb") as fh:
        fh.write(struct.pack("<B", CACHE_VERSION))
        fh.write(struct.pack("<qqq", dataset.N, dataset.points.shape[1], dataset.k))
        fh.write(np.ascontiguousarray(dataset.points, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(dataset.labels, dtype="<i8").tobytes())


def read_cache(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    if not raw or raw[0] != CACHE_VERSION:
        raise ValueError(f"{path}: unsupported cache version")
    N, d, k = struct.unpack("<qqq", raw[1:25])
    off = 25
    points = np.frombuffer(raw, dtype="<f8", count=N * d, offset=off).reshape(N, d)
    labels = np.frombuffer(raw, dtype="<i8", count=N, offset=off + 8 * N * d)
    return Dataset(points.copy(), labels.copy(), int(k), {"source": str(path)})
