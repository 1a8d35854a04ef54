"""Dataset construction: synthetic sampling, IDX and CIFAR-10 binary
ingestion, grayscale conversion, per-coordinate standardization, class
filtering, and the sample streams consumed by stochastic training.
"""

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .oracle import MixtureDensity
from .seeding import substream

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073  # 1 label byte + 1024 R + 1024 G + 1024 B


class DataFormatError(Exception):
    """Base for malformed dataset files."""


class MagicNumberError(DataFormatError):
    pass


class TruncatedFileError(DataFormatError):
    pass


class CountMismatchError(DataFormatError):
    pass


class RecordLengthError(DataFormatError):
    pass


class LabelRangeError(DataFormatError):
    pass


@dataclass
class LabeledDataset:
    """Two sample matrices sharing an input dimension.

    class1 is N1 x k, class2 is N2 x k; ``provenance`` records where the
    data came from (synthetic, mnist, cifar, ...).
    """

    class1: np.ndarray
    class2: np.ndarray
    provenance: str = "custom"

    def __post_init__(self):
        self.class1 = np.asarray(self.class1, dtype=float)
        self.class2 = np.asarray(self.class2, dtype=float)
        if self.class1.ndim != 2 or self.class2.ndim != 2:
            raise ValueError("class matrices must be 2-D (N x k)")
        if self.class1.shape[0] < 1 or self.class2.shape[0] < 1:
            raise ValueError("both classes need at least one sample")
        if self.class1.shape[1] != self.class2.shape[1]:
            raise ValueError(
                f"classes disagree on input dimension: "
                f"{self.class1.shape[1]} vs {self.class2.shape[1]}"
            )
        if not (np.all(np.isfinite(self.class1)) and np.all(np.isfinite(self.class2))):
            raise ValueError("dataset contains non-finite entries")

    @property
    def k(self):
        return self.class1.shape[1]

    @property
    def n1(self):
        return self.class1.shape[0]

    @property
    def n2(self):
        return self.class2.shape[0]


def sample_mixture(d: MixtureDensity, n: int, seed) -> np.ndarray:
    """n i.i.d. mixture draws as an (n, k) matrix, deterministic in seed."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return d.sample(n, np.random.default_rng(seed))


def _open_maybe_gzip(path):
    with open(path, "rb") as fh:
        head = fh.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_be32(fh, path, what):
    raw = fh.read(4)
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: file ends inside the {what} field")
    return struct.unpack(">I", raw)[0]


def _read_idx(path, expected_magic, n_dims):
    with _open_maybe_gzip(path) as fh:
        magic = _read_be32(fh, path, "magic")
        if magic != expected_magic:
            raise MagicNumberError(
                f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}"
            )
        dims = [_read_be32(fh, path, f"dimension {i}") for i in range(n_dims)]
        expected = int(np.prod(dims))
        payload = fh.read(expected)
        if len(payload) < expected:
            raise TruncatedFileError(
                f"{path}: payload holds {len(payload)} bytes, header declares {expected}"
            )
    data = np.frombuffer(payload, dtype=np.uint8)
    return data.reshape(dims)


def load_idx(images_path, labels_path):
    """Parse an IDX image/label file pair.

    Returns (images, labels) where images is N x (rows*cols) float64 with
    pixels scaled into [0, 1] by /255, and labels is an int vector.  Raises
    MagicNumberError, TruncatedFileError or CountMismatchError on the
    corresponding malformation; trailing bytes past the declared payload
    are never read.
    """
    images = _read_idx(images_path, IDX_IMAGE_MAGIC, 3)
    labels = _read_idx(labels_path, IDX_LABEL_MAGIC, 1)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(
            f"{images.shape[0]} images but {labels.shape[0]} labels"
        )
    n = images.shape[0]
    flat = images.reshape(n, -1).astype(float) / 255.0
    return flat, labels.astype(int)


def load_cifar_binary(paths):
    """Parse CIFAR-10 binary batch files (3073-byte records).

    ``paths`` is one path or a sequence; records from successive files are
    concatenated in order.  Returns (pixels, labels) with pixels N x 3072
    float64 on the raw 0..255 scale, channel-planar (R plane, G plane,
    B plane).  Raises RecordLengthError if a file is not a whole number of
    records and LabelRangeError if any label byte exceeds 9.
    """
    if isinstance(paths, (str, bytes)) or hasattr(paths, "__fspath__"):
        paths = [paths]
    pixel_blocks, label_blocks = [], []
    for path in paths:
        with _open_maybe_gzip(path) as fh:
            raw = fh.read()
        if len(raw) % CIFAR_RECORD_BYTES:
            raise RecordLengthError(
                f"{path}: {len(raw)} bytes is not a multiple of {CIFAR_RECORD_BYTES}"
            )
        records = np.frombuffer(raw, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        labels = records[:, 0]
        bad = np.nonzero(labels > 9)[0]
        if bad.size:
            raise LabelRangeError(
                f"{path}: record {bad[0]} has label byte {labels[bad[0]]}"
            )
        label_blocks.append(labels.astype(int))
        pixel_blocks.append(records[:, 1:].astype(float))
    return np.vstack(pixel_blocks), np.concatenate(label_blocks)


def to_grayscale(rgb: np.ndarray) -> np.ndarray:
    """Planar RGB (N x 3072, 0..255) to luma vectors (N x 1024, in [0, 1]).

    Uses the 0.299/0.587/0.114 luma weights, then scales by /255.
    """
    rgb = np.asarray(rgb, dtype=float)
    if rgb.ndim != 2 or rgb.shape[1] != 3072:
        raise ValueError(f"expected N x 3072 planar RGB, got {rgb.shape}")
    r, g, b = rgb[:, :1024], rgb[:, 1024:2048], rgb[:, 2048:]
    return (0.299 * r + 0.587 * g + 0.114 * b) / 255.0


@dataclass
class Standardizer:
    """Per-coordinate z-scoring statistics, fitted on training data only."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, X):
        X = np.asarray(X, dtype=float)
        return (X - self.mean) / self.std


def fit_standardizer(X: np.ndarray, std_floor=1e-8) -> Standardizer:
    """Fit per-coordinate mean and population standard deviation.

    Near-constant coordinates get their deviation floored, so applying the
    transform maps them to (approximately) zero instead of exploding.
    """
    X = np.asarray(X, dtype=float)
    return Standardizer(X.mean(axis=0), np.maximum(X.std(axis=0), std_floor))


def apply_standardizer(s: Standardizer, X: np.ndarray) -> np.ndarray:
    return s.transform(X)


def filter_binary(labels, class_a, class_b, data, max_per_class=None, provenance="custom"):
    """Split a labeled corpus into a two-class dataset, order preserved.

    class1 collects rows labeled ``class_a``, class2 those labeled
    ``class_b``.  ``max_per_class`` keeps only the first occurrences of
    each label.  Raises if the two labels coincide or one is absent.
    """
    if class_a == class_b:
        raise ValueError(f"the two class labels must differ, both are {class_a}")
    labels = np.asarray(labels)
    data = np.asarray(data, dtype=float)
    rows_a = data[labels == class_a]
    rows_b = data[labels == class_b]
    for name, rows in ((class_a, rows_a), (class_b, rows_b)):
        if rows.shape[0] == 0:
            raise ValueError(f"label {name!r} does not occur in the corpus")
    if max_per_class is not None:
        rows_a = rows_a[:max_per_class]
        rows_b = rows_b[:max_per_class]
    return LabeledDataset(rows_a, rows_b, provenance=provenance)


def merged_iterator(data: LabeledDataset, policy, seed):
    """Endless (sample, label) stream feeding stochastic training.

    policy 'permuted': one pass ("epoch") visits every sample of the merged
    set exactly once in a fresh uniform random order; each recycle draws a
    new permutation (the epoch index is mixed into the stream seed).

    policy 'alternating_pairs': tick i yields class1[i mod N1] then
    class2[i mod N2], so every tick touches one sample of each class and no
    permutation is needed.
    """
    if policy == "permuted":
        merged = np.vstack([data.class1, data.class2])
        labels = np.concatenate([np.ones(data.n1, dtype=int), np.full(data.n2, 2)])
        epoch = 0
        while True:
            order = substream(seed, "permute", epoch).permutation(len(labels))
            for i in order:
                yield merged[i], int(labels[i])
            epoch += 1
    elif policy == "alternating_pairs":
        i = 0
        while True:
            yield data.class1[i % data.n1], 1
            yield data.class2[i % data.n2], 2
            i += 1
    else:
        raise ValueError(f"unknown sampling policy {policy!r}")
