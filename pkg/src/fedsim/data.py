"""Datasets, synthetic data generation, and client partitioning.

Labels are 1-based everywhere outside the numeric kernels: a dataset with Y
classes carries integer labels in [1, Y]. The partition schemes cover the
usual federated setups: uniform i.i.d. splits, Dirichlet label skew, and a
hard label-shard split where every client sees exactly a fixed number of
distinct classes.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DatasetError, DegenerateDirectionError, PartitionError
from .seeding import as_rng

_SCHEMES = ("iid", "dirichlet", "label_shard")


@dataclass
class LabeledDataset:
    """Feature matrix plus 1-based integer labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {features.shape}")
        if not np.all(np.isfinite(features)):
            raise DatasetError("features contain NaN or infinity")
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise DatasetError(f"labels must be 1-D, got shape {labels.shape}")
        if labels.shape[0] != features.shape[0]:
            raise DatasetError(
                f"{features.shape[0]} feature rows but {labels.shape[0]} labels"
            )
        if labels.shape[0]:
            if not np.issubdtype(labels.dtype, np.integer):
                rounded = np.rint(np.asarray(labels, dtype=np.float64))
                if not np.array_equal(rounded, labels):
                    raise DatasetError("labels must be integers")
                labels = rounded
            if labels.min() < 1:
                raise DatasetError(f"labels are 1-based, got minimum {labels.min()}")
        self.features = features
        self.labels = np.ascontiguousarray(labels, dtype=np.int64)

    @property
    def n_samples(self):
        return self.features.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def subset(self, indices):
        indices = np.asarray(indices, dtype=np.int64)
        return LabeledDataset(self.features[indices], self.labels[indices])


def generate_synthetic(num_classes, samples_per_class, dims, class_separation, seed):
    """Gaussian class clusters, standardized per dimension.

    Class means are independent random unit vectors scaled by
    ``class_separation``; every class receives exactly ``samples_per_class``
    samples (class mean plus standard normal noise). Features are then
    shifted/scaled so each dimension has zero mean and unit variance across
    the dataset. Draw order (means, then noise) is fixed, so a seed pins the
    dataset bit-for-bit.
    """
    if num_classes < 2 or samples_per_class < 1 or dims < 1:
        raise DatasetError(
            "need num_classes >= 2, samples_per_class >= 1 and dims >= 1, got "
            f"{num_classes}/{samples_per_class}/{dims}"
        )
    if not class_separation > 0:
        raise DatasetError(f"class_separation must be > 0, got {class_separation}")
    rng = as_rng(seed)
    directions = rng.standard_normal((num_classes, dims))
    norms = np.linalg.norm(directions, axis=1)
    if np.any(norms == 0):
        raise DegenerateDirectionError("drew a zero direction for a class mean")
    means = directions / norms[:, None] * float(class_separation)
    labels0 = np.repeat(np.arange(num_classes), samples_per_class)
    noise = rng.standard_normal((labels0.shape[0], dims))
    features = means[labels0] + noise
    mu = features.mean(axis=0)
    sd = features.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    features = (features - mu) / sd
    return LabeledDataset(features, labels0 + 1)


@dataclass(frozen=True)
class DataConfig:
    """Synthetic-task parameters: class count, per-class sizes, geometry.

    ``samples_per_class`` sizes the training pool that gets partitioned
    across clients; ``test_samples_per_class`` sizes the held-out test split.
    Both splits share the same class means (they are cut from one generated
    pool), so train and test follow the same distribution.
    """

    num_classes: int = 10
    samples_per_class: int = 1200
    dims: int = 24
    class_separation: float = 6.0
    test_samples_per_class: int = 100

    def __post_init__(self):
        if self.num_classes < 2:
            raise ConfigError(f"num_classes must be >= 2, got {self.num_classes}")
        if self.samples_per_class < 1 or self.test_samples_per_class < 1:
            raise ConfigError("samples_per_class and test_samples_per_class must be >= 1")
        if self.dims < 1:
            raise ConfigError(f"dims must be >= 1, got {self.dims}")
        if not self.class_separation > 0:
            raise ConfigError(
                f"class_separation must be > 0, got {self.class_separation}"
            )


def train_test_split(cfg, seed):
    """Generate one pooled synthetic dataset and cut it into train/test.

    The pool holds samples_per_class + test_samples_per_class rows per class;
    within each class block the first samples_per_class rows go to train and
    the rest to test. Standardization happens on the pool, so both splits see
    the identical feature transform.
    """
    per_class = cfg.samples_per_class + cfg.test_samples_per_class
    pooled = generate_synthetic(
        cfg.num_classes, per_class, cfg.dims, cfg.class_separation, seed
    )
    train_idx, test_idx = [], []
    for c in range(cfg.num_classes):
        start = c * per_class
        train_idx.extend(range(start, start + cfg.samples_per_class))
        test_idx.extend(range(start + cfg.samples_per_class, start + per_class))
    return pooled.subset(train_idx), pooled.subset(test_idx)


@dataclass(frozen=True)
class PartitionSpec:
    """How to split one dataset across clients.

    ``alpha`` is required by (and only by) the ``dirichlet`` scheme,
    ``labels_per_client`` by (and only by) ``label_shard``.
    """

    scheme: str
    num_clients: int
    alpha: float = None
    labels_per_client: int = None

    def __post_init__(self):
        if self.scheme not in _SCHEMES:
            raise ConfigError(
                f"unknown partition scheme {self.scheme!r}; expected one of {_SCHEMES}"
            )
        if self.num_clients < 1:
            raise ConfigError(f"num_clients must be >= 1, got {self.num_clients}")
        if self.scheme == "dirichlet":
            if self.alpha is None or not self.alpha > 0:
                raise ConfigError("dirichlet partitioning needs alpha > 0")
        elif self.alpha is not None:
            raise ConfigError(f"alpha is only valid for dirichlet, not {self.scheme}")
        if self.scheme == "label_shard":
            if self.labels_per_client is None or self.labels_per_client < 1:
                raise ConfigError("label_shard partitioning needs labels_per_client >= 1")
        elif self.labels_per_client is not None:
            raise ConfigError(
                f"labels_per_client is only valid for label_shard, not {self.scheme}"
            )


def partition(data, spec, seed):
    """Split a dataset into ``spec.num_clients`` disjoint client datasets."""
    if data.n_samples < spec.num_clients:
        raise PartitionError(
            f"cannot split {data.n_samples} samples across {spec.num_clients} clients"
        )
    rng = as_rng(seed)
    if spec.scheme == "iid":
        return _partition_iid(data, spec.num_clients, rng)
    if spec.scheme == "dirichlet":
        return _partition_dirichlet(data, spec.num_clients, spec.alpha, rng)
    return _partition_label_shard(data, spec.num_clients, spec.labels_per_client, rng)


def _partition_iid(data, num_clients, rng):
    order = rng.permutation(data.n_samples)
    return [data.subset(chunk) for chunk in np.array_split(order, num_clients)]


def _partition_dirichlet(data, num_clients, alpha, rng):
    """Per-class Dirichlet proportions; empty clients are topped up.

    For each class (ascending label) the class's shuffled indices are split
    at the cumulative Dirichlet proportions. Any client left with zero
    samples afterwards receives one sample donated by the currently largest
    client (lowest index wins ties on both sides), so every client can train
    and review.
    """
    class_values = np.unique(data.labels)
    assigned = [[] for _ in range(num_clients)]
    for value in class_values:
        idx = rng.permutation(np.flatnonzero(data.labels == value))
        props = rng.dirichlet(np.full(num_clients, float(alpha)))
        cuts = (np.cumsum(props)[:-1] * idx.shape[0]).astype(np.int64)
        for client, chunk in enumerate(np.split(idx, cuts)):
            assigned[client].append(chunk)
    parts = [
        np.concatenate(chunks) if chunks else np.empty(0, dtype=np.int64)
        for chunks in assigned
    ]
    sizes = np.array([p.shape[0] for p in parts])
    while np.any(sizes == 0):
        empty = int(np.argmin(sizes))
        donor = int(np.argmax(sizes))
        if sizes[donor] <= 1:
            raise PartitionError(
                f"client {empty} would receive zero samples and no client "
                "can spare one"
            )
        parts[empty] = parts[donor][-1:]
        parts[donor] = parts[donor][:-1]
        sizes[empty] = 1
        sizes[donor] -= 1
    return [data.subset(p) for p in parts]


def _partition_label_shard(data, num_clients, labels_per_client, rng):
    """Every client gets samples from exactly ``labels_per_client`` classes.

    Class slots are allocated first (each class fills total-slots/K slots,
    a random subset of classes taking the remainder), then dealt greedily so
    no client sees the same class twice; each class's shuffled samples are
    split across its slot holders at random Dirichlet proportions (at least
    one sample each), so shards are class-imbalanced the way skewed real
    collections are. Unsatisfiable constraints raise PartitionError instead
    of being silently relaxed.
    """
    class_values = np.unique(data.labels)
    n_classes = class_values.shape[0]
    if labels_per_client > n_classes:
        raise PartitionError(
            f"labels_per_client={labels_per_client} exceeds the {n_classes} "
            "distinct labels present"
        )
    total_slots = num_clients * labels_per_client
    if total_slots < n_classes:
        raise PartitionError(
            f"{num_clients} clients x {labels_per_client} labels cannot cover "
            f"{n_classes} classes"
        )
    base, extra = divmod(total_slots, n_classes)
    multiplicity = np.full(n_classes, base, dtype=np.int64)
    if extra:
        multiplicity[rng.permutation(n_classes)[:extra]] += 1

    # Deal class copies to clients, most-constrained class first; every copy
    # goes to the eligible client with the most free slots. With
    # labels_per_client <= n_classes this always completes.
    capacity = np.full(num_clients, labels_per_client, dtype=np.int64)
    holders = [[] for _ in range(n_classes)]
    for c in sorted(range(n_classes), key=lambda c: (-multiplicity[c], c)):
        for _ in range(int(multiplicity[c])):
            best, best_cap = -1, 0
            for client in range(num_clients):
                if capacity[client] > 0 and client not in holders[c]:
                    if capacity[client] > best_cap:
                        best, best_cap = client, capacity[client]
            if best < 0:
                raise PartitionError(
                    "could not place every class slot; constraints unsatisfiable"
                )
            holders[c].append(best)
            capacity[best] -= 1

    assigned = [[] for _ in range(num_clients)]
    for c, value in enumerate(class_values):
        idx = rng.permutation(np.flatnonzero(data.labels == value))
        n_holders = len(holders[c])
        if idx.shape[0] < n_holders:
            raise PartitionError(
                f"class {int(value)} has {idx.shape[0]} samples but must supply "
                f"{n_holders} clients"
            )
        sizes = _uneven_sizes(idx.shape[0], n_holders, rng)
        cuts = np.cumsum(sizes)[:-1]
        for client, chunk in zip(sorted(holders[c]), np.split(idx, cuts)):
            assigned[client].append(chunk)
    out = [data.subset(np.concatenate(chunks)) for chunks in assigned]
    for client, part in enumerate(out):
        if np.unique(part.labels).shape[0] != labels_per_client:
            raise PartitionError(
                f"client {client} received {np.unique(part.labels).shape[0]} "
                f"distinct labels, wanted {labels_per_client}"
            )
    return out


def _uneven_sizes(n, parts, rng):
    """Split ``n`` items into ``parts`` positive chunk sizes summing to n."""
    if parts == 1:
        return np.array([n], dtype=np.int64)
    props = rng.dirichlet(np.ones(parts))
    sizes = np.maximum(1, np.floor(props * n).astype(np.int64))
    # floor + minimum guard can over/undershoot; settle the difference on the
    # largest (or smallest shrinkable) chunks so every size stays >= 1
    while sizes.sum() > n:
        sizes[int(np.argmax(sizes))] -= 1
    while sizes.sum() < n:
        sizes[int(np.argmax(props - sizes / n))] += 1
    return sizes


def balanced_subsample(data, size, seed):
    """Class-balanced bootstrap: draw with replacement, weights 1/class count."""
    if data.n_samples == 0:
        raise DatasetError("cannot subsample an empty dataset")
    if size < 1:
        raise DatasetError(f"size must be >= 1, got {size}")
    rng = as_rng(seed)
    counts = np.bincount(data.labels)
    weights = 1.0 / counts[data.labels]
    weights /= weights.sum()
    picks = rng.choice(data.n_samples, size=size, replace=True, p=weights)
    return data.subset(picks)


def load_csv(path, has_header=False):
    """Read a dataset from CSV: feature columns first, integer label last."""
    features, labels = [], []
    width = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        for line_no, row in enumerate(reader, start=1):
            if has_header and line_no == 1:
                continue
            if not row:
                continue
            if len(row) < 2:
                raise DatasetError(
                    f"{path}: line {line_no}: need at least one feature and a label"
                )
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetError(
                    f"{path}: line {line_no}: expected {width} columns, got {len(row)}"
                )
            try:
                features.append([float(v) for v in row[:-1]])
            except ValueError:
                raise DatasetError(
                    f"{path}: line {line_no}: non-numeric feature value"
                ) from None
            try:
                labels.append(int(row[-1]))
            except ValueError:
                raise DatasetError(
                    f"{path}: line {line_no}: label {row[-1]!r} is not an integer"
                ) from None
    if not features:
        raise DatasetError(f"{path}: no data rows")
    return LabeledDataset(np.asarray(features), np.asarray(labels))
