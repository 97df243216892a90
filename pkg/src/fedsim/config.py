"""Flat dotted-key experiment configs.

The on-disk format is one ``key = value`` assignment per line, ``#`` starts
a comment, and keys are dotted paths such as ``attack.lambda`` or
``sgd.learning_rate``. A flat namespace keeps sweep addressing trivial: any
config key can be swept by name. Unknown keys, duplicate keys, and
type-invalid values fail with the offending line number.

`parse_config`/`load_config` return a plain dict of typed values (defaults
filled in); `build_experiment` turns that dict into an `ExperimentConfig`;
`canonical_text`/`config_hash` give a machine-stable rendering for
reproducibility stamps.
"""

import hashlib

from .aggregation import AggregatorConfig
from .attacks import AttackConfig
from .data import DataConfig, PartitionSpec
from .errors import ConfigError
from .fedreview import ReviewConfig
from .model import SgdConfig
from .orchestrator import ExperimentConfig

# key -> (kind, default); kind in {int, float, bool, str, ints};
# None defaults mark optional keys that stay unset unless given.
SCHEMA = {
    "num_clients": ("int", 100),
    "rounds": ("int", 60),
    "clients_per_round": ("int", 10),
    "reviewers_per_round": ("int", 10),
    "malicious_fraction": ("float", 0.2),
    "malicious_count_mode": ("str", "honest"),
    "defense": ("str", "fedavg"),
    "master_seed": ("int", 0),
    "model.layer_sizes": ("ints", (24, 32, 10)),
    "model.activation": ("str", "tanh"),
    "sgd.learning_rate": ("float", 0.01),
    "sgd.momentum": ("float", 0.9),
    "sgd.batch_size": ("int", 32),
    "sgd.local_epochs": ("int", 5),
    "attack.kind": ("str", "none"),
    "attack.lambda": ("float", 5.0),
    "attack.gamma_init": ("float", 50.0),
    "attack.tau": ("float", 1e-5),
    "attack.perturbation": ("str", "unit_mean"),
    "attack.accept_on_detection": ("bool", False),
    "aggregator.m_adversaries": ("int", 0),
    "aggregator.beta": ("int", 0),
    "review.k": ("float", 1.0),
    "review.noniid_mode": ("bool", False),
    "review.subsample_size": ("int", None),
    "partition.scheme": ("str", "iid"),
    "partition.alpha": ("float", None),
    "partition.labels_per_client": ("int", None),
    "data.num_classes": ("int", 10),
    "data.samples_per_class": ("int", 1200),
    "data.dims": ("int", 24),
    "data.class_separation": ("float", 6.0),
    "data.test_samples_per_class": ("int", 100),
}


def default_values():
    """A fresh dict of every key at its default."""
    return {key: default for key, (_, default) in SCHEMA.items()}


def parse_value(key, raw, line_no=None):
    """Convert one raw string to the key's declared type."""
    where = f"line {line_no}: " if line_no is not None else ""
    if key not in SCHEMA:
        raise ConfigError(f"{where}unknown config key {key!r}")
    kind = SCHEMA[key][0]
    raw = raw.strip()
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        if kind == "bool":
            if raw not in ("true", "false"):
                raise ValueError
            return raw == "true"
        if kind == "ints":
            return tuple(int(part.strip()) for part in raw.split(","))
        return raw
    except ValueError:
        raise ConfigError(
            f"{where}cannot parse {raw!r} as {kind} for key {key!r}"
        ) from None


def parse_config(text):
    """Parse config text into a fully-defaulted values dict."""
    values = default_values()
    seen = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"line {line_no}: expected 'key = value', got {line!r}")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key in seen:
            raise ConfigError(f"line {line_no}: duplicate key {key!r}")
        seen.add(key)
        values[key] = parse_value(key, raw, line_no)
    return values


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def _format_value(value):
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return repr(value) if isinstance(value, float) else str(value)


def canonical_text(values):
    """Stable one-line-per-key rendering; unset optional keys are omitted."""
    lines = []
    for key in sorted(SCHEMA):
        value = values.get(key, SCHEMA[key][1])
        if value is None:
            continue
        lines.append(f"{key} = {_format_value(value)}")
    return "\n".join(lines) + "\n"


def config_hash(values):
    """SHA-256 of the canonical text; stable across machines."""
    return hashlib.sha256(canonical_text(values).encode("utf-8")).hexdigest()


def build_experiment(values):
    """Construct the `ExperimentConfig` a values dict describes."""
    unknown = set(values) - set(SCHEMA)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    merged = default_values()
    merged.update(values)

    partition_kwargs = {
        "scheme": merged["partition.scheme"],
        "num_clients": merged["num_clients"],
    }
    if merged["partition.alpha"] is not None:
        partition_kwargs["alpha"] = merged["partition.alpha"]
    if merged["partition.labels_per_client"] is not None:
        partition_kwargs["labels_per_client"] = merged["partition.labels_per_client"]

    defense = merged["defense"]
    rule = defense if defense in ("multi_krum", "trimmed_mean", "median") else "fedavg"

    return ExperimentConfig(
        num_clients=merged["num_clients"],
        rounds=merged["rounds"],
        clients_per_round=merged["clients_per_round"],
        reviewers_per_round=merged["reviewers_per_round"],
        malicious_fraction=merged["malicious_fraction"],
        malicious_count_mode=merged["malicious_count_mode"],
        defense=defense,
        attack=AttackConfig(
            kind=merged["attack.kind"],
            lam=merged["attack.lambda"],
            gamma_init=merged["attack.gamma_init"],
            tau=merged["attack.tau"],
            perturbation=merged["attack.perturbation"],
            accept_on_detection=merged["attack.accept_on_detection"],
        ),
        aggregator=AggregatorConfig(
            rule=rule,
            m_adversaries=merged["aggregator.m_adversaries"],
            beta=merged["aggregator.beta"],
        ),
        review=ReviewConfig(
            k=merged["review.k"],
            noniid_mode=merged["review.noniid_mode"],
            subsample_size=merged["review.subsample_size"],
        ),
        layer_sizes=tuple(merged["model.layer_sizes"]),
        activation=merged["model.activation"],
        sgd=SgdConfig(
            learning_rate=merged["sgd.learning_rate"],
            momentum=merged["sgd.momentum"],
            batch_size=merged["sgd.batch_size"],
            local_epochs=merged["sgd.local_epochs"],
        ),
        partition=PartitionSpec(**partition_kwargs),
        data=DataConfig(
            num_classes=merged["data.num_classes"],
            samples_per_class=merged["data.samples_per_class"],
            dims=merged["data.dims"],
            class_separation=merged["data.class_separation"],
            test_samples_per_class=merged["data.test_samples_per_class"],
        ),
        master_seed=merged["master_seed"],
    )
