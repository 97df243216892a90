"""Drives full federated experiments: sampling, training, attack, defense.

Every stochastic choice derives from the master seed through a named stream
(`fedsim.seeding`), so a config pins the whole run bit-for-bit: data and
partition, adversary assignment, model init, per-round client/reviewer
sampling, per-client shuffles, and reviewer subsampling. Reruns with the same
config produce identical `RoundRecord` streams.

Round flow: sample the training cohort, then (for the reviewer defense) the
disjoint reviewer cohort; benign cohort members train locally while
compromised members jointly upload one poisoned update crafted from the
round's benign updates; the defense removes or reweights updates; the
surviving aggregate moves the global model; test metrics are recorded.
"""

from dataclasses import dataclass

import numpy as np

from . import attacks, fedreview
from .aggregation import AggregatorConfig, apply_rule
from .attacks import AttackConfig
from .data import DataConfig, PartitionSpec, partition, train_test_split
from .errors import ConfigError, FedsimError, RoundError
from .model import SgdConfig, apply_update, evaluate, init_model, train_local
from .params import mean_of, zeros_like
from .seeding import as_rng, rng_for, seed_for

DEFENSES = ("fedavg", "multi_krum", "trimmed_mean", "median", "fedreview")
_COUNT_MODES = ("honest", "zero", "inflate")


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; one master seed pins all randomness."""

    num_clients: int = 100
    rounds: int = 60
    clients_per_round: int = 10
    reviewers_per_round: int = 10
    malicious_fraction: float = 0.2
    malicious_count_mode: str = "honest"
    defense: str = "fedavg"
    attack: AttackConfig = AttackConfig()
    aggregator: AggregatorConfig = AggregatorConfig()
    review: fedreview.ReviewConfig = fedreview.ReviewConfig()
    layer_sizes: tuple = (24, 32, 10)
    activation: str = "tanh"
    sgd: SgdConfig = SgdConfig()
    partition: PartitionSpec = PartitionSpec("iid", 100)
    data: DataConfig = DataConfig()
    master_seed: int = 0

    def __post_init__(self):
        if self.rounds < 1:
            raise ConfigError(f"rounds must be >= 1, got {self.rounds}")
        if self.clients_per_round < 1:
            raise ConfigError(
                f"clients_per_round must be >= 1, got {self.clients_per_round}"
            )
        if self.reviewers_per_round < 0:
            raise ConfigError(
                f"reviewers_per_round must be >= 0, got {self.reviewers_per_round}"
            )
        if self.clients_per_round + self.reviewers_per_round > self.num_clients:
            raise ConfigError(
                "clients_per_round + reviewers_per_round must not exceed "
                f"num_clients: {self.clients_per_round} + {self.reviewers_per_round} "
                f"> {self.num_clients}"
            )
        if not 0 <= self.malicious_fraction < 1:
            raise ConfigError(
                f"malicious_fraction must be in [0, 1), got {self.malicious_fraction}"
            )
        if self.malicious_count_mode not in _COUNT_MODES:
            raise ConfigError(
                f"unknown malicious_count_mode {self.malicious_count_mode!r}; "
                f"expected one of {_COUNT_MODES}"
            )
        if self.defense not in DEFENSES:
            raise ConfigError(
                f"unknown defense {self.defense!r}; expected one of {DEFENSES}"
            )
        if self.defense == "fedreview" and self.reviewers_per_round < 1:
            raise ConfigError("the fedreview defense needs reviewers_per_round >= 1")
        if self.defense not in ("fedreview", "fedavg") and self.aggregator.rule != self.defense:
            raise ConfigError(
                f"aggregator.rule {self.aggregator.rule!r} does not match "
                f"defense {self.defense!r}"
            )
        if self.partition.num_clients != self.num_clients:
            raise ConfigError(
                f"partition.num_clients ({self.partition.num_clients}) must equal "
                f"num_clients ({self.num_clients})"
            )
        if self.layer_sizes[0] != self.data.dims:
            raise ConfigError(
                f"layer_sizes[0] ({self.layer_sizes[0]}) must equal data.dims "
                f"({self.data.dims})"
            )
        if self.layer_sizes[-1] != self.data.num_classes:
            raise ConfigError(
                f"layer_sizes[-1] ({self.layer_sizes[-1]}) must equal "
                f"data.num_classes ({self.data.num_classes})"
            )


@dataclass(frozen=True)
class RoundRecord:
    """What happened in one round, enough to rebuild every reported table."""

    round_index: int
    selected: tuple
    reviewers: tuple
    malicious_flags: tuple
    removed: tuple
    n_adv_estimate: int
    test_loss: float
    test_accuracy: float
    gamma_succ: float = None
    dynamic_lambda: float = None
    reviewed: bool = False
    precision_flag: int = 0


def adversary_assignment(num_clients, fraction, seed):
    """floor(fraction * num_clients) distinct compromised client ids."""
    if not 0 <= fraction < 1:
        raise ConfigError(f"fraction must be in [0, 1), got {fraction}")
    count = int(fraction * num_clients)
    if count == 0:
        return set()
    picks = as_rng(seed).choice(num_clients, size=count, replace=False)
    return {int(c) for c in picks}


def prepare_data(cfg):
    """(client shards, test split) for a config, fixed by the master seed."""
    train, test = train_test_split(cfg.data, seed_for(cfg.master_seed, "data"))
    shards = partition(train, cfg.partition, seed_for(cfg.master_seed, "partition"))
    return shards, test


def _craft_poison(cfg, benign_updates, surrogates, global_params, t, template):
    """One poisoned update shared by the round's compromised clients.

    Returns (update, gamma_succ, implied lambda); the diagnostics are None
    for attacks that do not run the halving search. Degenerate rounds (no
    benign updates to mimic) upload a zero update; a single benign update
    gives the searched attacks an all-zero distance envelope, so they
    degenerate to the benign mean.
    """
    kind = cfg.attack.kind
    if not benign_updates:
        return zeros_like(template), None, None
    if kind == "scaling":
        return attacks.scaling_attack(benign_updates, cfg.attack.lam), None, None
    if len(benign_updates) == 1:
        return benign_updates[0].copy(), 0.0, None
    if kind == "min_max":
        poisoned, trace = attacks.min_max_attack(benign_updates, cfg.attack)
    elif kind == "min_sum":
        poisoned, trace = attacks.min_sum_attack(benign_updates, cfg.attack)
    else:
        amp_seed = int(seed_for(cfg.master_seed, "amp", t).generate_state(1)[0])
        poisoned, trace = attacks.amp_attack(
            benign_updates,
            surrogates,
            global_params,
            cfg.attack,
            cfg.review,
            seed=amp_seed,
        )
    lam = attacks.dynamic_lambda(trace.gamma_succ, mean_of(benign_updates))
    return poisoned, trace.gamma_succ, lam


def _review_round(cfg, model, updates, reviewers, shards, adversaries, t):
    """Collect reports, aggregate counts, and vote out suspects."""
    reports = []
    for reviewer in reviewers:
        losses = fedreview.review_losses(
            model.params,
            updates,
            shards[reviewer],
            cfg.review,
            seed_for(cfg.master_seed, "subsample", t, reviewer),
        )
        if reviewer in adversaries:
            reports.append(
                fedreview.malicious_report(
                    reviewer, losses, cfg.review.k, cfg.malicious_count_mode
                )
            )
        else:
            reports.append(fedreview.honest_report(reviewer, losses, cfg.review.k))
    n_adv = fedreview.aggregate_counts(reports)
    removed = fedreview.majority_vote(reports, n_adv, len(updates))
    return n_adv, removed


def run_experiment(cfg, test_data=None):
    """Run the configured experiment; returns (records, final params).

    ``test_data`` defaults to the synthetic test split; injecting a dataset
    replaces only the evaluation data. The test set is used for logging
    alone, never by any defense.
    """
    shards, default_test = prepare_data(cfg)
    if test_data is None:
        test_data = default_test
    if test_data.n_samples == 0:
        raise ConfigError("test data is empty")

    adversaries = adversary_assignment(
        cfg.num_clients,
        cfg.malicious_fraction,
        seed_for(cfg.master_seed, "adversaries"),
    )
    model = init_model(
        cfg.layer_sizes, cfg.activation, seed_for(cfg.master_seed, "init")
    )

    records = []
    for t in range(cfg.rounds):
        try:
            model, record = _run_round(
                cfg, model, shards, adversaries, test_data, t
            )
        except FedsimError as exc:
            raise RoundError(f"round {t}: {exc}") from exc
        records.append(record)
    return records, model.params


def _run_round(cfg, model, shards, adversaries, test_data, t):
    select_rng = rng_for(cfg.master_seed, "select", t)
    selected = sorted(
        int(c)
        for c in select_rng.choice(
            cfg.num_clients, size=cfg.clients_per_round, replace=False
        )
    )

    reviewers = []
    if cfg.defense == "fedreview":
        pool = np.array(
            [c for c in range(cfg.num_clients) if c not in set(selected)]
        )
        review_rng = rng_for(cfg.master_seed, "review-select", t)
        reviewers = sorted(
            int(c)
            for c in review_rng.choice(
                pool, size=cfg.reviewers_per_round, replace=False
            )
        )

    benign_updates = {}
    for cid in selected:
        if cid not in adversaries or cfg.attack.kind == "none":
            benign_updates[cid] = train_local(
                model,
                shards[cid],
                cfg.sgd,
                seed_for(cfg.master_seed, "train", t, cid),
            )

    malicious_slots = [
        cid for cid in selected
        if cid in adversaries and cfg.attack.kind != "none"
    ]
    gamma_succ, dyn_lambda = None, None
    poisoned = None
    if malicious_slots:
        surrogates = _surrogate_datasets(
            cfg, shards, adversaries, set(selected) | set(reviewers), t
        )
        poisoned, gamma_succ, dyn_lambda = _craft_poison(
            cfg,
            [benign_updates[cid] for cid in selected if cid in benign_updates],
            surrogates,
            model.params,
            t,
            model.params,
        )

    updates, flags = [], []
    for cid in selected:
        if cid in benign_updates:
            updates.append(benign_updates[cid])
            flags.append(False)
        else:
            updates.append(poisoned)
            flags.append(True)

    removed = set()
    n_adv = 0
    if cfg.defense == "fedreview":
        n_adv, removed = _review_round(
            cfg, model, updates, reviewers, shards, adversaries, t
        )
        survivors = [u for i, u in enumerate(updates) if i not in removed]
        # an empty survivor list freezes the model for this round
        aggregate = (
            mean_of(survivors) if survivors else zeros_like(model.params)
        )
    else:
        aggregate = apply_rule(updates, _aggregator_for(cfg))

    model = apply_update(model, aggregate)
    test_loss, test_accuracy = evaluate(model, test_data)

    record = RoundRecord(
        round_index=t,
        selected=tuple(selected),
        reviewers=tuple(reviewers),
        malicious_flags=tuple(flags),
        removed=tuple(sorted(removed)),
        n_adv_estimate=int(n_adv),
        test_loss=float(test_loss),
        test_accuracy=float(test_accuracy),
        gamma_succ=gamma_succ,
        dynamic_lambda=dyn_lambda,
        reviewed=cfg.defense == "fedreview",
        precision_flag=int(cfg.defense == "fedreview" and not removed),
    )
    return model, record


def _aggregator_for(cfg):
    if cfg.defense == "fedavg":
        return AggregatorConfig(rule="fedavg")
    return cfg.aggregator


def _surrogate_datasets(cfg, shards, adversaries, busy, t):
    """Datasets the adaptive attack uses as stand-in reviewers.

    Preference goes to compromised clients outside this round's cohorts;
    when none exist, all compromised clients qualify. At most
    reviewers_per_round (or clients_per_round when no reviewers are
    configured) are drawn, so the surrogate panel mirrors the real one.
    """
    if cfg.attack.kind != "amp":
        return []
    idle = sorted(c for c in adversaries if c not in busy)
    pool = idle if idle else sorted(adversaries)
    cap = cfg.reviewers_per_round if cfg.reviewers_per_round >= 1 else cfg.clients_per_round
    count = min(len(pool), cap)
    if count == 0:
        return []
    rng = rng_for(cfg.master_seed, "surrogate", t)
    picks = sorted(int(c) for c in rng.choice(np.array(pool), size=count, replace=False))
    return [shards[c] for c in picks]


def detection_metrics(records):
    """(precision, recall) of removals over all reviewed rounds.

    Cumulative over rounds: precision = correctly removed / removed,
    recall = correctly removed / malicious present. A zero denominator
    reports 1.0 (nothing to get wrong); rounds that were not reviewed are
    ignored.
    """
    reviewed = [r for r in records if r.reviewed]
    if not reviewed:
        raise ConfigError("detection metrics need at least one reviewed round")
    true_pos = removed_total = malicious_total = 0
    for rec in reviewed:
        removed_total += len(rec.removed)
        malicious_total += sum(rec.malicious_flags)
        true_pos += sum(1 for i in rec.removed if rec.malicious_flags[i])
    precision = true_pos / removed_total if removed_total else 1.0
    recall = true_pos / malicious_total if malicious_total else 1.0
    return precision, recall
