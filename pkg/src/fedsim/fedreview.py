"""Reviewer-based detect-and-discard defense.

Each selected reviewer evaluates every candidate update's loss on its own
local data, estimates how many updates look poisoned (robust outlier count),
and ranks updates from most to least suspicious. The server takes the median
of the reported counts and removes the updates that win a majority vote over
the reviewers' top-ranked suspects. An analytic helper gives the probability
that benign reviewers hold a majority for a given adversary fraction.
"""

import math
from dataclasses import dataclass

import numpy as np

from .data import balanced_subsample
from .errors import ConfigError, ReviewReportError
from .model import dataset_loss, model_for
from .seeding import as_rng

_COUNT_MODES = ("honest", "zero", "inflate")


@dataclass(frozen=True)
class ReviewConfig:
    """Defense knobs.

    ``k`` scales the robust outlier threshold (count losses above
    median + k*sigma). In ``noniid_mode`` each reviewer evaluates losses on a
    class-balanced subsample of its data instead of the raw shard;
    ``subsample_size`` defaults to min(shard size, 256) when unset.
    """

    k: float = 1.0
    noniid_mode: bool = False
    subsample_size: int = None

    def __post_init__(self):
        if not self.k > 0:
            raise ConfigError(f"k must be > 0, got {self.k}")
        if self.subsample_size is not None:
            if not self.noniid_mode:
                raise ConfigError("subsample_size is only valid with noniid_mode")
            if self.subsample_size < 1:
                raise ConfigError(
                    f"subsample_size must be >= 1, got {self.subsample_size}"
                )


@dataclass(frozen=True)
class ReviewReport:
    """One reviewer's verdict on a round's updates.

    ``ranking`` maps update index -> rank, rank 0 being the most suspicious
    (highest loss). ``n_adv_r`` is the reviewer's estimate of how many
    updates are poisoned.
    """

    reviewer_id: int
    n_adv_r: int
    ranking: np.ndarray

    def __post_init__(self):
        if self.n_adv_r < 0:
            raise ReviewReportError(
                f"reviewer {self.reviewer_id}: negative adversary count"
            )
        object.__setattr__(
            self, "ranking", np.ascontiguousarray(self.ranking, dtype=np.int64)
        )
        if self.ranking.ndim != 1:
            raise ReviewReportError(
                f"reviewer {self.reviewer_id}: ranking must be 1-D"
            )


def review_losses(global_params, updates, reviewer_data, cfg, seed):
    """Loss of (global params + update) on the reviewer's data, per update.

    In ``noniid_mode`` one class-balanced subsample is drawn first and all
    updates are scored on that same subsample, so the comparison between
    updates stays apples-to-apples.
    """
    data = reviewer_data
    if cfg.noniid_mode:
        size = cfg.subsample_size
        if size is None:
            size = min(reviewer_data.n_samples, 256)
        data = balanced_subsample(reviewer_data, size, as_rng(seed))
    losses = []
    for update in updates:
        candidate = model_for(global_params + update)
        losses.append(dataset_loss(candidate, data))
    return losses


def estimate_n_adv(losses, k):
    """Robust outlier count: losses strictly above median + k*sigma.

    sigma is the square root of the median squared deviation from the
    median, so a minority of huge losses cannot drag the threshold up. With
    sigma = 0 (e.g. all losses equal) nothing exceeds the strict threshold.
    """
    losses = np.asarray(losses, dtype=np.float64)
    if losses.size == 0:
        raise ConfigError("estimate_n_adv needs at least one loss")
    mu = float(np.median(losses))
    sigma = float(np.sqrt(np.median((losses - mu) ** 2)))
    return int(np.sum(losses > mu + float(k) * sigma))


def rank_updates(losses):
    """Map update index -> rank, rank 0 = highest loss; ties to lower index."""
    losses = np.asarray(losses, dtype=np.float64)
    order = sorted(range(losses.size), key=lambda i: (-losses[i], i))
    ranking = np.empty(losses.size, dtype=np.int64)
    for rank, idx in enumerate(order):
        ranking[idx] = rank
    return ranking


def honest_report(reviewer_id, losses, k):
    """Report as a well-behaved reviewer: true estimate, true ranking."""
    return ReviewReport(
        reviewer_id=reviewer_id,
        n_adv_r=estimate_n_adv(losses, k),
        ranking=rank_updates(losses),
    )


def malicious_report(reviewer_id, losses, k, count_mode="honest"):
    """Report as a compromised reviewer.

    The ranking is the reverse of the honest one, pushing poisoned updates to
    the least-suspicious end. The reported count is the honest estimate by
    default; ``count_mode`` can force it to zero or inflate it to the round
    size for robustness experiments.
    """
    if count_mode not in _COUNT_MODES:
        raise ConfigError(
            f"unknown count_mode {count_mode!r}; expected one of {_COUNT_MODES}"
        )
    honest_ranking = rank_updates(losses)
    n = honest_ranking.shape[0]
    if count_mode == "zero":
        count = 0
    elif count_mode == "inflate":
        count = n
    else:
        count = estimate_n_adv(losses, k)
    return ReviewReport(
        reviewer_id=reviewer_id,
        n_adv_r=count,
        ranking=(n - 1) - honest_ranking,
    )


def aggregate_counts(reports):
    """Lower median of the reported adversary counts.

    The lower median (the floor((m-1)/2)-th order statistic) keeps the count
    an integer and errs toward removing fewer updates.
    """
    if not reports:
        raise ConfigError("aggregate_counts needs at least one report")
    counts = sorted(r.n_adv_r for r in reports)
    return counts[(len(counts) - 1) // 2]


def _check_permutation(report, round_size):
    ranking = report.ranking
    if ranking.shape[0] != round_size or not np.array_equal(
        np.sort(ranking), np.arange(round_size)
    ):
        raise ReviewReportError(
            f"reviewer {report.reviewer_id}: ranking is not a permutation of "
            f"0..{round_size - 1}"
        )


def majority_vote(reports, n_adv, round_size):
    """Vote on which updates to remove; returns a set of update indices.

    Every reviewer casts one vote for each of its ``n_adv`` most-suspicious
    updates; the ``n_adv`` updates with the most votes are removed. Ties at
    the cutoff go to the lower update index. An invalid ranking rejects that
    reviewer's report by name.
    """
    if n_adv > round_size:
        raise ConfigError(
            f"n_adv={n_adv} exceeds the round size {round_size}"
        )
    if n_adv == 0:
        return set()
    votes = np.zeros(round_size, dtype=np.int64)
    for report in reports:
        _check_permutation(report, round_size)
        suspects = np.argsort(report.ranking)[:n_adv]
        votes[suspects] += 1
    by_votes = sorted(range(round_size), key=lambda i: (-votes[i], i))
    return set(by_votes[:n_adv])


def dominance_probability(n, p):
    """P[at most floor(n/2) of n reviewers are adversarial] for fraction p.

    Binomial tail: sum_{i=0}^{floor(n/2)} C(n,i) p^i (1-p)^(n-i). This is the
    probability that benign reviewers hold at least half the seats, i.e. that
    the majority vote is trustworthy.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if not 0 <= p <= 1:
        raise ConfigError(f"p must be in [0, 1], got {p}")
    return float(
        sum(
            math.comb(n, i) * p**i * (1.0 - p) ** (n - i)
            for i in range(n // 2 + 1)
        )
    )
