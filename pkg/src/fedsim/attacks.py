"""Model-poisoning attacks: scaling, min-max, min-sum, and the adaptive one.

The scaling attack uploads the negated benign mean times a fixed factor. The
min-max and min-sum attacks instead push as far as possible along the
negated unit-mean direction while staying inside a distance envelope of the
benign updates, maximizing the step size gamma with a halving search; both
are equivalent to the scaling attack with a dynamic factor
lambda = gamma/||mean|| - 1. The adaptive attack reuses the same search but
accepts a gamma only if the candidate update slips past a surrogate copy of
the reviewer defense run on data the adversary controls.
"""

from dataclasses import dataclass, field

import numpy as np

from . import fedreview
from .errors import ConfigError, DegenerateDirectionError
from .params import ParamVector, mean_of, stack

_KINDS = ("none", "scaling", "min_max", "min_sum", "amp")
_PERTURBATIONS = ("unit_mean",)


@dataclass(frozen=True)
class AttackConfig:
    """Attack kind and knobs.

    ``lam`` is the scaling attack's fixed factor (the config key is
    ``attack.lambda``; the field avoids the Python keyword). ``gamma_init``
    and ``tau`` drive the halving search. ``accept_on_detection`` flips the
    adaptive attack's acceptance test from "the candidate evades the
    surrogate removal set" (the default, matching the attack's stated
    objective) to the opposite branch for comparison runs.
    """

    kind: str = "none"
    lam: float = 5.0
    gamma_init: float = 50.0
    tau: float = 1e-5
    perturbation: str = "unit_mean"
    accept_on_detection: bool = False

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(
                f"unknown attack kind {self.kind!r}; expected one of {_KINDS}"
            )
        if not np.isfinite(self.lam):
            raise ConfigError(f"lambda must be finite, got {self.lam}")
        if not self.gamma_init > 0:
            raise ConfigError(f"gamma_init must be > 0, got {self.gamma_init}")
        if not self.tau > 0:
            raise ConfigError(f"tau must be > 0, got {self.tau}")
        if not self.tau < self.gamma_init:
            raise ConfigError(
                f"tau must be smaller than gamma_init, got tau={self.tau} "
                f"gamma_init={self.gamma_init}"
            )
        if self.perturbation not in _PERTURBATIONS:
            raise ConfigError(
                f"unknown perturbation {self.perturbation!r}; "
                f"expected one of {_PERTURBATIONS}"
            )


@dataclass(frozen=True)
class BinarySearchTrace:
    """Every gamma the halving search tested, in order, plus the winner."""

    iterations: tuple = field(default_factory=tuple)
    gamma_succ: float = 0.0


def scaling_attack(benign_updates, lam):
    """The negated benign mean scaled by ``lam``."""
    return -float(lam) * mean_of(benign_updates)


def dynamic_lambda(gamma, mean_update):
    """The scaling factor a searched attack implies: gamma/||mean|| - 1."""
    norm = mean_update.norm()
    if norm == 0:
        raise DegenerateDirectionError(
            "dynamic lambda is undefined for a zero mean update"
        )
    return float(gamma) / norm - 1.0


def _halving_search(accept, gamma_init, tau):
    """Maximize gamma under a monotone-ish acceptance predicate.

    Starts at gamma_init with step alpha = gamma_init; acceptance records
    gamma and moves up half a step, rejection moves down half a step, and the
    step halves every iteration, stopping once the best accepted gamma is
    within tau of the probe. gamma_succ stays 0 when nothing is accepted.
    """
    gamma = float(gamma_init)
    gamma_succ = 0.0
    alpha = float(gamma_init)
    iterations = []
    while abs(gamma_succ - gamma) > tau:
        ok = bool(accept(gamma))
        iterations.append((gamma, ok))
        if ok:
            gamma_succ = gamma
            gamma = gamma + alpha / 2
        else:
            gamma = gamma - alpha / 2
        alpha = alpha / 2
    return gamma_succ, BinarySearchTrace(tuple(iterations), gamma_succ)


def _mean_and_direction(benign_updates):
    if len(benign_updates) < 2:
        raise ConfigError("need at least two benign updates to fit the envelope")
    mean = mean_of(benign_updates)
    norm = mean.norm()
    if norm == 0:
        raise DegenerateDirectionError(
            "mean update is the zero vector; no perturbation direction exists"
        )
    return mean, ParamVector(mean.values / norm, mean.shape_id)


def _finish_search(mean, direction, cfg, accept):
    gamma_succ, trace = _halving_search(accept, cfg.gamma_init, cfg.tau)
    poisoned = ParamVector(
        mean.values - gamma_succ * direction.values, mean.shape_id
    )
    return poisoned, trace


def min_max_attack(benign_updates, cfg):
    """Largest step whose distance to every benign update stays within the
    maximum benign pairwise distance."""
    mean, direction = _mean_and_direction(benign_updates)
    matrix = stack(benign_updates)
    diffs = matrix[:, None, :] - matrix[None, :, :]
    max_pair = float(np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs)).max())

    def accept(gamma):
        candidate = mean.values - gamma * direction.values
        dists = np.linalg.norm(matrix - candidate, axis=1)
        return float(dists.max()) <= max_pair

    return _finish_search(mean, direction, cfg, accept)


def min_sum_attack(benign_updates, cfg):
    """Largest step whose summed distance to the benign updates stays within
    the benign pairwise distance sum (double sum over ordered index pairs)."""
    mean, direction = _mean_and_direction(benign_updates)
    matrix = stack(benign_updates)
    diffs = matrix[:, None, :] - matrix[None, :, :]
    pair_sum = float(np.sqrt(np.einsum("ijk,ijk->ij", diffs, diffs)).sum())

    def accept(gamma):
        candidate = mean.values - gamma * direction.values
        dists = np.linalg.norm(matrix - candidate, axis=1)
        return float(dists.sum()) <= pair_sum

    return _finish_search(mean, direction, cfg, accept)


def amp_attack(benign_updates, surrogate_reviewers, global_params, cfg, review_cfg,
               seed=0):
    """Largest step that still evades a surrogate run of the reviewer defense.

    For each probed gamma the candidate update is appended to the benign
    updates and the compromised clients' datasets play reviewer: each scores
    all pooled updates, the counts are median-aggregated, and the majority
    vote picks a removal set. The default acceptance is that the candidate is
    NOT in that set; ``cfg.accept_on_detection`` flips the branch. ``seed``
    feeds only the optional class-balanced subsampling, fixed per reviewer
    across the whole search.
    """
    if not surrogate_reviewers:
        raise ConfigError("amp attack needs at least one surrogate reviewer dataset")
    mean, direction = _mean_and_direction(benign_updates)
    candidate_index = len(benign_updates)

    def accept(gamma):
        candidate = ParamVector(
            mean.values - gamma * direction.values, mean.shape_id
        )
        pooled = list(benign_updates) + [candidate]
        reports = []
        for r, reviewer_data in enumerate(surrogate_reviewers):
            losses = fedreview.review_losses(
                global_params,
                pooled,
                reviewer_data,
                review_cfg,
                np.random.SeedSequence([int(seed), r]),
            )
            reports.append(fedreview.honest_report(r, losses, review_cfg.k))
        n_adv = fedreview.aggregate_counts(reports)
        removed = fedreview.majority_vote(reports, n_adv, len(pooled))
        detected = candidate_index in removed
        return detected if cfg.accept_on_detection else not detected

    return _finish_search(mean, direction, cfg, accept)
