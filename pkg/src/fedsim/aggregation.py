"""Baseline aggregation rules over a round's model updates.

All four rules are order-invariant and operate on lists of `ParamVector`s
with a common shape id: plain unweighted FedAvg, Multi-Krum's iterative
distance-based selection, and the coordinate-wise trimmed mean and median.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .params import ParamVector, mean_of, stack

RULES = ("fedavg", "multi_krum", "trimmed_mean", "median")


@dataclass(frozen=True)
class AggregatorConfig:
    """Which rule to apply and its knobs.

    ``m_adversaries`` feeds multi_krum, ``beta`` feeds trimmed_mean; the
    round-size preconditions (n - 2*m_adversaries - 2 >= 1,
    n - 2*beta >= 1) are checked at call time since n varies per round.
    """

    rule: str = "fedavg"
    m_adversaries: int = 0
    beta: int = 0

    def __post_init__(self):
        if self.rule not in RULES:
            raise ConfigError(
                f"unknown aggregation rule {self.rule!r}; expected one of {RULES}"
            )
        if self.m_adversaries < 0:
            raise ConfigError(f"m_adversaries must be >= 0, got {self.m_adversaries}")
        if self.beta < 0:
            raise ConfigError(f"beta must be >= 0, got {self.beta}")


def fedavg(updates):
    """Unweighted coordinate-wise mean."""
    return mean_of(updates)


def multi_krum(updates, m_adversaries):
    """Iterative Krum selection, then the mean of the selected updates.

    Each iteration scores every remaining update by the sum of squared
    Euclidean distances to its n - m_adversaries - 2 nearest remaining
    updates (n is the original count; the neighbor count is capped at
    remaining - 1 as the pool shrinks), selects the minimum (ties go to the
    lower update index), and removes it from the pool. After
    n - 2*m_adversaries - 2 selections the selected updates are averaged.
    """
    n = len(updates)
    m = int(m_adversaries)
    n_select = n - 2 * m - 2
    if n_select < 1 or n - m - 2 < 1:
        raise ConfigError(
            f"multi_krum needs n - 2m - 2 >= 1 and n - m - 2 >= 1, "
            f"got n={n}, m={m}"
        )
    matrix = stack(updates)
    diffs = matrix[:, None, :] - matrix[None, :, :]
    sq_dists = np.einsum("ijk,ijk->ij", diffs, diffs)

    remaining = list(range(n))
    selected = []
    for _ in range(n_select):
        k_neighbors = min(n - m - 2, len(remaining) - 1)
        best_idx, best_score = None, None
        for i in remaining:
            others = [j for j in remaining if j != i]
            d = np.sort(sq_dists[i, others])
            score = float(d[:k_neighbors].sum())
            if best_score is None or score < best_score:
                best_idx, best_score = i, score
        selected.append(best_idx)
        remaining.remove(best_idx)
    return mean_of([updates[i] for i in selected])


def trimmed_mean(updates, beta):
    """Coordinate-wise mean after dropping beta values from each end."""
    n = len(updates)
    beta = int(beta)
    if beta < 0:
        raise ConfigError(f"beta must be >= 0, got {beta}")
    if n - 2 * beta < 1:
        raise ConfigError(f"trimmed_mean needs n - 2*beta >= 1, got n={n}, beta={beta}")
    matrix = np.sort(stack(updates), axis=0)
    kept = matrix[beta : n - beta]
    return ParamVector(kept.mean(axis=0), updates[0].shape_id)


def median_agg(updates):
    """Coordinate-wise median; an even count averages the two middle values."""
    matrix = stack(updates)
    return ParamVector(np.median(matrix, axis=0), updates[0].shape_id)


def apply_rule(updates, cfg):
    """Dispatch to the configured rule."""
    if cfg.rule == "fedavg":
        return fedavg(updates)
    if cfg.rule == "multi_krum":
        return multi_krum(updates, cfg.m_adversaries)
    if cfg.rule == "trimmed_mean":
        return trimmed_mean(updates, cfg.beta)
    return median_agg(updates)
