"""Poisoning attacks: fixed scaling, envelope-constrained searches, and the
defense-adaptive search."""

import math

import numpy as np
import pytest

from fedsim.attacks import (
    AttackConfig,
    amp_attack,
    dynamic_lambda,
    min_max_attack,
    min_sum_attack,
    scaling_attack,
)
from fedsim.data import generate_synthetic
from fedsim.errors import ConfigError, DegenerateDirectionError
from fedsim.fedreview import (
    ReviewConfig,
    aggregate_counts,
    honest_report,
    majority_vote,
    review_losses,
)
from fedsim.model import SgdConfig, gradient, init_model, train_local
from fedsim.params import ParamVector, mean_of

SCALAR = "mlp:1-1:tanh"


def vecs(rows, shape_id="mlp:2-2:tanh"):
    return [ParamVector(np.asarray(r, dtype=np.float64), shape_id) for r in rows]


def iteration_bound(cfg):
    return math.ceil(math.log2(cfg.gamma_init / cfg.tau)) + 2


class TestScalingAttack:
    def test_negated_scaled_mean(self):
        out = scaling_attack(vecs([[1.0, 2.0], [3.0, 4.0]]), lam=5.0)
        np.testing.assert_allclose(out.values, [-10.0, -15.0])

    def test_lambda_zero_is_zero_vector(self):
        out = scaling_attack(vecs([[1.0, 2.0]]), lam=0.0)
        np.testing.assert_allclose(out.values, [0.0, 0.0])

    def test_lambda_one_flips_single_update(self):
        out = scaling_attack(vecs([[-1.0, -2.0]]), lam=1.0)
        np.testing.assert_allclose(out.values, [1.0, 2.0])

    def test_neutralizes_pooled_mean(self):
        # b benign copies of u plus m poisoned copies built with lambda = b/m
        # leave the pooled round mean at exactly zero
        rng = np.random.default_rng(8)
        for b, m in [(8, 2), (9, 1), (6, 4), (5, 5)]:
            u = ParamVector(rng.normal(size=6), "mlp:5-1:tanh")
            benign = [u] * b
            poison = scaling_attack(benign, lam=b / m)
            pooled = mean_of(benign + [poison] * m)
            np.testing.assert_allclose(pooled.values, 0.0, atol=1e-12)


class TestDynamicLambda:
    def test_hand_value(self):
        mean = ParamVector(np.array([1.0, 0.0]), "mlp:2-2:tanh")
        assert abs(dynamic_lambda(3.0, mean) - 2.0) < 1e-12

    def test_gamma_equal_norm_gives_zero(self):
        mean = ParamVector(np.array([3.0, 4.0]), "mlp:2-2:tanh")
        assert abs(dynamic_lambda(5.0, mean)) < 1e-12

    def test_zero_mean_rejected(self):
        mean = ParamVector(np.zeros(3), "mlp:5-1:tanh")
        with pytest.raises(DegenerateDirectionError):
            dynamic_lambda(1.0, mean)


class TestMinMaxAttack:
    def test_two_scalars_analytic_boundary(self):
        # benign {1, 3}: the candidate 2 - gamma must stay within the max
        # pairwise distance 2 of both points; the binding constraint is
        # |1 + gamma| <= 2, so the exact boundary is gamma = 1
        cfg = AttackConfig(kind="min_max", gamma_init=50.0, tau=1e-5)
        poisoned, trace = min_max_attack(vecs([[1.0], [3.0]], SCALAR), cfg)
        assert 1.0 - 1e-4 <= trace.gamma_succ <= 1.0
        np.testing.assert_allclose(poisoned.values, [1.0], atol=1e-4)

    def test_identical_benign_returns_mean(self):
        cfg = AttackConfig(kind="min_max", gamma_init=50.0, tau=1e-5)
        poisoned, trace = min_max_attack(vecs([[2.0, 1.0]] * 3), cfg)
        assert trace.gamma_succ == 0.0
        np.testing.assert_allclose(poisoned.values, [2.0, 1.0], atol=0)

    def test_distance_envelope_respected(self):
        rng = np.random.default_rng(19)
        cfg = AttackConfig(kind="min_max", gamma_init=50.0, tau=1e-5)
        for _ in range(10):
            rows = rng.normal(size=(6, 5))
            poisoned, trace = min_max_attack(vecs(rows), cfg)
            max_pair = max(
                np.linalg.norm(a - b) for a in rows for b in rows
            )
            dists = np.linalg.norm(rows - poisoned.values, axis=1)
            assert dists.max() <= max_pair + 1e-9
            # near-maximal: a slightly larger step must violate the envelope
            mean = rows.mean(axis=0)
            unit = mean / np.linalg.norm(mean)
            bigger = mean - (trace.gamma_succ + 10 * cfg.tau) * unit
            assert np.linalg.norm(rows - bigger, axis=1).max() > max_pair


class TestMinSumAttack:
    def test_matches_grid_search_oracle(self):
        # independent oracle: dense coarse-to-fine scan of the largest gamma
        # whose summed distance stays inside the pairwise-distance budget
        rng = np.random.default_rng(77)
        xs = rng.normal(1.0, 0.5, size=5)
        cfg = AttackConfig(kind="min_sum", gamma_init=50.0, tau=1e-5)
        poisoned, trace = min_sum_attack(vecs([[x] for x in xs], SCALAR), cfg)

        mean = xs.mean()
        sign = np.sign(mean)
        budget = np.abs(xs[:, None] - xs[None, :]).sum()
        grid = np.linspace(0.0, cfg.gamma_init, 200001)
        totals = np.abs((mean - grid[:, None] * sign) - xs[None, :]).sum(axis=1)
        coarse = grid[totals <= budget].max()
        fine = np.linspace(coarse, coarse + grid[1] - grid[0], 10001)
        totals = np.abs((mean - fine[:, None] * sign) - xs[None, :]).sum(axis=1)
        oracle = fine[totals <= budget].max()

        assert abs(trace.gamma_succ - oracle) <= 5 * cfg.tau
        np.testing.assert_allclose(poisoned.values, [mean - trace.gamma_succ * sign])

    def test_sum_envelope_respected(self):
        rng = np.random.default_rng(23)
        cfg = AttackConfig(kind="min_sum", gamma_init=50.0, tau=1e-5)
        for _ in range(10):
            rows = rng.normal(size=(7, 4))
            poisoned, trace = min_sum_attack(vecs(rows), cfg)
            budget = sum(
                np.linalg.norm(a - b) for a in rows for b in rows
            )
            total = np.linalg.norm(rows - poisoned.values, axis=1).sum()
            assert total <= budget + 1e-9
            mean = rows.mean(axis=0)
            unit = mean / np.linalg.norm(mean)
            bigger = mean - (trace.gamma_succ + 10 * cfg.tau) * unit
            assert np.linalg.norm(rows - bigger, axis=1).sum() > budget


class TestSearchedAttackProperties:
    def sample_traces(self):
        rng = np.random.default_rng(31)
        cfg = AttackConfig(kind="min_max", gamma_init=50.0, tau=1e-5)
        out = []
        for attack in (min_max_attack, min_sum_attack):
            for _ in range(5):
                rows = rng.normal(size=(6, 4))
                updates = vecs(rows)
                out.append((attack, updates, *attack(updates, cfg), cfg))
        return out

    def test_equivalent_to_scaling_with_dynamic_lambda(self):
        for _, updates, poisoned, trace, _ in self.sample_traces():
            mean = mean_of(updates)
            lam = dynamic_lambda(trace.gamma_succ, mean)
            equivalent = scaling_attack(updates, lam)
            np.testing.assert_allclose(equivalent.values, poisoned.values, atol=1e-10)

    def test_iteration_count_bounded(self):
        for _, _, _, trace, cfg in self.sample_traces():
            assert 1 <= len(trace.iterations) <= iteration_bound(cfg)

    def test_accepted_gammas_below_rejected(self):
        # the envelope acceptance regions are intervals starting at zero, so
        # every accepted probe must sit below every rejected probe
        for _, _, _, trace, _ in self.sample_traces():
            accepted = [g for g, ok in trace.iterations if ok]
            rejected = [g for g, ok in trace.iterations if not ok]
            if accepted and rejected:
                assert max(accepted) <= min(rejected)

    def test_gamma_succ_was_actually_probed(self):
        for _, _, _, trace, _ in self.sample_traces():
            if trace.gamma_succ:
                assert (trace.gamma_succ, True) in trace.iterations


class TestDegenerateInputs:
    def test_single_update_rejected(self):
        cfg = AttackConfig(kind="min_max")
        with pytest.raises(ConfigError):
            min_max_attack(vecs([[1.0, 1.0]]), cfg)

    def test_zero_mean_rejected(self):
        cfg = AttackConfig(kind="min_sum")
        with pytest.raises(DegenerateDirectionError):
            min_sum_attack(vecs([[1.0, -2.0], [-1.0, 2.0]]), cfg)


class TestAmpAttack:
    def setup_linear_descent(self):
        """Benign pair of identical gradient steps on a convex model.

        With a single linear layer the loss is convex along any parameter
        ray, and stepping against a descent direction strictly increases it,
        so every probed candidate scores worse than the benign copies.
        """
        data = generate_synthetic(4, 40, 6, 4.0, seed=60)
        model = init_model((6, 4), "tanh", seed=61)
        step = ParamVector(-0.1 * gradient(model, data).values, model.shape_id)
        return data, model, step

    def test_always_detected_returns_mean(self):
        # two identical benign losses give a zero robust spread, so any
        # strictly larger candidate loss is flagged at every gamma; the
        # search ends empty-handed and the upload degenerates to the mean
        data, model, step = self.setup_linear_descent()
        cfg = AttackConfig(kind="amp", gamma_init=50.0, tau=1e-4)
        poisoned, trace = amp_attack(
            [step, step], [data], model.params, cfg, ReviewConfig(k=1.0)
        )
        assert trace.gamma_succ == 0.0
        assert all(not ok for _, ok in trace.iterations)
        assert np.array_equal(poisoned.values, step.values)
        assert len(trace.iterations) <= iteration_bound(cfg)

    def test_accept_on_detection_flips_every_verdict(self):
        data, model, step = self.setup_linear_descent()
        flipped = AttackConfig(
            kind="amp", gamma_init=50.0, tau=1e-4, accept_on_detection=True
        )
        poisoned, trace = amp_attack(
            [step, step], [data], model.params, flipped, ReviewConfig(k=1.0)
        )
        assert all(ok for _, ok in trace.iterations)
        # with everything accepted the search climbs past its starting point
        assert trace.gamma_succ >= flipped.gamma_init
        assert not np.array_equal(poisoned.values, step.values)

    def mixed_setup(self):
        model = init_model((6, 8, 4), "tanh", seed=63)
        reviewers = [
            generate_synthetic(4, 30, 6, 4.0, seed=64),
            generate_synthetic(4, 30, 6, 4.0, seed=65),
        ]
        benign = [
            train_local(
                model,
                generate_synthetic(4, 25, 6, 4.0, seed=70 + i),
                SgdConfig(local_epochs=2),
                seed=80 + i,
            )
            for i in range(5)
        ]
        return model, reviewers, benign

    def test_boundary_gammas_replay_against_the_defense(self):
        # rebuild the surrogate defense by hand: the winning gamma must
        # evade it and the smallest rejected gamma must be caught by it
        model, reviewers, benign = self.mixed_setup()
        cfg = AttackConfig(kind="amp", gamma_init=10.0, tau=1e-3)
        review_cfg = ReviewConfig(k=1.0)
        poisoned, trace = amp_attack(
            benign, reviewers, model.params, cfg, review_cfg, seed=5
        )
        accepted = [g for g, ok in trace.iterations if ok]
        rejected = [g for g, ok in trace.iterations if not ok]
        assert accepted and rejected, "search never straddled the boundary"
        assert len(trace.iterations) <= iteration_bound(cfg)

        mean = mean_of(benign)
        unit = ParamVector(mean.values / mean.norm(), mean.shape_id)

        def defense_removes(gamma):
            candidate = ParamVector(
                mean.values - gamma * unit.values, mean.shape_id
            )
            pooled = benign + [candidate]
            reports = []
            for r, data in enumerate(reviewers):
                losses = review_losses(
                    model.params, pooled, data, review_cfg,
                    np.random.SeedSequence([5, r]),
                )
                reports.append(honest_report(r, losses, review_cfg.k))
            n_adv = aggregate_counts(reports)
            return len(benign) in majority_vote(reports, n_adv, len(pooled))

        assert not defense_removes(trace.gamma_succ)
        assert defense_removes(min(rejected))
        np.testing.assert_allclose(
            poisoned.values, mean.values - trace.gamma_succ * unit.values
        )

    def test_needs_a_surrogate_reviewer(self):
        _, _, benign = self.mixed_setup()
        model = init_model((6, 8, 4), "tanh", seed=63)
        cfg = AttackConfig(kind="amp")
        with pytest.raises(ConfigError):
            amp_attack(benign, [], model.params, cfg, ReviewConfig())


class TestAttackConfig:
    def test_invalid_values_rejected(self):
        with pytest.raises(ConfigError):
            AttackConfig(kind="poison")
        with pytest.raises(ConfigError):
            AttackConfig(gamma_init=0.0)
        with pytest.raises(ConfigError):
            AttackConfig(tau=0.0)
        with pytest.raises(ConfigError):
            AttackConfig(gamma_init=1e-6, tau=1e-5)
        with pytest.raises(ConfigError):
            AttackConfig(lam=float("nan"))
        with pytest.raises(ConfigError):
            AttackConfig(perturbation="orthogonal")
