from __future__ import annotations

import numpy as np
import pytest

from floormatch.model import AgentPreference
from floormatch.simgen import (
    SCENARIO_NOISE_SCALES,
    InvalidConfig,
    SimConfig,
    generate_instance,
    perturb_preferences,
    replace_preferences,
)


def rank_matrix(inst) -> np.ndarray:
    # (n, L) position of each location in each agent's full strict order
    r = np.empty((inst.n, inst.n_locations))
    for i, p in enumerate(inst.preferences):
        for rank, loc in enumerate(p.prefix):
            r[i, loc] = rank
    return r


class TestConfigValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"n": 1},
            {"n": 10, "rho_p": -0.1},
            {"n": 10, "rho_p": 1.0},
            {"n": 10, "rho_op": 1.0},
            {"n": 10, "rho_op": -1.0},
            {"n": 10, "truncation_k": 0},
        ],
    )
    def test_rejected(self, kwargs):
        with pytest.raises(InvalidConfig):
            SimConfig(**kwargs).validate()

    def test_accepted(self):
        SimConfig(n=2, rho_p=0.99, rho_op=-0.99, truncation_k=1).validate()
        SimConfig(n=100, rho_p=0.8, rho_op=0.5, truncation_k=10).validate()


class TestStructure:
    def test_shape_and_range(self):
        inst = generate_instance(SimConfig(n=30, rho_p=0.4, rho_op=0.3, seed=2))
        assert inst.n == 30 and inst.n_locations == 30
        assert inst.locations == tuple(f"L{j + 1}" for j in range(30))
        assert inst.capacities == (1,) * 30
        assert inst.outcomes.min() >= 0.0 and inst.outcomes.max() <= 1.0

    def test_scores_survive_text_round_trip(self):
        inst = generate_instance(SimConfig(n=25, rho_op=0.5, seed=7))
        for x in inst.outcomes.ravel():
            assert x == float(f"{x:.12g}")

    def test_full_ranking_by_default(self):
        inst = generate_instance(SimConfig(n=12, seed=0))
        for p in inst.preferences:
            assert len(p.prefix) == 12
            assert sorted(p.prefix) == list(range(12))

    def test_truncation_depth(self):
        inst = generate_instance(SimConfig(n=20, truncation_k=6, seed=1))
        assert all(len(p.prefix) == 6 for p in inst.preferences)

    def test_truncation_at_n_minus_one_normalizes_to_full(self):
        inst = generate_instance(SimConfig(n=5, truncation_k=4, seed=1))
        assert all(len(p.prefix) == 5 for p in inst.preferences)

    def test_truncation_beyond_n_is_full(self):
        inst = generate_instance(SimConfig(n=6, truncation_k=50, seed=1))
        assert all(len(p.prefix) == 6 for p in inst.preferences)

    def test_deterministic_per_seed(self):
        cfg = SimConfig(n=15, rho_p=0.6, rho_op=-0.4, truncation_k=5, seed=42)
        a, b = generate_instance(cfg), generate_instance(cfg)
        assert np.array_equal(a.outcomes, b.outcomes)
        assert a.preferences == b.preferences
        c = generate_instance(SimConfig(n=15, rho_p=0.6, rho_op=-0.4,
                                        truncation_k=5, seed=43))
        assert not np.array_equal(a.outcomes, c.outcomes)


class TestCorrelationTargets:
    """Rank-level correlations sit slightly inside the latent-level dials
    (ranks compress the tails), so the windows allow that attenuation."""

    def test_cross_agent_preference_correlation(self):
        for rho_p in (0.0, 0.5, 0.8):
            vals = []
            for seed in range(30):
                inst = generate_instance(SimConfig(n=100, rho_p=rho_p, seed=seed))
                c = np.corrcoef(rank_matrix(inst))
                vals.append((c.sum() - 100) / (100 * 99))
            assert abs(float(np.mean(vals)) - rho_p) < 0.05

    def test_preference_outcome_correlation(self):
        for rho_op in (-0.5, 0.0, 0.5):
            vals = []
            for seed in range(30):
                inst = generate_instance(SimConfig(n=100, rho_op=rho_op, seed=seed))
                r = rank_matrix(inst)
                per_agent = [
                    np.corrcoef(-r[i], inst.outcomes[i])[0, 1]
                    for i in range(inst.n)
                ]
                vals.append(float(np.mean(per_agent)))
            assert abs(float(np.mean(vals)) - rho_op) < 0.07

    def test_zero_dials_decouple(self):
        inst = generate_instance(SimConfig(n=100, seed=0))
        r = rank_matrix(inst)
        c = np.corrcoef(r)
        assert abs((c.sum() - 100) / (100 * 99)) < 0.05


class TestPerturbPreferences:
    def test_zero_noise_is_identity(self):
        inst = generate_instance(SimConfig(n=40, truncation_k=8, seed=5))
        assert perturb_preferences(inst, 0.0, seed=99) == inst.preferences

    def test_depth_preserved(self):
        inst = generate_instance(SimConfig(n=30, truncation_k=7, seed=5))
        ps = perturb_preferences(inst, 2.0, seed=1)
        assert all(len(p.prefix) == 7 for p in ps)
        assert all(isinstance(p, AgentPreference) for p in ps)

    def test_deterministic(self):
        inst = generate_instance(SimConfig(n=20, truncation_k=5, seed=5))
        assert perturb_preferences(inst, 1.5, seed=3) == perturb_preferences(
            inst, 1.5, seed=3
        )

    def test_negative_scale_rejected(self):
        inst = generate_instance(SimConfig(n=5, seed=0))
        with pytest.raises(ValueError):
            perturb_preferences(inst, -0.1, seed=0)

    def test_overlap_decays_across_scenarios(self):
        inst = generate_instance(
            SimConfig(n=100, rho_p=0.5, truncation_k=10, seed=3)
        )

        def mean_top3_overlap(scale: float) -> float:
            ps = perturb_preferences(inst, scale, seed=11)
            return float(
                np.mean(
                    [
                        len(set(t.prefix[:3]) & set(p.prefix[:3])) / 3
                        for t, p in zip(inst.preferences, ps)
                    ]
                )
            )

        s1, s2, s3 = (mean_top3_overlap(s) for s in SCENARIO_NOISE_SCALES)
        assert 0.85 < s1 < 0.98
        assert 0.68 < s2 < 0.86
        assert 0.30 < s3 < 0.55
        assert s1 > s2 > s3


class TestReplacePreferences:
    def test_swaps_only_the_profile(self):
        inst = generate_instance(SimConfig(n=10, truncation_k=3, seed=8))
        pseudo = perturb_preferences(inst, 2.5, seed=4)
        swapped = replace_preferences(inst, pseudo)
        assert swapped.locations == inst.locations
        assert swapped.capacities == inst.capacities
        assert np.array_equal(swapped.outcomes, inst.outcomes)
        assert swapped.preferences == pseudo
        # the source instance is untouched
        assert inst.preferences != pseudo
