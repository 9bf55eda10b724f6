import math

import numpy as np
import pytest

from brickforge.bricks import Brick, BrickAssembly
from brickforge.errors import NonFiniteInputError
from brickforge.geometry import (
    PointCloud,
    chamfer_bruteforce,
    extract_surface,
    iou,
    normalize_cloud,
    sample_surface,
    voxelize_assembly,
    voxelize_points,
)
from brickforge.reward import (
    DpoParams,
    build_preference_pairs,
    compose_reward,
    dpo_loss,
    post_loss,
    sft_loss,
    total_reward,
)
from brickforge.stability import stability_scores
from brickforge.tokens import TokenSequence


def column_assembly():
    """A 20-tall centered unit column: its cell centers voxelize back to
    exactly its own occupancy."""
    return BrickAssembly(tuple(Brick(1, 1, 10, 10, z) for z in range(20)))


def cell_center_cloud(assembly):
    cells = np.argwhere(assembly.occupancy).astype(float) + 0.5
    return PointCloud(cells)


class TestComposeReward:
    def test_cd_edge_values(self):
        assert compose_reward(0.0, 0.0, 0.0).r_cd == 1.0
        assert compose_reward(0.0, 0.2, 0.0).r_cd == 0.0
        assert compose_reward(0.0, 5.0, 0.0).r_cd == 0.0

    def test_bounds_fuzz(self, rng):
        for _ in range(2000):
            r_iou = float(rng.random())
            d_cd = float(rng.random() * 3)
            r_st = float(rng.random())
            b = compose_reward(r_iou, d_cd, r_st)
            assert 0.0 <= b.r_cd <= 1.0
            assert b.r_geo == b.r_iou + b.r_cd
            assert 0.0 <= b.r_geo <= 2.0
            assert b.r_total == b.r_geo + b.r_stable
            assert 0.0 <= b.r_total <= 3.0


class TestTotalReward:
    def test_identical_grids_grounded(self):
        a = column_assembly()
        breakdown = total_reward(cell_center_cloud(a), a, samples=2048, seed=1)
        assert breakdown.r_iou == 1.0
        assert breakdown.r_stable == 1.0
        assert breakdown.r_total == 2.0 + breakdown.r_cd

    def test_unstable_candidate_drops_stability_term(self):
        cantilever = BrickAssembly((Brick(1, 1, 10, 10, 0), Brick(8, 1, 10, 10, 1)))
        breakdown = total_reward(cell_center_cloud(cantilever), cantilever,
                                 samples=1024, seed=1)
        assert breakdown.r_stable == 0.0
        assert breakdown.r_total == breakdown.r_geo

    def test_matches_step_by_step_oracle(self, rng):
        candidate = BrickAssembly((Brick(2, 2, 9, 9, 0), Brick(2, 2, 10, 10, 1),
                                   Brick(1, 2, 10, 10, 2)))
        target = PointCloud(rng.normal(size=(200, 3)))
        got = total_reward(target, candidate, samples=512, seed=7)

        target_grid = voxelize_points(target, solid_fill=True)
        cand_grid = voxelize_assembly(candidate)
        r_iou = iou(target_grid, cand_grid)
        sampled = sample_surface(extract_surface(cand_grid), 512, 7)
        d_cd = chamfer_bruteforce(normalize_cloud(target), normalize_cloud(sampled))
        r_st = min(stability_scores(candidate).scores)
        assert got.r_iou == r_iou
        assert got.d_cd == pytest.approx(d_cd, abs=1e-9)
        assert got.r_cd == pytest.approx(max(1 - 5 * d_cd, 0.0), abs=1e-9)
        assert got.r_stable == r_st
        assert got.r_total == pytest.approx(r_iou + got.r_cd + r_st, abs=1e-12)


def seq(n):
    return TokenSequence.from_text(f"BOS X{n} Y0 Z0 H1 W1 EOS")


def fake(r_total):
    # breakdown carrying only the total, for filter tests
    return compose_reward(min(r_total, 1.0), 1.0, max(r_total - 1.0, 0.0)) \
        if r_total <= 2.0 else compose_reward(1.0, 0.0, r_total - 2.0)


class TestSerialization:
    def test_breakdown_roundtrip(self):
        from brickforge.reward import RewardBreakdown
        b = compose_reward(0.7, 0.05, 0.9)
        back = RewardBreakdown.from_dict(b.to_dict())
        assert back == b


class TestPreferencePairs:
    def test_pair_above_thresholds(self):
        pairs = build_preference_pairs([(seq(0), fake(2.5)), (seq(1), fake(2.2))])
        assert len(pairs) == 1
        assert pairs[0].winner == seq(0)
        assert pairs[0].reward_gap == pytest.approx(0.3)

    def test_floor_filters(self):
        assert build_preference_pairs([(seq(0), fake(0.9)), (seq(1), fake(0.5))]) == []

    def test_gap_filters(self):
        assert build_preference_pairs([(seq(0), fake(2.0)), (seq(1), fake(1.9))]) == []

    def test_all_ordered_pairs(self):
        totals = [2.8, 2.5, 2.1, 0.4]
        pairs = build_preference_pairs([(seq(i), fake(t)) for i, t in enumerate(totals)])
        got = {(p.reward_winner, p.reward_loser) for p in pairs}
        expect = {(w, l) for w in totals for l in totals
                  if w - l >= 0.2 and w >= 1.0}
        assert {(round(a, 6), round(b, 6)) for a, b in got} == \
               {(round(a, 6), round(b, 6)) for a, b in expect}

    def test_antisymmetric(self, rng):
        totals = [float(rng.random() * 3) for _ in range(6)]
        pairs = build_preference_pairs([(seq(i), fake(t)) for i, t in enumerate(totals)])
        seen = {(p.winner.to_text(), p.loser.to_text()) for p in pairs}
        assert not any((l, w) in seen for w, l in seen)


class TestDpoLoss:
    def test_policy_equals_reference(self):
        assert dpo_loss(-3.0, -5.0, -3.0, -5.0, reward_gap=1.7) == \
            pytest.approx(1.7 * math.log(2), abs=1e-12)

    def test_zero_gap(self):
        assert dpo_loss(-1.0, -2.0, -3.0, -4.0, reward_gap=0.0) == 0.0

    def test_gap_linearity(self, rng):
        for _ in range(50):
            lps = rng.normal(size=4) * 5
            gap = float(rng.random() * 2)
            one = dpo_loss(*lps, reward_gap=gap)
            two = dpo_loss(*lps, reward_gap=2 * gap)
            assert two == pytest.approx(2 * one, abs=1e-12)

    def test_monotonicity(self, rng):
        h = 1e-3
        for _ in range(100):
            lw, ll, rw, rl = rng.normal(size=4) * 3
            base = dpo_loss(lw, ll, rw, rl, reward_gap=1.0)
            assert dpo_loss(lw + h, ll, rw, rl, reward_gap=1.0) < base
            assert dpo_loss(lw, ll + h, rw, rl, reward_gap=1.0) > base

    def test_extreme_arguments_stable(self):
        assert dpo_loss(700.0, 0.0, 0.0, 0.0, reward_gap=1.0) == pytest.approx(0.0, abs=1e-12)
        loss = dpo_loss(-700.0, 0.0, 0.0, 0.0, reward_gap=1.0)
        assert math.isfinite(loss) and loss == pytest.approx(700.0, rel=1e-9)

    def test_non_finite(self):
        with pytest.raises(NonFiniteInputError):
            dpo_loss(float("nan"), 0.0, 0.0, 0.0, reward_gap=1.0)
        with pytest.raises(NonFiniteInputError):
            dpo_loss(float("inf"), 0.0, 0.0, 0.0, reward_gap=1.0)

    def test_negative_gap_rejected(self):
        with pytest.raises(ValueError):
            dpo_loss(0.0, 0.0, 0.0, 0.0, reward_gap=-0.1)


class TestSftLoss:
    def test_certain_prediction(self):
        assert sft_loss([0.0, 0.0, 0.0]) == 0.0

    def test_uniform_over_codebook(self):
        t = 11
        logp = math.log(1 / 65)
        assert sft_loss([logp] * t) == pytest.approx(t * math.log(65), abs=1e-9)

    def test_matches_direct_sum(self, rng):
        values = list(-rng.random(40) * 4)
        assert sft_loss(values) == pytest.approx(-sum(values), abs=1e-12)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            sft_loss([])


class TestPostLoss:
    def test_weight_zero(self):
        assert post_loss(2.5, 99.0, sft_weight=0.0) == 2.5

    def test_unit_weight(self):
        assert post_loss(2.0, 3.0, sft_weight=1.0) == 5.0

    def test_half_weight(self):
        assert post_loss(1.0, 4.0, sft_weight=0.5) == 3.0


class TestDpoParams:
    def test_defaults(self):
        p = DpoParams()
        assert p.beta == 1.0 and p.sft_weight == 1.0

    def test_validation(self):
        with pytest.raises(ValueError):
            DpoParams(beta=0.0)
        with pytest.raises(ValueError):
            DpoParams(sft_weight=-0.5)
