import numpy as np
import pytest
from scipy import stats

from scalemix.dist import MixingFamily
from scalemix.errors import (
    DimensionMismatch,
    InvalidParams,
    NotDiagonallyDominant,
    NotPositiveDefinite,
)
from scalemix.graph import is_decomposable
from scalemix.gsm import MarginSpec, transform
from scalemix.sim import (
    SignTable,
    TruthSpec,
    add_block,
    continuous_design_truth,
    make_banded_precision,
    make_block_precision,
    make_random_sparse_precision,
    mixed_design_truth,
    sign_detection_table,
    simulate_gsm_data,
    simulate_gsm_rows,
    simulate_mixed_data,
)


class TestBandedPrecision:
    def test_continuous_design_counts(self):
        k = continuous_design_truth()
        assert k[0, 1] == pytest.approx(0.75)
        assert k[0, 2] == pytest.approx(-0.6)
        assert int((k > 0).sum()) == 148
        assert int((k < 0).sum()) == 96
        assert int((k == 0).sum()) == 2256
        np.linalg.cholesky(k)

    def test_mixed_design_band_values(self):
        k = make_banded_precision(50, 4.0, 0.2, -0.2)
        assert k[0, 1] == pytest.approx(0.8)
        assert k[0, 2] == pytest.approx(-0.8)

    def test_identity_case(self):
        k = make_banded_precision(3, 1.0, 0.0, 0.0)
        assert np.array_equal(k, np.eye(3))

    def test_dominance_violation_rejected(self):
        with pytest.raises(NotDiagonallyDominant):
            make_banded_precision(10, 1.0, 0.3, 0.3)


class TestAddBlock:
    def test_mixed_design_negative_count(self):
        base = make_banded_precision(50, 4.0, 0.2, -0.2)
        assert int((base < 0).sum()) == 96
        k = add_block(base, (0, 5), (39, 45), -0.7)
        # brute count: 5x6 block appears twice by symmetry
        assert int((k < 0).sum()) == 96 + 2 * 5 * 6
        assert int((k < 0).sum()) == 156
        full = mixed_design_truth()
        assert np.array_equal(full, k)
        assert int((full == 0).sum()) == 2196
        assert int((full > 0).sum()) == 148

    def test_zero_value_noop_on_classes(self):
        base = make_banded_precision(10, 3.0, 0.25, -0.2)
        k = add_block(base, (0, 2), (7, 9), 0.0)
        assert int((k != 0).sum()) == int((base != 0).sum())

    def test_diagonal_overlap_rejected(self):
        base = make_banded_precision(10, 3.0, 0.25, -0.2)
        with pytest.raises(InvalidParams):
            add_block(base, (0, 5), (4, 8), -0.5)

    def test_pd_break_rejected(self):
        base = make_banded_precision(10, 3.0, 0.25, -0.2)
        with pytest.raises(NotPositiveDefinite):
            add_block(base, (0, 4), (6, 10), -2.9)


class TestTruthSpec:
    def test_banded_spec_builds_design(self):
        spec = TruthSpec("banded", (50,), {"v": 3.0, "frac1": 0.25, "frac2": -0.2})
        assert np.array_equal(spec.build(), continuous_design_truth())

    def test_block_spec(self):
        k = make_block_precision(8, 4, 0.5)
        offdiag = k[np.triu_indices(8, 1)]
        assert int((offdiag > 0).sum()) == 3
        assert int((offdiag < 0).sum()) == 3
        np.linalg.cholesky(k)

    def test_random_sparse_support_decomposable(self):
        k = make_random_sparse_precision(12, 0.05, 0.05, seed=3)
        support = (k != 0) & ~np.eye(12, dtype=bool)
        assert is_decomposable(support.astype(np.uint8))
        np.linalg.cholesky(k)

    def test_extra_blocks_through_spec(self):
        spec = TruthSpec(
            "banded", (9, 41), {"v": 4.0, "frac1": 0.2, "frac2": -0.2},
            extra_blocks=(((0, 5), (39, 45), -0.7),),
        )
        assert np.array_equal(spec.build(), mixed_design_truth())


class TestSimulateGsm:
    def test_degenerate_margins_gaussian_covariance(self):
        # law-of-large-numbers check at n = 1e5, q = 3
        k = make_banded_precision(3, 2.0, 0.2, 0.0)
        margins = [MarginSpec(MixingFamily.degenerate())] * 3
        y = simulate_gsm_data(100_000, k, margins, seed=0)
        sigma = np.linalg.inv(k)
        emp = y.T @ y / y.shape[0]
        assert np.all(np.abs(emp - sigma) <= 0.05 * np.abs(sigma).max())

    def test_round_trip_recovers_latents(self):
        k = make_banded_precision(4, 3.0, 0.25, -0.2)
        margins = [MarginSpec(MixingFamily.exponential(0.2), skew_alpha=0.5, skew_beta=1.0)
                   for _ in range(4)]
        y, scales, z = simulate_gsm_data(50, k, margins, seed=1, return_latents=True)
        x = transform(y, scales, margins)
        assert np.allclose(x, z, atol=1e-12)

    def test_exponential_margin_excess_kurtosis_positive(self):
        # per-row scales give the marginal law (Laplace-type, kurtosis 3)
        k = np.eye(2)
        margins = [MarginSpec(MixingFamily.exponential(0.5))] * 2
        y = simulate_gsm_rows(200_000, k, margins, seed=2)
        kurt = stats.kurtosis(y[:, 0], fisher=True)
        assert 2.0 < kurt < 4.0

    def test_seed_determinism(self):
        k = make_banded_precision(3, 3.0, 0.25, -0.2)
        margins = [MarginSpec(MixingFamily.inverse_gamma(3.0, 10.0))] * 3
        y1 = simulate_gsm_data(20, k, margins, seed=9)
        y2 = simulate_gsm_data(20, k, margins, seed=9)
        assert np.array_equal(y1, y2)


class TestSimulateMixed:
    def test_d_zero_pure_gaussian(self):
        k = make_banded_precision(5, 4.0, 0.2, -0.2)
        data = simulate_mixed_data(200, k, 0, seed=0)
        assert data.d == 0 and data.q == 5
        assert not np.allclose(data.values, np.round(data.values))

    def test_design_discrete_support_small_integers(self):
        data = simulate_mixed_data(100, mixed_design_truth(), 9, seed=1)
        disc = data.values[:, :9]
        assert np.allclose(disc, np.round(disc))
        assert np.abs(disc).max() <= 4
        assert len(np.unique(disc)) <= 9

    def test_rounding_idempotent(self):
        data = simulate_mixed_data(50, mixed_design_truth(), 9, seed=2)
        disc = data.values[:, :9]
        assert np.array_equal(np.round(disc), disc)

    def test_seed_determinism(self):
        a = simulate_mixed_data(30, mixed_design_truth(), 9, seed=5)
        b = simulate_mixed_data(30, mixed_design_truth(), 9, seed=5)
        assert np.array_equal(a.values, b.values)


class TestSignTable:
    def test_perfect_recovery_of_continuous_design(self):
        k = continuous_design_truth()
        table = sign_detection_table(np.sign(k), k)
        assert table.counts == (2256, 2256, 148, 148, 96, 96)
        assert table.ratios == (1.0, 1.0, 1.0)

    def test_all_zero_estimate(self):
        k = continuous_design_truth()
        table = sign_detection_table(np.zeros_like(k), k)
        assert table.est_zero == 2500
        assert table.ratios[0] == pytest.approx(2500 / 2256)
        assert table.ratios[1] == 0.0 and table.ratios[2] == 0.0

    def test_paper_reference_ratios(self):
        # the reported row (2276, 142, 82) maps to (1.009, 0.9595, 0.8542)
        t = SignTable(2276, 2256, 142, 148, 82, 96)
        assert t.ratios[0] == pytest.approx(1.009, abs=5e-4)
        assert t.ratios[1] == pytest.approx(0.9595, abs=5e-4)
        assert t.ratios[2] == pytest.approx(0.8542, abs=5e-4)

    def test_counts_partition_total(self):
        rng = np.random.default_rng(0)
        est = rng.integers(-1, 2, size=(7, 7))
        tru = rng.standard_normal((7, 7)) * (rng.random((7, 7)) < 0.5)
        t = sign_detection_table(est, tru)
        assert t.est_zero + t.est_pos + t.est_neg == 49
        assert t.true_zero + t.true_pos + t.true_neg == 49

    def test_mixed_design_denominators(self):
        k = mixed_design_truth()
        t = sign_detection_table(np.sign(k), k)
        assert (t.true_zero, t.true_pos, t.true_neg) == (2196, 148, 156)

    def test_diagonal_exclusion_flag(self):
        k = continuous_design_truth()
        t = sign_detection_table(np.sign(k), k, include_diagonal=False)
        assert t.true_pos == 148 - 50

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            sign_detection_table(np.zeros((3, 3)), np.zeros((4, 4)))
