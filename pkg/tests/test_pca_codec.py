import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from flowquant import pca_codec, scalar_quantizer as sq
from oracles import power_deflation_eig


def random_symmetric(rng, d):
    b = rng.normal(size=(d, d))
    return 0.5 * (b + b.T)


def spectrum_gaps(vals):
    gaps = np.full(vals.size, np.inf)
    diffs = np.abs(np.diff(vals))
    gaps[:-1] = np.minimum(gaps[:-1], diffs)
    gaps[1:] = np.minimum(gaps[1:], diffs)
    return gaps


class TestEigSym:
    def test_diagonal(self):
        vals, vecs = pca_codec.eig_sym(np.diag([1.0, 2.0]))
        np.testing.assert_allclose(vals, [2.0, 1.0])
        np.testing.assert_allclose(np.abs(vecs), [[0.0, 1.0], [1.0, 0.0]], atol=1e-15)

    def test_two_by_two(self):
        vals, vecs = pca_codec.eig_sym(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(vals, [3.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(vecs[0], np.array([1.0, 1.0]) / np.sqrt(2), atol=1e-14)

    def test_sign_convention(self, rng):
        _, vecs = pca_codec.eig_sym(random_symmetric(rng, 9))
        largest = vecs[np.arange(9), np.abs(vecs).argmax(axis=1)]
        assert (largest > 0).all()

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            pca_codec.eig_sym(np.array([[1.0, np.inf], [np.inf, 1.0]]))

    def test_zero_matrix(self):
        vals, vecs = pca_codec.eig_sym(np.zeros((3, 3)))
        np.testing.assert_array_equal(vals, 0.0)
        np.testing.assert_allclose(vecs @ vecs.T, np.eye(3))

    @pytest.mark.parametrize("d", [1, 2, 5, 8, 17])
    def test_residual_and_reconstruction(self, rng, d):
        a = random_symmetric(rng, d)
        vals, vecs = pca_codec.eig_sym(a)
        norm = np.linalg.norm(a)
        assert np.linalg.norm(a @ vecs.T - vecs.T * vals) <= 1e-7 * norm
        assert np.linalg.norm(vecs.T @ np.diag(vals) @ vecs - a) <= 1e-7 * norm
        np.testing.assert_allclose(vecs @ vecs.T, np.eye(d), atol=1e-12)
        assert (np.diff(vals) <= 0).all()

    def test_matches_power_iteration_oracle_8x8(self, rng):
        a = random_symmetric(rng, 8)
        vals, vecs = pca_codec.eig_sym(a)
        ref_vals, ref_vecs = power_deflation_eig(a)
        np.testing.assert_allclose(vals, ref_vals, atol=1e-6)
        ok = spectrum_gaps(ref_vals) > 1e-3
        dots = np.abs(np.einsum("ij,ij->i", vecs, ref_vecs))
        np.testing.assert_allclose(dots[ok], 1.0, atol=1e-6)


class TestFit:
    def test_full_variance_is_lossless(self, rng):
        x = rng.normal(size=(40, 6)) @ rng.normal(size=(6, 6))
        model = pca_codec.fit(x, 1.0)
        assert model.m == 6
        back = pca_codec.decode(pca_codec.encode(x, model), model)
        np.testing.assert_allclose(back, x, atol=1e-8)

    @pytest.mark.parametrize("target", [0.1, 0.5, 0.99, 1.0])
    def test_points_on_a_line(self, rng, target):
        t = rng.normal(size=30)
        x = np.column_stack([t, 2 * t])
        model = pca_codec.fit(x, target)
        assert model.m == 1
        back = pca_codec.decode(pca_codec.encode(x, model), model)
        np.testing.assert_allclose(back, x, atol=1e-10)

    def test_isotropic_gaussian_half_variance(self):
        x = np.random.default_rng(7).normal(size=(3000, 3))
        centered = x - x.mean(axis=0)
        ref_vals, _ = power_deflation_eig(centered.T @ centered / x.shape[0])
        ratios = np.cumsum(ref_vals) / ref_vals.sum()
        # each direction holds about a third; two are needed to pass one half
        assert ratios[0] < 0.5 <= ratios[1]
        model = pca_codec.fit(x, 0.5)
        assert model.m == 2
        np.testing.assert_allclose(model.eigenvalues, ref_vals[:2], rtol=1e-9)

    def test_selection_rule(self, rng):
        x = rng.normal(size=(200, 8)) * np.array([8, 5, 3, 2, 1, 0.5, 0.2, 0.1])
        spec = pca_codec.spectrum(x)
        ratios = np.cumsum(spec.eigenvalues) / spec.eigenvalues.sum()
        for target in (0.3, 0.6, 0.9, 0.99):
            model = spec.select(target)
            assert model.variance_retained >= target
            assert model.m == int(np.argmax(ratios >= target)) + 1

    def test_zero_variance_flagged(self):
        model = pca_codec.fit(np.ones((5, 3)), 0.9)
        assert model.degenerate and model.m == 1
        back = pca_codec.decode(pca_codec.encode(np.ones((5, 3)), model), model)
        np.testing.assert_array_equal(back, 1.0)

    def test_needs_two_rows(self):
        with pytest.raises(ValueError):
            pca_codec.fit(np.ones((1, 3)), 0.9)

    def test_eigenvalue_sum_is_trace(self, rng):
        x = rng.normal(size=(100, 7)) @ rng.normal(size=(7, 7))
        spec = pca_codec.spectrum(x)
        trace = x.var(axis=0).sum()
        assert spec.eigenvalues.sum() == pytest.approx(trace, rel=1e-8)


class TestEncodeDecode:
    def test_mean_rows_encode_to_zero(self, rng):
        x = rng.normal(size=(30, 4))
        model = pca_codec.fit(x, 0.8)
        coords = pca_codec.encode(np.tile(model.mean, (3, 1)), model).coords
        np.testing.assert_allclose(coords, 0.0, atol=1e-14)

    def test_isometry_with_complete_basis(self, rng):
        x = rng.normal(size=(30, 5))
        model = pca_codec.fit(x, 1.0)
        coords = pca_codec.encode(x, model).coords
        np.testing.assert_allclose(np.linalg.norm(coords, axis=1),
                                   np.linalg.norm(x - model.mean, axis=1), rtol=1e-12)

    def test_row_along_first_component(self, rng):
        x = rng.normal(size=(50, 4)) * [5, 2, 1, 0.5]
        model = pca_codec.fit(x, 1.0)
        row = model.mean + 3.0 * model.components[0]
        coords = pca_codec.encode(row[None, :], model).coords[0]
        np.testing.assert_allclose(coords, [3.0, 0, 0, 0], atol=1e-12)

    def test_dimension_mismatch(self, rng):
        model = pca_codec.fit(rng.normal(size=(10, 3)), 0.9)
        with pytest.raises(ValueError):
            pca_codec.encode(np.zeros((2, 4)), model)
        with pytest.raises(ValueError):
            pca_codec.decode(np.zeros((2, model.m + 1)), model)

    @pytest.mark.parametrize("seed", range(5))
    def test_residual_equals_tail_eigenvalues(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(120, 9)) @ rng.normal(size=(9, 9))
        centered = x - x.mean(axis=0)
        ref_vals, _ = power_deflation_eig(centered.T @ centered / x.shape[0])
        model = pca_codec.fit(x, 0.8)
        back = pca_codec.decode(pca_codec.encode(x, model), model)
        mse = ((x - back) ** 2).sum() / x.shape[0]
        assert mse == pytest.approx(ref_vals[model.m:].sum(), rel=1e-6)

    def test_projection_is_idempotent(self, rng):
        x = rng.normal(size=(60, 6)) @ rng.normal(size=(6, 6))
        model = pca_codec.fit(x, 0.7)
        once = pca_codec.decode(pca_codec.encode(x, model), model)
        twice = pca_codec.decode(pca_codec.encode(once, model), model)
        np.testing.assert_allclose(twice, once, atol=1e-8)

    def test_more_variance_never_hurts(self, rng):
        x = rng.normal(size=(80, 8)) @ rng.normal(size=(8, 8))
        spec = pca_codec.spectrum(x)
        errs = []
        for target in (0.2, 0.4, 0.6, 0.8, 0.95, 1.0):
            model = spec.select(target)
            back = pca_codec.decode(pca_codec.encode(x, model), model)
            errs.append(((x - back) ** 2).mean())
        assert all(b <= a + 1e-12 for a, b in zip(errs, errs[1:]))


class TestPcaThenQuantize:
    def test_thirty_two_bits_matches_plain_pca(self, rng):
        x = rng.normal(size=(100, 5)) @ rng.normal(size=(5, 5))
        model = pca_codec.fit(x, 0.9)
        codes, params = pca_codec.encode_then_scalar_quantize(x, model, 32)
        coords = pca_codec.encode(x, model).coords
        approx = sq.dequantize(codes, params)
        inside = (coords >= params.p_low) & (coords <= params.p_high)
        half = params.step / 2
        assert (np.abs(approx - coords) <= half + 1e-12)[inside].all()

    def test_full_basis_high_bits_near_exact(self, rng):
        x = rng.uniform(-1, 1, size=(200, 4))
        model = pca_codec.fit(x, 1.0)
        codes, params = pca_codec.encode_then_scalar_quantize(x, model, 24)
        back = pca_codec.decode(sq.dequantize(codes, params), model)
        inside = ((pca_codec.encode(x, model).coords >= params.p_low)
                  & (pca_codec.encode(x, model).coords <= params.p_high)).all(axis=1)
        assert np.abs(back - x)[inside].max() < 1e-5

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 12), st.sampled_from([0.5, 0.8, 0.95]))
    def test_error_bound(self, seed, bits, target):
        rng = np.random.default_rng(seed)
        x = rng.normal(size=(80, 6)) @ rng.normal(size=(6, 6))
        model = pca_codec.fit(x, target)
        coords = pca_codec.encode(x, model).coords
        codes, params = pca_codec.encode_then_scalar_quantize(x, model, bits)
        back = pca_codec.decode(sq.dequantize(codes, params), model)
        pca_only = pca_codec.decode(coords, model)
        # rows whose coordinates all lie inside the clamp bounds
        inside = ((coords >= params.p_low) & (coords <= params.p_high)).all(axis=1)
        bound = np.linalg.norm(x - pca_only, axis=1) + np.linalg.norm(params.step / 2)
        err = np.linalg.norm(x - back, axis=1)
        assert (err[inside] <= bound[inside] + 1e-9).all()
