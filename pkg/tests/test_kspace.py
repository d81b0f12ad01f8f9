import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from predrecon.kspace import (
    CartesianMask,
    CoilMaps,
    KSpaceData,
    adjoint,
    apply_forward,
    data_consistency,
    fft2c,
    full_mask,
    ifft2c,
    simulate_and_combine,
    simulate_coil_kspace,
)


def brute_force_dft2c(x):
    """Independent oracle: explicit shift index maps around an O(N^2) DFT sum."""
    h, w = x.shape
    pre = x[(np.arange(h) + h // 2) % h][:, (np.arange(w) + w // 2) % w]
    out = np.zeros((h, w), dtype=np.complex128)
    for q in range(h):
        for r in range(w):
            acc = 0.0 + 0.0j
            for m in range(h):
                for n in range(w):
                    acc += pre[m, n] * np.exp(-2j * np.pi * (q * m / h + r * n / w))
            out[q, r] = acc / np.sqrt(h * w)
    return out[(np.arange(h) - h // 2) % h][:, (np.arange(w) - w // 2) % w]


def random_image(rng, h=8, w=8):
    return rng.normal(size=(h, w)) + 1j * rng.normal(size=(h, w))


def mask_with_lines(line_count, lines, acceleration):
    sel = np.zeros(line_count, dtype=bool)
    sel[list(lines)] = True
    return CartesianMask(line_count, sel, acceleration)


class TestFFT:
    def test_constant_image_is_dc_only(self):
        h, w = 6, 8
        c = 2.5 - 1.0j
        ksp = fft2c(np.full((h, w), c))
        expected = np.zeros((h, w), dtype=np.complex128)
        expected[h // 2, w // 2] = c * np.sqrt(h * w)
        np.testing.assert_allclose(ksp, expected, atol=1e-12)

    def test_zero_image(self):
        np.testing.assert_array_equal(fft2c(np.zeros((4, 4))), np.zeros((4, 4)))

    def test_matches_brute_force_dft(self):
        rng = np.random.default_rng(42)
        x = random_image(rng, 4, 4)
        np.testing.assert_allclose(fft2c(x), brute_force_dft2c(x), atol=1e-10)

    def test_matches_brute_force_dft_rectangular(self):
        rng = np.random.default_rng(3)
        x = random_image(rng, 4, 6)
        np.testing.assert_allclose(fft2c(x), brute_force_dft2c(x), atol=1e-10)

    def test_round_trip(self):
        rng = np.random.default_rng(7)
        x = random_image(rng, 16, 12)
        np.testing.assert_allclose(ifft2c(fft2c(x)), x, rtol=1e-10, atol=1e-12)

    def test_norm_preserved(self):
        rng = np.random.default_rng(11)
        x = random_image(rng, 16, 16)
        assert np.linalg.norm(fft2c(x)) == pytest.approx(np.linalg.norm(x), rel=1e-10)

    def test_odd_or_tiny_shapes_rejected(self):
        with pytest.raises(ValueError):
            fft2c(np.zeros((5, 8)))
        with pytest.raises(ValueError):
            fft2c(np.zeros((2, 2)))


class TestForwardAdjoint:
    def test_full_mask_is_plain_fft(self):
        rng = np.random.default_rng(0)
        x = random_image(rng)
        y = apply_forward(x, full_mask(8))
        np.testing.assert_allclose(y.data, fft2c(x), atol=1e-12)

    def test_selected_lines_match_explicit_zeroing(self):
        rng = np.random.default_rng(1)
        x = random_image(rng, 8, 8)
        mask = mask_with_lines(8, [0, 4], 4)
        y = apply_forward(x, mask)
        ref = brute_force_dft2c(x)
        ref[[1, 2, 3, 5, 6, 7], :] = 0.0
        np.testing.assert_allclose(y.data, ref, atol=1e-10)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(ValueError):
            apply_forward(np.zeros((8, 8)), full_mask(16))

    def test_full_mask_round_trip(self):
        rng = np.random.default_rng(2)
        x = random_image(rng)
        np.testing.assert_allclose(
            adjoint(apply_forward(x, full_mask(8))), x, rtol=1e-10, atol=1e-12
        )

    def test_zero_measurements(self):
        mask = mask_with_lines(8, [0, 4], 4)
        y = KSpaceData(np.zeros((8, 8), dtype=complex), mask)
        np.testing.assert_array_equal(adjoint(y), np.zeros((8, 8)))

    @given(seed=st.integers(0, 10_000), n_lines=st.sampled_from([1, 2, 4, 8]))
    @settings(max_examples=30, deadline=None)
    def test_adjoint_identity(self, seed, n_lines):
        rng = np.random.default_rng(seed)
        lines = rng.choice(8, size=n_lines, replace=False)
        mask = mask_with_lines(8, lines, 8 // n_lines)
        x = random_image(rng)
        z = random_image(rng)
        zk = z.copy()
        zk[~mask.selected, :] = 0.0
        y = KSpaceData(zk, mask)
        lhs = np.vdot(y.data, apply_forward(x, mask).data)
        rhs = np.vdot(adjoint(y), x)
        assert abs(lhs - rhs) < 1e-10 * max(1.0, abs(lhs))

    def test_normal_operator_is_projection(self):
        # A^T A self-adjoint and idempotent
        rng = np.random.default_rng(5)
        mask = mask_with_lines(8, [1, 4, 6, 7], 2)
        x, z = random_image(rng), random_image(rng)

        def ata(v):
            return adjoint(apply_forward(v, mask))

        assert abs(np.vdot(z, ata(x)) - np.vdot(ata(z), x)) < 1e-10
        np.testing.assert_allclose(ata(ata(x)), ata(x), atol=1e-10)


class TestDataConsistency:
    def test_consistent_point_is_fixed(self):
        rng = np.random.default_rng(8)
        x = random_image(rng)
        mask = mask_with_lines(8, [2, 3, 6, 7], 2)
        y = apply_forward(x, mask)
        np.testing.assert_allclose(data_consistency(x, y), x, rtol=1e-10, atol=1e-12)

    def test_zero_estimate_gives_zero_filled(self):
        rng = np.random.default_rng(9)
        mask = mask_with_lines(8, [0, 3], 4)
        y = apply_forward(random_image(rng), mask)
        np.testing.assert_allclose(
            data_consistency(np.zeros((8, 8)), y), adjoint(y), atol=1e-12
        )

    def test_measured_lines_overwritten_and_idempotent(self):
        rng = np.random.default_rng(10)
        mask = mask_with_lines(8, [1, 4, 5, 6], 2)
        y = apply_forward(random_image(rng), mask)
        x_hat = random_image(rng)
        out = data_consistency(x_hat, y)
        out_k = fft2c(out)
        np.testing.assert_allclose(
            out_k[mask.selected], y.data[mask.selected], atol=1e-10
        )
        np.testing.assert_allclose(
            out_k[~mask.selected], fft2c(x_hat)[~mask.selected], atol=1e-10
        )
        np.testing.assert_allclose(data_consistency(out, y), out, atol=1e-10)

    def test_shape_mismatch_rejected(self):
        mask = mask_with_lines(8, [0], 8)
        y = apply_forward(np.zeros((8, 8)), mask)
        with pytest.raises(ValueError):
            data_consistency(np.zeros((8, 10)), y)


class TestMaskInvariants:
    def test_exact_budget_enforced(self):
        with pytest.raises(ValueError):
            mask_with_lines(8, [0, 1, 2], 4)  # 3 lines, budget is 2

    @given(line_count=st.sampled_from([8, 16, 64]), r=st.integers(1, 12))
    @settings(max_examples=40, deadline=None)
    def test_budget_is_floor(self, line_count, r):
        budget = line_count // r
        if budget == 0:
            return
        sel = np.zeros(line_count, dtype=bool)
        sel[:budget] = True
        mask = CartesianMask(line_count, sel, r)
        assert mask.n_selected == budget


class TestCoilCombination:
    def test_single_unit_coil_equals_adjoint(self):
        rng = np.random.default_rng(12)
        x = random_image(rng)
        maps = CoilMaps(1, np.ones((1, 8, 8), dtype=complex))
        mask = mask_with_lines(8, [0, 2, 4, 6], 2)
        ys = simulate_coil_kspace(x, maps, mask)
        np.testing.assert_allclose(simulate_and_combine(ys, maps), adjoint(ys[0]), atol=1e-12)

    def test_full_mask_recovers_image(self):
        from predrecon.phantom import simulate_coil_maps

        rng = np.random.default_rng(13)
        x = random_image(rng, 16, 16)
        maps = simulate_coil_maps(4, 16)
        ys = simulate_coil_kspace(x, maps, full_mask(16))
        np.testing.assert_allclose(simulate_and_combine(ys, maps), x, atol=1e-6)

    def test_complementary_half_coils(self):
        rng = np.random.default_rng(14)
        x = random_image(rng)
        m = np.zeros((2, 8, 8), dtype=complex)
        m[0, :, :4] = 1.0
        m[1, :, 4:] = 1.0
        maps = CoilMaps(2, m)
        ys = simulate_coil_kspace(x, maps, full_mask(8))
        combined = simulate_and_combine(ys, maps)
        np.testing.assert_allclose(combined[:, :4], x[:, :4], atol=1e-10)
        np.testing.assert_allclose(combined[:, 4:], x[:, 4:], atol=1e-10)

    def test_coil_count_mismatch(self):
        maps = CoilMaps(2, np.ones((2, 8, 8), dtype=complex))
        y = apply_forward(np.zeros((8, 8)), full_mask(8))
        with pytest.raises(ValueError):
            simulate_and_combine([y], maps)
