import math

import numpy as np
import pytest
import scipy.linalg

from scsa.spectral import Grid, decompose_image, fourier_d2, line_spectrum, operator_matrix


def fft_d2(q):
    """Second-derivative matrix built by spectral differentiation of unit vectors."""
    k = np.fft.fftfreq(q, d=1.0 / q)
    symbol = -(k**2)
    if q % 2 == 0:
        symbol[q // 2] = -(q / 2) ** 2
    return np.real(np.fft.ifft(symbol[:, None] * np.fft.fft(np.eye(q), axis=0), axis=0))


class TestGrid:
    def test_delta(self):
        g = Grid(10)
        assert abs(g.delta * g.q - 2 * math.pi) < 1e-12

    def test_too_small(self):
        with pytest.raises(ValueError):
            Grid(1)


class TestFourierD2:
    def test_kills_constants(self):
        np.testing.assert_allclose(fourier_d2(8) @ np.ones(8), 0.0, atol=1e-12)

    def test_q4_eigenvalues(self):
        vals = scipy.linalg.eigvalsh(fourier_d2(4))
        np.testing.assert_allclose(np.sort(vals), [-4, -1, -1, 0], atol=1e-12)

    def test_cosine(self):
        x = Grid(16).points
        np.testing.assert_allclose(fourier_d2(16) @ np.cos(x), -np.cos(x), atol=1e-9)

    @pytest.mark.parametrize("q", list(range(2, 18)) + [31, 64])
    def test_matches_fft_construction(self, q):
        np.testing.assert_allclose(fourier_d2(q), fft_d2(q), atol=1e-9)

    @pytest.mark.parametrize("q", [5, 12, 33])
    def test_structure(self, q):
        d = fourier_d2(q)
        assert np.max(np.abs(d - d.T)) <= 1e-12
        assert np.max(np.abs(d.sum(axis=1))) <= 1e-9
        assert np.max(np.linalg.eigvalsh(d)) <= 1e-9

    @pytest.mark.parametrize("q", [7, 10])
    def test_integer_spectrum(self, q):
        vals = np.sort(np.linalg.eigvalsh(fourier_d2(q)))
        ks = np.fft.fftfreq(q, d=1.0 / q)
        if q % 2 == 0:
            ks[q // 2] = q // 2
        np.testing.assert_allclose(vals, np.sort(-(ks**2)), atol=1e-9)

    def test_rejects_small(self):
        with pytest.raises(ValueError):
            fourier_d2(1)


class TestLineSpectrum:
    def test_zero_potential_has_no_bound_states(self):
        assert line_spectrum(np.zeros(16), 1.0).m == 0

    def test_constant_potential(self):
        s = line_spectrum(np.full(16, 100.0), 1.0)
        assert s.eigenvalues[0] == pytest.approx(-50.0, abs=1e-9)
        np.testing.assert_allclose(s.eigenfunctions[:, 0], 1 / math.sqrt(2 * math.pi), atol=1e-9)

    def test_ascending_negative(self):
        rng = np.random.default_rng(1)
        s = line_spectrum(rng.uniform(0, 255, 40), 0.7)
        assert np.all(s.eigenvalues < 0)
        assert np.all(np.diff(s.eigenvalues) >= 0)
        assert s.m <= 40

    @pytest.mark.parametrize("seed", range(5))
    def test_residual_norm_orthogonality(self, seed):
        rng = np.random.default_rng(seed)
        p = rng.uniform(0, 255, 48)
        h = 1.0
        s = line_spectrum(p, h)
        m = -(h**2) * fft_d2(48) - np.diag(p / 2)
        for lam, psi in zip(s.eigenvalues, s.eigenfunctions.T):
            assert np.linalg.norm(m @ psi - lam * psi) <= 1e-8 * np.linalg.norm(psi)
        gram = s.delta * s.eigenfunctions.T @ s.eigenfunctions
        np.testing.assert_allclose(gram, np.eye(s.m), atol=1e-8)

    def test_operator_symmetric(self):
        p = np.random.default_rng(3).uniform(0, 255, 21)
        m = operator_matrix(p, 0.8)
        assert np.max(np.abs(m - m.T)) <= 1e-12

    def test_count_monotone_in_h(self):
        x = Grid(64).points
        for p in (128 + 100 * np.sin(x), np.where(x < 2, 200.0, 10.0), np.full(64, 30.0)):
            counts = [line_spectrum(p, h).m for h in (0.25, 0.5, 1, 2, 4)]
            assert counts == sorted(counts, reverse=True)

    def test_sign_canonical(self):
        s = line_spectrum(np.random.default_rng(4).uniform(0, 255, 32), 1.0)
        for psi in s.eigenfunctions.T:
            first = psi[np.abs(psi) > 1e-8 * np.abs(psi).max()][0]
            assert first > 0

    @pytest.mark.parametrize("bad", [np.array([1.0, np.nan, 2.0]), np.array([1.0, -1.0, 2.0])])
    def test_invalid_potential(self, bad):
        with pytest.raises(ValueError):
            line_spectrum(bad, 1.0)

    def test_invalid_h(self):
        with pytest.raises(ValueError):
            line_spectrum(np.ones(4), 0.0)


class TestDecompose:
    def test_zero_image(self):
        spectra = decompose_image(np.zeros((8, 8)), 1.0)
        assert all(s.m == 0 for s in spectra.rows + spectra.cols)

    def test_constant_image(self):
        spectra = decompose_image(np.full((8, 8), 100.0), 1.0)
        for s in spectra.rows + spectra.cols:
            assert s.eigenvalues[0] == pytest.approx(-50.0, abs=1e-9)

    def test_transpose_swaps_roles(self):
        img = np.random.default_rng(2).uniform(0, 255, (10, 10))
        a = decompose_image(img, 1.0)
        b = decompose_image(img.T, 1.0)
        for sa, sb in zip(a.cols, b.rows):
            np.testing.assert_array_equal(sa.eigenvalues, sb.eigenvalues)
            np.testing.assert_array_equal(sa.eigenfunctions, sb.eigenfunctions)

    def test_non_square_rejected(self):
        with pytest.raises(ValueError):
            decompose_image(np.ones((4, 5)), 1.0)

    def test_rectangular_allowed_on_request(self):
        spectra = decompose_image(np.full((4, 6), 50.0), 1.0, require_square=False)
        assert spectra.shape == (4, 6)
        assert spectra.rows[0].q == 6 and spectra.cols[0].q == 4

    def test_parallel_matches_serial(self):
        img = np.random.default_rng(5).uniform(0, 255, (24, 24))
        a = decompose_image(img, 0.9)
        b = decompose_image(img, 0.9, workers=4)
        for sa, sb in zip(a.rows + a.cols, b.rows + b.cols):
            np.testing.assert_array_equal(sa.eigenvalues, sb.eigenvalues)
            np.testing.assert_array_equal(sa.eigenfunctions, sb.eigenfunctions)
