"""Unit and property tests for the Hermitian PSD primitives."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wsrmax import matops
from wsrmax.matops import (
    IllPosedLogdetError,
    IndefiniteMatrixError,
    MatrixShapeError,
    ext_logdet_diff,
    hermitize,
    is_psd,
    pseudo_inverse,
    psd_eigh,
    range_projector,
    rank_psd,
    simultaneous_decompose,
)


def random_psd(rng, n, rank=None):
    rank = n if rank is None else rank
    f = rng.standard_normal((n, rank)) + 1j * rng.standard_normal((n, rank))
    return hermitize(f @ f.conj().T)


seeds = st.integers(min_value=0, max_value=2**31 - 1)
dims = st.integers(min_value=1, max_value=6)


class TestHermitize:
    def test_idempotent_and_hermitian(self):
        rng = np.random.default_rng(0)
        a = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
        h = hermitize(a)
        assert np.allclose(h, h.conj().T)
        assert np.allclose(hermitize(h), h)

    def test_rejects_nonsquare(self):
        with pytest.raises(MatrixShapeError):
            hermitize(np.zeros((2, 3)))

    @given(seeds, dims)
    @settings(max_examples=25, deadline=None)
    def test_preserves_hermitian_part(self, seed, n):
        rng = np.random.default_rng(seed)
        a = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        h = hermitize(a)
        # the skew part is exactly removed
        assert np.allclose(h + 0.5 * (a - a.conj().T), a)


class TestPsdEigh:
    def test_clips_tiny_negatives(self):
        a = np.diag([1.0, -1e-12]).astype(complex)
        w, _ = psd_eigh(a)
        assert w[0] == 0.0

    def test_rejects_indefinite(self):
        with pytest.raises(IndefiniteMatrixError):
            psd_eigh(np.diag([1.0, -0.5]).astype(complex))

    def test_is_psd(self):
        rng = np.random.default_rng(1)
        assert is_psd(random_psd(rng, 4))
        assert not is_psd(np.diag([1.0, -0.5]).astype(complex))


class TestPseudoInverse:
    @given(seeds, dims, st.data())
    @settings(max_examples=40, deadline=None)
    def test_penrose_identities(self, seed, n, data):
        rank = data.draw(st.integers(min_value=0, max_value=n))
        rng = np.random.default_rng(seed)
        a = random_psd(rng, n, rank)
        ap = pseudo_inverse(a)
        scale = max(1.0, np.abs(a).max())
        tol = 1e-8 * scale
        assert np.allclose(a @ ap @ a, a, atol=tol)
        assert np.allclose(ap @ a @ ap, ap, atol=tol)
        assert np.allclose(a @ ap, (a @ ap).conj().T, atol=tol)
        assert np.allclose(ap @ a, (ap @ a).conj().T, atol=tol)

    def test_matches_inverse_when_pd(self):
        rng = np.random.default_rng(2)
        a = random_psd(rng, 4) + np.eye(4)
        assert np.allclose(pseudo_inverse(a), np.linalg.inv(a), atol=1e-10)

    def test_rank_and_projector(self):
        rng = np.random.default_rng(3)
        a = random_psd(rng, 5, rank=2)
        assert rank_psd(a) == 2
        p = range_projector(a)
        assert np.allclose(p @ p, p, atol=1e-10)
        assert np.allclose(p @ a, a, atol=1e-8)
        assert rank_psd(p) == 2


class TestExtLogdetDiff:
    def test_matches_plain_logdet_for_pd(self):
        rng = np.random.default_rng(4)
        a = random_psd(rng, 4)
        b = random_psd(rng, 4) + np.eye(4)
        expected = (
            np.linalg.slogdet(a + b)[1] - np.linalg.slogdet(b)[1]
        )
        assert ext_logdet_diff(a, b) == pytest.approx(expected, abs=1e-10)

    def test_zero_signal(self):
        rng = np.random.default_rng(5)
        b = random_psd(rng, 3, rank=2)
        assert ext_logdet_diff(np.zeros((3, 3)), b) == 0.0

    def test_singular_noise_restricts_to_range(self):
        # block-diagonal case with an explicit hand value
        b = np.diag([2.0, 0.0]).astype(complex)
        a = np.diag([3.0, 0.0]).astype(complex)
        assert ext_logdet_diff(a, b) == pytest.approx(np.log(5.0 / 2.0), abs=1e-12)

    def test_rejects_signal_outside_noise_range(self):
        b = np.diag([1.0, 0.0]).astype(complex)
        a = np.diag([0.0, 1.0]).astype(complex)
        with pytest.raises(IllPosedLogdetError):
            ext_logdet_diff(a, b)

    @given(seeds, st.integers(min_value=2, max_value=6), st.data())
    @settings(max_examples=40, deadline=None)
    def test_regularized_limit(self, seed, n, data):
        rng = np.random.default_rng(seed)
        rank_b = data.draw(st.integers(min_value=1, max_value=n))
        b = random_psd(rng, n, rank_b)
        p = range_projector(b)
        a = hermitize(p @ random_psd(rng, n) @ p)
        val = ext_logdet_diff(a, b)
        eye = np.eye(n)

        def reg(kappa):
            return (
                np.linalg.slogdet(a + b + kappa * eye)[1]
                - np.linalg.slogdet(b + kappa * eye)[1]
            )

        # the regularized value converges linearly in kappa; three-point
        # Richardson extrapolation with kappa scaled to B's smallest positive
        # eigenvalue removes the linear and quadratic terms while keeping the
        # slogdet evaluations away from round-off
        wb = np.linalg.eigvalsh(b)
        lam_min = wb[wb > 1e-9 * max(1.0, wb[-1])].min()
        kappa = 1e-4 * lam_min
        extrapolated = (
            8.0 * reg(kappa / 4) - 6.0 * reg(kappa / 2) + reg(kappa)
        ) / 3.0
        assert val == pytest.approx(extrapolated, abs=1e-6)

    @given(seeds, st.integers(min_value=1, max_value=5))
    @settings(max_examples=30, deadline=None)
    def test_nonnegative_and_monotone(self, seed, n):
        rng = np.random.default_rng(seed)
        b = random_psd(rng, n) + 0.1 * np.eye(n)
        a = random_psd(rng, n)
        v1 = ext_logdet_diff(a, b)
        v2 = ext_logdet_diff(2.0 * a, b)
        assert v1 >= -1e-12
        assert v2 >= v1 - 1e-10


class TestSimultaneousDecompose:
    @given(seeds, st.integers(min_value=1, max_value=6), st.data())
    @settings(max_examples=40, deadline=None)
    def test_block_patterns(self, seed, n, data):
        rng = np.random.default_rng(seed)
        ra = data.draw(st.integers(min_value=0, max_value=n))
        rb = data.draw(st.integers(min_value=0, max_value=n))
        a = random_psd(rng, n, ra)
        b = random_psd(rng, n, rb)
        dec = simultaneous_decompose(a, b)
        t = dec.transform
        t_inv = np.linalg.inv(t)
        scale = max(1.0, np.abs(a).max(), np.abs(b).max())
        tol = 1e-7 * scale * dec.diagnostics["condition_number"]
        assert np.abs(t @ a @ t.conj().T - dec.block_pattern_a()).max() < tol
        assert np.abs(
            t_inv.conj().T @ b @ t_inv - dec.block_pattern_b()
        ).max() < tol
        m1, m2, m3, m4 = dec.block_sizes
        assert m1 == dec.signal_rank
        assert (m1, m2, m3, m4) == (m1, rank_psd(b) - m1, rank_psd(a) - m1, m4)
        assert m1 + m2 + m3 + m4 == n
        assert min(dec.block_sizes) >= 0

    def test_pd_pair_has_full_shared_block(self):
        rng = np.random.default_rng(6)
        a = random_psd(rng, 4) + np.eye(4)
        b = random_psd(rng, 4) + np.eye(4)
        dec = simultaneous_decompose(a, b)
        assert dec.signal_rank == 4
        assert dec.block_sizes == (4, 0, 0, 0)

    def test_diagnostics_present(self):
        rng = np.random.default_rng(7)
        dec = simultaneous_decompose(random_psd(rng, 3, 2), random_psd(rng, 3, 1))
        for key in ("condition_number", "recon_error_a", "recon_error_b"):
            assert key in dec.diagnostics
        assert dec.diagnostics["recon_error_a"] < 1e-8
        assert dec.diagnostics["recon_error_b"] < 1e-8
