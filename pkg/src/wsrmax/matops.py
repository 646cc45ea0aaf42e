"""Complex Hermitian matrix algebra for positive semidefinite operands.

Everything downstream (rates, dual variables, saddle steps) is built from a
small set of primitives on Hermitian PSD matrices: symmetrization, the
eigendecomposition-based Moore-Penrose pseudo-inverse, a difference-of-logdet
function that stays well defined when the "noise" operand is singular, and a
contragredient block decomposition used for diagnostics.

All logarithms are natural (values in nats). Matrices are plain complex
ndarrays; Hermitian-ness is a contract checked with `assert_hermitian` /
enforced with `hermitize` rather than a wrapper type.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

DEFAULT_RANK_TOL = 1e-9


class MatrixShapeError(ValueError):
    """Input is not square or dimensions do not match."""


class IndefiniteMatrixError(ValueError):
    """A matrix required to be PSD has a negative eigenvalue beyond tolerance."""


class IllPosedLogdetError(ValueError):
    """The extended difference-of-logdet is undefined for this pair.

    Raised when no common congruence exists that block-diagonalizes both
    operands with the second operand positive definite on the leading block,
    i.e. when the signal matrix has components outside the range of the noise
    matrix. This signals a modeling error upstream rather than something to
    silently regularize.
    """


def hermitize(a) -> np.ndarray:
    """Return the Hermitian part (A + A^H) / 2 of a square matrix.

    Idempotent on Hermitian input; used after every product of the form
    H X H^H to suppress round-off drift.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise MatrixShapeError(f"expected a square matrix, got shape {a.shape}")
    return 0.5 * (a + a.conj().T)


def _eig_cutoff(eigvals: np.ndarray, rank_tol: float) -> float:
    top = eigvals[-1] if eigvals.size else 0.0
    return rank_tol * max(1.0, top)


def is_psd(a, rank_tol: float = DEFAULT_RANK_TOL) -> bool:
    """PSD test: min eigenvalue >= -rank_tol * max(1, max eigenvalue)."""
    w = np.linalg.eigvalsh(hermitize(a))
    return bool(w.size == 0 or w[0] >= -_eig_cutoff(w, rank_tol))


def assert_hermitian(a, tol: float = 1e-10) -> np.ndarray:
    """Check Hermitian symmetry within tolerance and return the symmetrized copy."""
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise MatrixShapeError(f"expected a square matrix, got shape {a.shape}")
    scale = max(1.0, np.abs(a).max()) if a.size else 1.0
    if np.abs(a - a.conj().T).max(initial=0.0) > tol * scale:
        raise MatrixShapeError("matrix is not Hermitian within tolerance")
    return hermitize(a)


def psd_eigh(a, rank_tol: float = DEFAULT_RANK_TOL):
    """Eigendecomposition of a Hermitian PSD matrix.

    Returns (w, v) with eigenvalues ascending. Eigenvalues in the band
    [-cut, cut] with cut = rank_tol * max(1, w_max) are clipped to zero;
    anything below -cut raises IndefiniteMatrixError.
    """
    a = hermitize(a)
    w, v = np.linalg.eigh(a)
    cut = _eig_cutoff(w, rank_tol)
    if w.size and w[0] < -cut:
        raise IndefiniteMatrixError(
            f"matrix has negative eigenvalue {w[0]:.3e} beyond tolerance {cut:.3e}"
        )
    w = np.where(np.abs(w) <= cut, 0.0, w)
    return w, v


def pseudo_inverse(a, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Moore-Penrose pseudo-inverse of a Hermitian PSD matrix.

    Eigenvalues below rank_tol * max(1, lambda_max) are treated as zero.
    The result is Hermitian PSD and satisfies the four Penrose identities.
    Indefinite input raises IndefiniteMatrixError.
    """
    w, v = psd_eigh(a, rank_tol)
    inv = np.zeros_like(w)
    nz = w > 0.0
    inv[nz] = 1.0 / w[nz]
    return hermitize((v * inv) @ v.conj().T)


def rank_psd(a, rank_tol: float = DEFAULT_RANK_TOL) -> int:
    """Numerical rank of a Hermitian PSD matrix under the shared cutoff rule."""
    w, _ = psd_eigh(a, rank_tol)
    return int(np.count_nonzero(w > 0.0))


def range_projector(a, rank_tol: float = DEFAULT_RANK_TOL) -> np.ndarray:
    """Orthogonal projector onto the range of a Hermitian PSD matrix."""
    w, v = psd_eigh(a, rank_tol)
    vr = v[:, w > 0.0]
    return hermitize(vr @ vr.conj().T)


def ext_logdet_diff(a, b, rank_tol: float = DEFAULT_RANK_TOL) -> float:
    """Extended difference of logdet: log|A + B| - log|B| for PSD A, B (nats).

    When B is positive definite this is the plain difference of log
    determinants. When B is singular, the pair must admit a common congruence
    putting both into block-diagonal form with B positive definite on the
    leading block and both zero on the trailing block; the value is then the
    plain difference on the leading block. Numerically that admissibility is
    rank(A + B) == rank(B), i.e. range(A) contained in range(B); pairs
    violating it raise IllPosedLogdetError.

    The value is >= 0 for PSD A and is monotone nondecreasing in A.
    """
    a = assert_hermitian(a)
    b = assert_hermitian(b)
    if a.shape != b.shape:
        raise MatrixShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    wb, vb = psd_eigh(b, rank_tol)
    psd_eigh(a, rank_tol)  # reject indefinite A
    keep = wb > 0.0
    m = int(np.count_nonzero(keep))
    if m < a.shape[0]:
        # admissibility: A must not leak outside range(B)
        if rank_psd(a + b, rank_tol) > m:
            raise IllPosedLogdetError(
                "signal matrix has components outside the range of the noise matrix"
            )
    if m == 0:
        return 0.0
    vr = vb[:, keep]
    b1 = np.diag(wb[keep])
    a1 = hermitize(vr.conj().T @ a @ vr)
    sign_ab, logdet_ab = np.linalg.slogdet(a1 + b1)
    logdet_b = float(np.sum(np.log(wb[keep])))
    if sign_ab.real <= 0:
        raise IllPosedLogdetError("truncated block is numerically singular")
    return float(logdet_ab - logdet_b)


@dataclass
class TruncationDecomposition:
    """Contragredient block decomposition of a PSD pair (A, B).

    A nonsingular `transform` T satisfies

        T A T^H          = diag(S1, 0, S3, 0)
        T^-H B T^-1      = diag(S1, S2, 0, 0)

    with S1, S2, S3 diagonal positive definite. The four blocks classify
    directions where both matrices act (S1), only B (S2), only A (S3), or
    neither. `signal_rank` is the size of the shared S1 block.
    """

    transform: np.ndarray
    signal_rank: int
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    block_sizes: tuple[int, int, int, int]
    diagnostics: dict = field(default_factory=dict)

    def block_pattern_a(self) -> np.ndarray:
        m1, m2, m3, m4 = self.block_sizes
        d = np.concatenate(
            [np.diag(self.s1), np.zeros(m2), np.diag(self.s3), np.zeros(m4)]
        )
        return np.diag(d).astype(complex)

    def block_pattern_b(self) -> np.ndarray:
        m1, m2, m3, m4 = self.block_sizes
        d = np.concatenate(
            [np.diag(self.s1), np.diag(self.s2), np.zeros(m3), np.zeros(m4)]
        )
        return np.diag(d).astype(complex)


def _psd_factor(a, rank_tol: float) -> np.ndarray:
    """Factor A = F F^H with F of full column rank, from the eigendecomposition."""
    w, v = psd_eigh(a, rank_tol)
    keep = w > 0.0
    return v[:, keep] * np.sqrt(w[keep])


def simultaneous_decompose(
    a, b, rank_tol: float = DEFAULT_RANK_TOL
) -> TruncationDecomposition:
    """Joint block decomposition of two Hermitian PSD matrices.

    Constructs the nonsingular transform of `TruncationDecomposition` by an
    SVD coupling of the two PSD factors: with A = Fa Fa^H, B = Fb Fb^H and
    Fb^H Fa = U s V^H, the shared block carries the nonzero singular values s
    (whose squares are the nonzero eigenvalues of A B), and the remaining
    blocks are completed inside the appropriate null spaces. Rank decisions
    near the cutoff are reported in `diagnostics`, not raised.
    """
    a = assert_hermitian(a)
    b = assert_hermitian(b)
    if a.shape != b.shape:
        raise MatrixShapeError(f"shape mismatch {a.shape} vs {b.shape}")
    n = a.shape[0]
    fa = _psd_factor(a, rank_tol)
    fb = _psd_factor(b, rank_tol)
    ra, rb = fa.shape[1], fb.shape[1]

    c = fb.conj().T @ fa
    u, s, vh = np.linalg.svd(c) if min(c.shape) else (
        np.eye(rb, dtype=complex),
        np.zeros(0),
        np.eye(ra, dtype=complex),
    )
    v = vh.conj().T
    s_cut = rank_tol * max(1.0, s[0] if s.size else 0.0)
    r = int(np.count_nonzero(s > s_cut))
    s1 = s[:r]

    # columns of T^-1 / rows of T covering the ranges of A and B
    x1 = fa @ v[:, :r] / np.sqrt(s1) if r else np.zeros((n, 0), dtype=complex)
    x3 = fa @ v[:, r:]
    y1 = (
        (u[:, :r] / np.sqrt(s1)).conj().T @ fb.conj().T
        if r
        else np.zeros((0, n), dtype=complex)
    )
    y2 = u[:, r:].conj().T @ fb.conj().T
    y12 = np.vstack([y1, y2])

    # complete the "only B" columns: Y1 X2 = 0, Y2 X2 = I
    rhs = np.vstack([np.zeros((r, rb - r)), np.eye(rb - r)]).astype(complex)
    x2 = np.linalg.pinv(y12) @ rhs if rb else np.zeros((n, 0), dtype=complex)

    # complete the joint null block inside null(Y12), independent of X3
    if rb < n:
        _, sv, vhn = np.linalg.svd(y12) if rb else (None, np.zeros(0), np.eye(n, dtype=complex))
        kernel = vhn[rb:].conj().T  # orthonormal basis of null(Y12), n x (n - rb)
        g = kernel.conj().T @ x3
        if g.shape[1]:
            ug, sg, _ = np.linalg.svd(g, full_matrices=True)
            rg = int(np.count_nonzero(sg > rank_tol * max(1.0, sg[0] if sg.size else 0.0)))
            x4 = kernel @ ug[:, rg:]
        else:
            x4 = kernel
    else:
        x4 = np.zeros((n, 0), dtype=complex)

    t_inv = np.hstack([x1, x2, x3, x4])
    if t_inv.shape != (n, n):
        raise IndefiniteMatrixError(
            f"block completion produced {t_inv.shape[1]} columns for dimension {n}"
        )
    cond = np.linalg.cond(t_inv)
    t = np.linalg.inv(t_inv)

    m1, m2, m3 = r, rb - r, ra - r
    m4 = n - m1 - m2 - m3
    dec = TruncationDecomposition(
        transform=t,
        signal_rank=r,
        s1=np.diag(s1),
        s2=np.eye(m2),
        s3=np.eye(m3),
        block_sizes=(m1, m2, m3, m4),
    )
    recon_a = np.abs(t @ a @ t.conj().T - dec.block_pattern_a()).max(initial=0.0)
    recon_b = np.abs(
        t_inv.conj().T @ b @ t_inv - dec.block_pattern_b()
    ).max(initial=0.0)
    dec.diagnostics = {
        "condition_number": float(cond),
        "recon_error_a": float(recon_a),
        "recon_error_b": float(recon_b),
    }
    return dec
