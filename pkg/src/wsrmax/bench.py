"""Per-iteration cost measurement of the minimax iteration's linear algebra.

The iteration cost model is L * (L - 1) cross-channel products plus a fixed
number of O(N^3) inversions per link, i.e. O(L^2 N^3) per iteration with
classical kernels. To make that scaling measurable at desk-scale dimensions
(N as small as 2), the timed kernel is a compiled replica of one iteration
(interference covariances, matrix duals, derived duals, tentative
covariances at a fixed group dual, total-power rescale) using hand-rolled
classical matrix multiply and Gauss-Jordan inversion; repetitions run inside
the compiled region so per-call dispatch does not pollute the fit.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit


@njit(cache=True)
def _matmul_into(a, b, out):
    # out = a @ b, classical triple loop in dot-product form with compensated
    # (Kahan) accumulation, no allocation. Compensation bounds the round-off
    # of long dot products; its serial dependency chain also keeps the
    # compiler from vectorizing or reordering the reduction, so measured time
    # tracks the classical flop count rather than the SIMD width.
    m, kk = a.shape
    n = b.shape[1]
    c = 0.0 + 0.0j
    for i in range(m):
        for j in range(n):
            # c - c is zero for finite inputs, but the data dependency on the
            # previous dot product's compensation serializes the whole matmul
            # as the sequential machine model behind the flop count assumes
            s = c - c
            c = s
            for p in range(kk):
                y = a[i, p] * b[p, j] - c
                t = s + y
                c = (t - s) - y
                s = t
            out[i, j] = s


@njit(cache=True)
def _congruence_acc(hmat, x, hadj, tmp, tmp2, out):
    # out += hmat @ x @ hadj using the two scratch buffers
    _matmul_into(hmat, x, tmp)
    _matmul_into(tmp, hadj, tmp2)
    n = out.shape[0]
    for i in range(n):
        for j in range(n):
            out[i, j] += tmp2[i, j]


@njit(cache=True)
def _inv_into(a, work, out):
    # Gauss-Jordan with partial pivoting; `work` is destroyed, out = a^-1
    n = a.shape[0]
    for i in range(n):
        for j in range(n):
            work[i, j] = a[i, j]
            out[i, j] = 0.0
        out[i, i] = 1.0
    for col in range(n):
        piv = col
        best = abs(work[col, col])
        for r in range(col + 1, n):
            mag = abs(work[r, col])
            if mag > best:
                best = mag
                piv = r
        if piv != col:
            for j in range(n):
                tmp = work[col, j]
                work[col, j] = work[piv, j]
                work[piv, j] = tmp
                tmp = out[col, j]
                out[col, j] = out[piv, j]
                out[piv, j] = tmp
        pv = work[col, col]
        inv_pv = 1.0 / pv
        for j in range(n):
            work[col, j] *= inv_pv
            out[col, j] *= inv_pv
        for r in range(n):
            if r != col:
                f = work[r, col]
                if f != 0:
                    for j in range(n):
                        work[r, j] -= f * work[col, j]
                        out[r, j] -= f * out[col, j]


@njit(cache=True)
def _iteration_kernel(h, hadj, w, p_total, mu, reps):
    """`reps` iterations of the total-power update at a fixed group dual.

    h: (L, L, N, N) channel table, h[l, k] from transmitter k to receiver l;
    hadj holds the precomputed adjoints. Returns the covariance stack so
    the work cannot be optimized away.
    """
    big_l = h.shape[0]
    n = h.shape[2]
    sigma = np.zeros((big_l, n, n), np.complex128)
    c0 = p_total / (big_l * n)
    for l in range(big_l):
        for i in range(n):
            sigma[l, i, i] = c0
    lam = np.zeros((big_l, n, n), np.complex128)
    tmp = np.empty((n, n), np.complex128)
    tmp2 = np.empty((n, n), np.complex128)
    work = np.empty((n, n), np.complex128)
    acc = np.empty((n, n), np.complex128)
    total = np.empty((n, n), np.complex128)
    inv1 = np.empty((n, n), np.complex128)
    inv2 = np.empty((n, n), np.complex128)
    for _ in range(reps):
        for l in range(big_l):
            for i in range(n):
                for j in range(n):
                    acc[i, j] = 0.0
                acc[i, i] = 1.0
            for k in range(big_l):
                if k != l:
                    _congruence_acc(h[l, k], sigma[k], hadj[l, k], tmp, tmp2, acc)
            _inv_into(acc, work, inv1)
            _congruence_acc(h[l, l], sigma[l], hadj[l, l], tmp, tmp2, acc)
            _inv_into(acc, work, inv2)
            for i in range(n):
                for j in range(n):
                    lam[l, i, j] = w[l] * (inv1[i, j] - inv2[i, j])
        total_trace = 0.0
        for l in range(big_l):
            for i in range(n):
                for j in range(n):
                    acc[i, j] = 0.0
                acc[i, i] = mu / p_total
            for k in range(big_l):
                if k != l:
                    _congruence_acc(hadj[k, l], lam[k], h[k, l], tmp, tmp2, acc)
            _inv_into(acc, work, inv1)
            _congruence_acc(hadj[l, l], lam[l], h[l, l], tmp, tmp2, acc)
            _inv_into(acc, work, inv2)
            for i in range(n):
                for j in range(n):
                    sigma[l, i, j] = w[l] * (inv1[i, j] - inv2[i, j])
            for i in range(n):
                total_trace += sigma[l, i, i].real
        scale = total_trace / p_total
        if scale > 0.0:
            for l in range(big_l):
                for i in range(n):
                    for j in range(n):
                        sigma[l, i, j] /= scale
    return sigma


def _random_channel_stack(rng, big_l, n):
    h = (rng.standard_normal((big_l, big_l, n, n))
         + 1j * rng.standard_normal((big_l, big_l, n, n))) / np.sqrt(2)
    return np.ascontiguousarray(h, dtype=np.complex128)


def _per_iteration_seconds(big_l, n, rng, min_time=0.1, max_reps=1 << 16) -> float:
    h = _random_channel_stack(rng, big_l, n)
    hadj = np.ascontiguousarray(h.conj().transpose(0, 1, 3, 2))
    w = np.ones(big_l)
    _iteration_kernel(h, hadj, w, 10.0, 1.0, 1)  # compile / warm cache
    reps = 2
    while True:
        t0 = time.perf_counter()
        _iteration_kernel(h, hadj, w, 10.0, 1.0, reps)
        dt = time.perf_counter() - t0
        if dt >= min_time or reps >= max_reps:
            return dt / reps
        # aim past min_time with margin on the next attempt
        reps = min(max_reps, max(2 * reps, int(reps * 1.5 * min_time / max(dt, 1e-9))))


@dataclass
class BenchResult:
    """Timing table and log-log scaling fits."""

    rows: list[dict] = field(default_factory=list)  # {"links", "antennas", "per_iter_seconds"}
    slope_links: float = float("nan")
    slope_antennas: float = float("nan")
    fixed_antennas: int = 0
    fixed_links: int = 0

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write("links,antennas,per_iter_seconds\n")
            for r in self.rows:
                f.write(f"{r['links']},{r['antennas']},{r['per_iter_seconds']!r}\n")

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "slope_links": self.slope_links,
            "slope_antennas": self.slope_antennas,
            "fixed_antennas": self.fixed_antennas,
            "fixed_links": self.fixed_links,
        }


def benchmark_complexity(
    link_counts=(2, 4, 8, 16),
    antenna_counts=(2, 4, 8, 16),
    seed: int = 0,
    min_time: float = 0.1,
) -> BenchResult:
    """Measure per-iteration wall time over L and N sweeps and fit slopes.

    The L sweep runs at the largest requested N and vice versa; slopes are
    least-squares fits in log-log coordinates (expected: about 2 in L,
    about 3 in N for classical kernels).
    """
    rng = np.random.default_rng(seed)
    n_fix = max(antenna_counts)
    l_fix = max(link_counts)
    rows = []
    times_l = []
    for big_l in link_counts:
        t = _per_iteration_seconds(big_l, n_fix, rng, min_time)
        rows.append({"links": big_l, "antennas": n_fix, "per_iter_seconds": t})
        times_l.append(t)
    times_n = []
    for n in antenna_counts:
        if n == n_fix:
            t = times_l[list(link_counts).index(l_fix)]
        else:
            t = _per_iteration_seconds(l_fix, n, rng, min_time)
        rows.append({"links": l_fix, "antennas": n, "per_iter_seconds": t})
        times_n.append(t)
    slope_l = float(np.polyfit(np.log(link_counts), np.log(times_l), 1)[0])
    slope_n = float(np.polyfit(np.log(antenna_counts), np.log(times_n), 1)[0])
    return BenchResult(
        rows=rows,
        slope_links=slope_l,
        slope_antennas=slope_n,
        fixed_antennas=n_fix,
        fixed_links=l_fix,
    )
