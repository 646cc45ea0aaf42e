"""Iterative minimax solver for the weighted sum-rate maximization.

Each iteration, starting from a feasible set of transmit covariances:

1. form the interference-plus-noise covariances Omega_l,
2. choose the matrix duals Lambda_l minimizing the Lagrangian over Omega,
3. choose the group duals mu_s enforcing complementary slackness
   (active-set probe at mu = 0+, then bisection on each active group),
4. take the explicit saddle step for the tentative covariances, and
5. rescale by the peak constraint usage to restore feasibility.

The objective sequence is nondecreasing by construction; a violation beyond
slack indicates a numerical problem and aborts with diagnostics.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import matops
from .matops import hermitize
from .network import (
    Network,
    achievable_rate,
    constraint_usage,
    interference_plus_noise,
    objective_value,
)


class SolverError(RuntimeError):
    """Unrecoverable numerical failure inside the solve loop."""


class MonotonicityError(SolverError):
    """Objective decreased beyond slack; the iteration guarantee was broken."""

    def __init__(self, iteration: int, before: float, after: float):
        super().__init__(
            f"objective decreased at iteration {iteration}: "
            f"{before:.12e} -> {after:.12e}"
        )
        self.iteration = iteration
        self.before = before
        self.after = after


@dataclass
class SolverConfig:
    """Tolerances and limits for the solve loop.

    mu_probe_eps = None derives the 0+ probe from the constraint matrices'
    trace scale. Stopping: relative objective change below obj_tol over a
    window of obj_window iterations, or max KKT residual below kkt_tol.
    """

    max_iters: int = 10000
    obj_tol: float = 1e-9
    obj_window: int = 3
    kkt_tol: float = 1e-7
    mu_probe_eps: float | None = None
    bisection_tol: float = 1e-12
    bisection_max_steps: int = 200
    max_gs_sweeps: int = 60
    rank_tol: float = 1e-9
    monotone_slack: float = 1e-10

    def __post_init__(self):
        for name in ("obj_tol", "kkt_tol", "bisection_tol", "rank_tol",
                     "monotone_slack"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.mu_probe_eps is not None and self.mu_probe_eps <= 0:
            raise ValueError("mu_probe_eps must be positive")


@dataclass
class DualState:
    """Dual variables: per-link Lambda_l, per-group mu_s, derived Phi_l."""

    lam: list[np.ndarray]
    mu: np.ndarray
    phi: list[np.ndarray]


@dataclass
class IterationTrace:
    """Append-only per-iteration record of the solve loop."""

    objective: list[float] = field(default_factory=list)
    lam_scale: list[float] = field(default_factory=list)
    mu: list[np.ndarray] = field(default_factory=list)
    kkt_max: list[float] = field(default_factory=list)
    comp_slack: list[float] = field(default_factory=list)
    wall_ms: list[float] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.objective)

    def append(self, objective, lam_scale, mu, kkt_max, comp_slack, wall_ms):
        self.objective.append(float(objective))
        self.lam_scale.append(float(lam_scale))
        self.mu.append(np.asarray(mu, dtype=float).copy())
        self.kkt_max.append(float(kkt_max))
        self.comp_slack.append(float(comp_slack))
        self.wall_ms.append(float(wall_ms))

    def csv_header(self) -> str:
        n_groups = len(self.mu[0]) if self.mu else 0
        mu_cols = ",".join(f"mu_{s}" for s in range(n_groups))
        cols = ["iter", "objective_nats", "lambda_scale"]
        if mu_cols:
            cols.append(mu_cols)
        cols += ["kkt_max_residual", "wall_ms"]
        return ",".join(cols)

    def to_csv(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.csv_header() + "\n")
            for i in range(len(self)):
                mu_vals = ",".join(repr(float(v)) for v in self.mu[i])
                row = [str(i), repr(self.objective[i]), repr(self.lam_scale[i])]
                if mu_vals:
                    row.append(mu_vals)
                row += [repr(self.kkt_max[i]), repr(self.wall_ms[i])]
                f.write(",".join(row) + "\n")


@dataclass
class KKTReport:
    """Residuals of the saddle-point optimality system.

    stationarity_sigma: Frobenius norm of the covariance stationarity
    residual projected onto range(Sigma_l) (the truncated subspace where the
    equality is required to hold).
    cone_sigma: most positive eigenvalue of the unprojected residual, which
    must be <= 0 at an optimum for directions where Sigma is rank deficient.
    stationarity_omega: residual of the Lambda defining relation, projected
    onto the range of Omega_l + H Sigma H^H.
    """

    stationarity_sigma: np.ndarray
    cone_sigma: np.ndarray
    stationarity_omega: np.ndarray
    primal_slack: float
    dual_violation: float
    comp_slack: np.ndarray

    @property
    def max_residual(self) -> float:
        parts = [
            self.stationarity_sigma.max(initial=0.0),
            self.cone_sigma.max(initial=0.0),
            self.stationarity_omega.max(initial=0.0),
            self.primal_slack,
            self.dual_violation,
            self.comp_slack.max(initial=0.0),
        ]
        return float(max(parts))


@dataclass
class SolveResult:
    sigma: list[np.ndarray]
    omegas: list[np.ndarray]
    dual: DualState
    trace: IterationTrace
    kkt: KKTReport
    objective: float
    rates: np.ndarray
    iterations: int
    converged: bool
    termination: str


def _inv_psd(a: np.ndarray, rank_tol: float) -> np.ndarray:
    """Inverse of a Hermitian PD matrix; pseudo-inverse when singular."""
    a = hermitize(a)
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError:
        return matops.pseudo_inverse(a, rank_tol)
    return hermitize(np.linalg.inv(a))


def dual_lambda(
    net: Network,
    sigma: list[np.ndarray],
    omegas: list[np.ndarray],
    rank_tol: float = matops.DEFAULT_RANK_TOL,
) -> list[np.ndarray]:
    """Matrix duals Lambda_l = w_l (Omega_l^-1 - (Omega_l + H Sigma H^H)^-1).

    This is the negative Omega-gradient of the objective, and is PSD for
    PSD signal covariances.
    """
    lam = []
    for l in range(net.n_links):
        h = net.h(l, l)
        signal = hermitize(h @ sigma[l] @ h.conj().T)
        inv_noise = _inv_psd(omegas[l], rank_tol)
        inv_total = _inv_psd(omegas[l] + signal, rank_tol)
        lam.append(hermitize(net.weights[l] * (inv_noise - inv_total)))
    return lam


def dual_phi(
    net: Network, lam: list[np.ndarray], mu: np.ndarray
) -> list[np.ndarray]:
    """Derived duals Phi_l = sum_s mu_s Q_l^s + sum_{k != l} H_kl^H Lambda_k H_kl."""
    base = _phi_interference_terms(net, lam)
    phi = []
    for l in range(net.n_links):
        p = base[l].copy()
        for s in net.groups_of_link(l):
            p = p + mu[s] * net.groups[s].shaping[l]
        phi.append(hermitize(p))
    return phi


def _phi_interference_terms(net: Network, lam: list[np.ndarray]) -> list[np.ndarray]:
    """The mu-independent part of Phi_l."""
    out = []
    for l in range(net.n_links):
        n = net.links[l].tx_antennas
        acc = np.zeros((n, n), dtype=complex)
        for k in range(net.n_links):
            if k == l:
                continue
            hkl = net.h(k, l)  # transmitter l -> receiver k
            acc = acc + hkl.conj().T @ lam[k] @ hkl
        out.append(hermitize(acc))
    return out


def saddle_step(
    net: Network,
    lam: list[np.ndarray],
    phi: list[np.ndarray],
    rank_tol: float = matops.DEFAULT_RANK_TOL,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Explicit saddle solution for given duals.

    Sigma_l = w_l (Phi_l^-1 - (Phi_l + H^H Lambda H)^-1),
    Omega_l = w_l H (Phi_l + H^H Lambda H)^-1 H^H,
    with pseudo-inverses when singular. Both outputs are PSD.
    """
    sigma_t, omega_t = [], []
    for l in range(net.n_links):
        h = net.h(l, l)
        g = hermitize(h.conj().T @ lam[l] @ h)
        inv_phi = _inv_psd(phi[l], rank_tol)
        inv_psi = _inv_psd(phi[l] + g, rank_tol)
        w = net.weights[l]
        sigma_t.append(hermitize(w * (inv_phi - inv_psi)))
        omega_t.append(hermitize(w * (h @ inv_psi @ h.conj().T)))
    return sigma_t, omega_t


# ---------------------------------------------------------------------------
# group dual search


def _default_probe(net: Network) -> float:
    q_scale = max(
        float(np.trace(g.shaping[l]).real) for g in net.groups for l in g.members
    )
    return 1e-9 * max(q_scale, 1e-300)


def _scaled_identity_coeff(q: np.ndarray) -> float | None:
    """If Q = c I return c, else None."""
    n = q.shape[0]
    c = float(np.trace(q).real) / n
    if np.allclose(q, c * np.eye(n), rtol=0.0, atol=1e-13 * max(1.0, abs(c))):
        return c
    return None


@dataclass
class MuSolveInfo:
    active: list[int]
    probe_fallback: bool
    sweeps: int
    comp_slack: float


def solve_mu(
    net: Network, lam: list[np.ndarray], cfg: SolverConfig
) -> tuple[np.ndarray, list[np.ndarray], MuSolveInfo]:
    """Choose per-group duals mu enforcing complementary slackness.

    The active set is probed at mu = 0+; groups outside it get mu = 0, and
    for each active group mu_s is bisected so that its usage equals one
    (trace usage is decreasing in mu_s). Disjoint single-membership groups
    with scaled-identity shaping solve in closed form per group; overlapping
    or general shapings fall back to cyclic per-group bisection sweeps.

    Returns (mu, tentative covariances at mu, info).
    """
    base = _phi_interference_terms(net, lam)
    gmats = []
    for l in range(net.n_links):
        h = net.h(l, l)
        gmats.append(hermitize(h.conj().T @ lam[l] @ h))

    probe = cfg.mu_probe_eps if cfg.mu_probe_eps is not None else _default_probe(net)

    fast_coeffs = _fast_path_coeffs(net)
    if fast_coeffs is not None:
        mu, info = _solve_mu_fast(net, base, gmats, fast_coeffs, probe, cfg)
    else:
        mu, info = _solve_mu_sweeps(net, lam, base, gmats, probe, cfg)

    if _needs_probe_fallback(net, base, mu, cfg.rank_tol):
        mu = np.full(len(net.groups), probe)
        info.probe_fallback = True

    sigma_t = _sigma_tilde(net, base, gmats, mu, cfg.rank_tol)
    usage = constraint_usage(net, sigma_t)
    info.comp_slack = float(np.abs(mu * (1.0 - usage)).max(initial=0.0))
    return mu, sigma_t, info


def _fast_path_coeffs(net: Network):
    """Per-link (group, coefficient) when each link sits in exactly one group
    with scaled-identity shaping; None otherwise."""
    coeffs = []
    for l in range(net.n_links):
        gs = net.groups_of_link(l)
        if len(gs) != 1:
            return None
        c = _scaled_identity_coeff(net.groups[gs[0]].shaping[l])
        if c is None:
            return None
        coeffs.append((gs[0], c))
    return coeffs


def _sigma_tilde(net, base, gmats, mu, rank_tol) -> list[np.ndarray]:
    sigma_t = []
    for l in range(net.n_links):
        phi = base[l].copy()
        for s in net.groups_of_link(l):
            phi = phi + mu[s] * net.groups[s].shaping[l]
        inv_phi = _inv_psd(phi, rank_tol)
        inv_psi = _inv_psd(phi + gmats[l], rank_tol)
        sigma_t.append(hermitize(net.weights[l] * (inv_phi - inv_psi)))
    return sigma_t


def _needs_probe_fallback(net, base, mu, rank_tol) -> bool:
    """Degenerate case: some link has no active group and a singular Phi."""
    for l in range(net.n_links):
        if any(mu[s] > 0 for s in net.groups_of_link(l)):
            continue
        w = np.linalg.eigvalsh(base[l])
        top = w[-1] if w.size else 0.0
        if w.size == 0 or w[0] <= rank_tol * max(1.0, top):
            return True
    return False


def _solve_mu_fast(net, base, gmats, coeffs, probe, cfg):
    """Independent per-group bisection with closed-form trace usage.

    For Q_l = c_l I the usage of group s is

        u_s(mu) = sum_{l in L^s} w_l c_l ( sum_i 1/(d_li + mu c_l)
                                         - sum_i 1/(e_li + mu c_l) )

    where d, e are the eigenvalues of the mu-free part of Phi_l and of
    Phi_l + H^H Lambda H. u_s is continuous and strictly decreasing wherever
    positive, so the bracketed bisection is safe.
    """
    n_groups = len(net.groups)
    members = [[] for _ in range(n_groups)]
    spectra = []
    for l in range(net.n_links):
        s, c = coeffs[l]
        members[s].append(l)
        d = np.clip(np.linalg.eigvalsh(base[l]), 0.0, None)
        e = np.clip(np.linalg.eigvalsh(base[l] + gmats[l]), 0.0, None)
        spectra.append((d, e, c, net.weights[l]))

    def usage(s, mu_s):
        total = 0.0
        for l in members[s]:
            d, e, c, w = spectra[l]
            total += w * c * (np.sum(1.0 / (d + mu_s * c)) - np.sum(1.0 / (e + mu_s * c)))
        return total

    mu = np.zeros(n_groups)
    active = []
    for s in range(n_groups):
        if usage(s, probe) >= 1.0:
            active.append(s)
            mu[s] = _bisect_usage(lambda m: usage(s, m), probe, cfg)
    return mu, MuSolveInfo(active=active, probe_fallback=False, sweeps=1,
                           comp_slack=0.0)


def _bisect_usage(u, probe, cfg):
    """Find mu with u(mu) = 1 for decreasing u, u(probe) >= 1."""
    lo, hi = probe, max(1.0, 2.0 * probe)
    steps = 0
    while u(hi) >= 1.0:
        lo = hi
        hi *= 2.0
        steps += 1
        if steps > 200:
            raise SolverError("bisection bracket failure: usage never drops below 1")
    for _ in range(cfg.bisection_max_steps):
        mid = 0.5 * (lo + hi)
        val = u(mid)
        if abs(val - 1.0) < cfg.bisection_tol:
            return mid
        if val > 1.0:
            lo = mid
        else:
            hi = mid
        if (hi - lo) <= 1e-16 * max(1.0, hi):
            break
    return 0.5 * (lo + hi)


def _solve_mu_sweeps(net, lam, base, gmats, probe, cfg):
    """Cyclic per-group bisection for overlapping or general shapings.

    Each coordinate map is monotone, so Gauss-Seidel sweeps over the active
    groups converge; the active set is re-derived each sweep.
    """
    n_groups = len(net.groups)

    def group_usage(s, mu_vec):
        sigma_t = _sigma_tilde(net, base, gmats, mu_vec, cfg.rank_tol)
        return constraint_usage(net, sigma_t)[s]

    mu = np.full(n_groups, probe)
    sweeps = 0
    for sweeps in range(1, cfg.max_gs_sweeps + 1):
        changed = False
        for s in range(n_groups):
            trial = mu.copy()
            trial[s] = probe
            if group_usage(s, trial) < 1.0:
                if mu[s] != 0.0:
                    changed = True
                mu[s] = 0.0
                continue

            def u(m, s=s):
                trial = mu.copy()
                trial[s] = m
                return group_usage(s, trial)

            new = _bisect_usage(u, probe, cfg)
            if abs(new - mu[s]) > cfg.bisection_tol * max(1.0, new):
                changed = True
            mu[s] = new
        sigma_t = _sigma_tilde(net, base, gmats, mu, cfg.rank_tol)
        usage = constraint_usage(net, sigma_t)
        active = [s for s in range(n_groups) if mu[s] > 0]
        dev = max((abs(usage[s] - 1.0) for s in active), default=0.0)
        if not changed and dev < 1e-9:
            break
    else:
        raise SolverError("group dual sweeps did not converge")
    return mu, MuSolveInfo(active=active, probe_fallback=False, sweeps=sweeps,
                           comp_slack=0.0)


# ---------------------------------------------------------------------------
# commit, iterate, solve


def scale_and_commit(
    net: Network, sigma_tilde: list[np.ndarray]
) -> tuple[list[np.ndarray], list[np.ndarray], float]:
    """Rescale tentative covariances by the peak usage and refresh Omega.

    lambda = max_s usage_s is in (0, 1] after the mu-solve; dividing by it
    restores feasibility with the binding group exactly tight.
    """
    usage = constraint_usage(net, sigma_tilde)
    lam_scale = float(usage.max(initial=0.0))
    if lam_scale <= 0.0:
        raise SolverError("scaling factor is nonpositive; upstream mu-solve failed")
    if lam_scale > 1.0 + 1e-8:
        raise SolverError(f"scaling factor {lam_scale} exceeds 1; infeasible step")
    sigma = [s / lam_scale for s in sigma_tilde]
    omegas = interference_plus_noise(net, sigma)
    return sigma, omegas, lam_scale


def kkt_residual(
    net: Network,
    sigma: list[np.ndarray],
    omegas: list[np.ndarray],
    lam: list[np.ndarray],
    mu: np.ndarray,
    rank_tol: float = matops.DEFAULT_RANK_TOL,
) -> KKTReport:
    """Residual report for the first-order saddle system and KKT side conditions.

    Stationarity residuals are Frobenius norms restricted to the truncated
    subspaces (range of Sigma_l for the covariance equation, range of
    Omega_l + H Sigma H^H for the Lambda equation); rank-deficient optima
    additionally require the unprojected covariance residual to be negative
    semidefinite, reported through `cone_sigma`.
    """
    phi = dual_phi(net, lam, mu)
    nl = net.n_links
    r_sig = np.zeros(nl)
    r_cone = np.zeros(nl)
    r_om = np.zeros(nl)
    dual_viol = max(0.0, float(-mu.min(initial=0.0)))
    for l in range(nl):
        h = net.h(l, l)
        w = net.weights[l]
        signal = hermitize(h @ sigma[l] @ h.conj().T)
        total = hermitize(omegas[l] + signal)
        inv_total = _inv_psd(total, rank_tol)
        grad_sigma = hermitize(w * (h.conj().T @ inv_total @ h))
        res1 = grad_sigma - phi[l]
        p1 = matops.range_projector(sigma[l], rank_tol)
        r_sig[l] = np.linalg.norm(p1 @ res1 @ p1)
        ev = np.linalg.eigvalsh(res1)
        r_cone[l] = max(0.0, float(ev[-1]) if ev.size else 0.0)
        # the Lambda relation Lambda = w (Omega^-1 - (Omega + S)^-1) is
        # checked in the multiplied form Omega Lambda (Omega + S) = w S, a
        # backward-error residual that needs no inversion of Omega and stays
        # meaningful when Omega is close to singular
        res2 = omegas[l] @ lam[l] @ total - w * signal
        p2 = matops.range_projector(total, rank_tol)
        denom = max(1.0, np.linalg.norm(omegas[l], 2)) * max(
            1.0, np.linalg.norm(total, 2)
        )
        r_om[l] = np.linalg.norm(p2 @ res2 @ p2) / denom
        lam_eigs = np.linalg.eigvalsh(lam[l])
        if lam_eigs.size:
            dual_viol = max(dual_viol, -float(lam_eigs[0]))
    usage = constraint_usage(net, sigma)
    primal_slack = max(0.0, float((usage - 1.0).max(initial=0.0)))
    comp = np.abs(mu * (1.0 - usage))
    return KKTReport(
        stationarity_sigma=r_sig,
        cone_sigma=r_cone,
        stationarity_omega=r_om,
        primal_slack=primal_slack,
        dual_violation=max(0.0, dual_viol),
        comp_slack=comp,
    )


@dataclass
class IterateResult:
    sigma: list[np.ndarray]
    omegas: list[np.ndarray]
    dual: DualState
    objective_before: float
    objective_after: float
    lam_scale: float
    kkt: KKTReport
    mu_info: MuSolveInfo


def iterate(
    net: Network, sigma: list[np.ndarray], cfg: SolverConfig,
    iteration: int = 0,
) -> IterateResult:
    """One pass of the minimax iteration from a feasible covariance set."""
    omegas = interference_plus_noise(net, sigma)
    f0 = objective_value(net, sigma, omegas, cfg.rank_tol)
    lam = dual_lambda(net, sigma, omegas, cfg.rank_tol)
    mu, sigma_tilde, mu_info = solve_mu(net, lam, cfg)
    phi = dual_phi(net, lam, mu)
    sigma1, omegas1, lam_scale = scale_and_commit(net, sigma_tilde)
    f1 = objective_value(net, sigma1, omegas1, cfg.rank_tol)
    if f1 < f0 - cfg.monotone_slack * max(1.0, abs(f0)):
        raise MonotonicityError(iteration, f0, f1)
    kkt = kkt_residual(net, sigma1, omegas1, lam, mu, cfg.rank_tol)
    return IterateResult(
        sigma=sigma1,
        omegas=omegas1,
        dual=DualState(lam=lam, mu=mu, phi=phi),
        objective_before=f0,
        objective_after=f1,
        lam_scale=lam_scale,
        kkt=kkt,
        mu_info=mu_info,
    )


def default_initial_sigma(net: Network) -> list[np.ndarray]:
    """Strictly interior start: Sigma_l = c_l I with every group usage <= 0.9
    (exactly 0.9 for disjoint single-membership groups)."""
    group_traces = [
        sum(float(np.trace(g.shaping[l]).real) for l in g.members)
        for g in net.groups
    ]
    sigma = []
    for l in range(net.n_links):
        t = max(group_traces[s] for s in net.groups_of_link(l))
        n = net.links[l].tx_antennas
        sigma.append(0.9 / t * np.eye(n, dtype=complex))
    return sigma


def solve(
    net: Network,
    sigma_init: list[np.ndarray] | None = None,
    cfg: SolverConfig | None = None,
) -> SolveResult:
    """Run the iterative minimax algorithm until a stopping rule fires.

    Stops on relative objective change below obj_tol sustained over the
    configured window, on max KKT residual below kkt_tol, or at max_iters
    (flagged as not converged, not fatal).
    """
    cfg = cfg or SolverConfig()
    sigma = sigma_init if sigma_init is not None else default_initial_sigma(net)
    usage0 = constraint_usage(net, sigma)
    if (usage0 > 1.0 + 1e-9).any():
        raise SolverError(f"initial covariances infeasible: usage {usage0}")

    trace = IterationTrace()
    termination = "max_iters"
    converged = False
    result = None
    for it in range(cfg.max_iters):
        t0 = time.perf_counter()
        result = iterate(net, sigma, cfg, iteration=it)
        wall_ms = (time.perf_counter() - t0) * 1e3
        sigma = result.sigma
        kkt_max = result.kkt.max_residual
        trace.append(
            result.objective_after,
            result.lam_scale,
            result.dual.mu,
            kkt_max,
            result.mu_info.comp_slack,
            wall_ms,
        )
        if kkt_max < cfg.kkt_tol:
            termination = "kkt"
            converged = True
            break
        if len(trace) > cfg.obj_window:
            f_new = trace.objective[-1]
            f_old = trace.objective[-1 - cfg.obj_window]
            if abs(f_new - f_old) < cfg.obj_tol * max(1.0, abs(f_new)):
                termination = "objective"
                converged = True
                break

    assert result is not None, "solver must run at least one iteration"
    rates = np.array(
        [achievable_rate(net, sigma, l, cfg.rank_tol) for l in range(net.n_links)]
    )
    return SolveResult(
        sigma=sigma,
        omegas=result.omegas,
        dual=result.dual,
        trace=trace,
        kkt=result.kkt,
        objective=trace.objective[-1],
        rates=rates,
        iterations=len(trace),
        converged=converged,
        termination=termination,
    )
