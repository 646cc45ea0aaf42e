"""Tests for the minimax solve loop and its building blocks."""

import numpy as np
import pytest

from wsrmax.network import (
    ConstraintGroup,
    Link,
    Network,
    Scenario,
    constraint_usage,
    interference_plus_noise,
    random_network,
    weighted_sum_rate,
)
from wsrmax.solver import (
    SolverConfig,
    SolverError,
    default_initial_sigma,
    dual_lambda,
    dual_phi,
    iterate,
    kkt_residual,
    saddle_step,
    scale_and_commit,
    solve,
    solve_mu,
)


def siso_net(h, pt, weight=1.0):
    return Network(
        links=[Link(1, 1)],
        channels=[[np.array([[h]], dtype=complex)]],
        weights=np.array([weight]),
        groups=[ConstraintGroup((0,), {0: np.array([[1.0 / pt]], dtype=complex)})],
    )


def single_link_mimo(seed=0, n=3, m=3, pt=5.0):
    rng = np.random.default_rng(seed)
    h = (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2)
    return Network(
        links=[Link(n, m)],
        channels=[[h]],
        weights=np.array([1.0]),
        groups=[ConstraintGroup((0,), {0: np.eye(n, dtype=complex) / pt})],
    )


class TestDualVariables:
    def test_dual_lambda_formula(self):
        net = random_network(0, Scenario(links=2, tx=2, rx=2))
        sigma = default_initial_sigma(net)
        omegas = interference_plus_noise(net, sigma)
        lam = dual_lambda(net, sigma, omegas)
        for l in range(2):
            h = net.h(l, l)
            s = h @ sigma[l] @ h.conj().T
            expected = net.weights[l] * (
                np.linalg.inv(omegas[l]) - np.linalg.inv(omegas[l] + s)
            )
            assert np.allclose(lam[l], expected, atol=1e-10)
            assert np.linalg.eigvalsh(lam[l])[0] >= -1e-12

    def test_dual_phi_accumulates_groups_and_interference(self):
        net = random_network(1, Scenario(links=2, tx=2, rx=2))
        sigma = default_initial_sigma(net)
        omegas = interference_plus_noise(net, sigma)
        lam = dual_lambda(net, sigma, omegas)
        mu = np.array([1.7])
        phi = dual_phi(net, lam, mu)
        for l in range(2):
            k = 1 - l
            hkl = net.h(k, l)
            expected = (
                mu[0] * net.groups[0].shaping[l]
                + hkl.conj().T @ lam[k] @ hkl
            )
            assert np.allclose(phi[l], expected, atol=1e-10)


class TestSaddleStep:
    def test_residuals_vanish_for_generated_duals(self):
        # for any PD Phi and PSD Lambda the saddle output satisfies the
        # stationarity system on the truncated subspaces
        rng = np.random.default_rng(2)
        net = random_network(3, Scenario(links=3, tx=3, rx=3))
        lam = []
        for l in range(3):
            f = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
            lam.append(f @ f.conj().T / 3)
        mu = np.array([1.3])
        phi = dual_phi(net, lam, mu)
        sigma_t, omega_t = saddle_step(net, lam, phi)
        kkt = kkt_residual(net, sigma_t, omega_t, lam, mu)
        assert kkt.stationarity_sigma.max() < 1e-8
        assert kkt.stationarity_omega.max() < 1e-8

    def test_outputs_are_psd(self):
        rng = np.random.default_rng(3)
        net = random_network(4, Scenario(links=2, tx=2, rx=3))
        lam = []
        for l in range(2):
            f = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
            lam.append(f @ f.conj().T)
        phi = dual_phi(net, lam, np.array([0.8]))
        sigma_t, omega_t = saddle_step(net, lam, phi)
        for m in sigma_t + omega_t:
            assert np.linalg.eigvalsh(m)[0] >= -1e-10


class TestSolveMu:
    def test_complementary_slackness(self):
        net = random_network(5, Scenario(links=3, tx=2, rx=2))
        sigma = default_initial_sigma(net)
        omegas = interference_plus_noise(net, sigma)
        lam = dual_lambda(net, sigma, omegas)
        mu, sigma_t, info = solve_mu(net, lam, SolverConfig())
        usage = constraint_usage(net, sigma_t)
        assert np.abs(mu * (1.0 - usage)).max() < 1e-8
        assert info.comp_slack < 1e-8

    def test_fast_and_sweep_paths_agree(self):
        net = random_network(6, Scenario(links=3, tx=2, rx=2, constraint_mode="perlink"))
        sigma = default_initial_sigma(net)
        omegas = interference_plus_noise(net, sigma)
        lam = dual_lambda(net, sigma, omegas)
        cfg = SolverConfig()
        mu_fast, sig_fast, _ = solve_mu(net, lam, cfg)

        # perturb one shaping matrix off the scaled-identity pattern by an
        # exactly-representable rotation of nothing: rebuild with the same Q
        # as a generic Hermitian to force the general path
        groups = []
        for g in net.groups:
            shaping = {l: g.shaping[l].copy() for l in g.members}
            for l in shaping:
                shaping[l] = shaping[l] + 0.0j * np.ones_like(shaping[l])
                shaping[l][0, 0] += 1e-18  # breaks the exact identity test only
            groups.append(ConstraintGroup(g.members, shaping))
        net2 = Network(net.links, net.channels, net.weights, groups)
        mu_slow, sig_slow, info = solve_mu(net2, lam, cfg)
        assert np.allclose(mu_fast, mu_slow, rtol=1e-6, atol=1e-9)
        for a, b in zip(sig_fast, sig_slow):
            assert np.allclose(a, b, atol=1e-8)

    def test_inactive_group_gets_zero(self):
        # strong cross-interference bounds the tentative covariance through
        # Phi's mu-free part, so a huge per-link budget cannot bind at mu=0+
        rng = np.random.default_rng(17)
        h = lambda scale: scale * (
            rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        )
        net = Network(
            links=[Link(2, 2), Link(2, 2)],
            channels=[[h(1.0), h(3.0)], [h(3.0), h(1.0)]],
            weights=np.array([1.0, 1.0]),
            groups=[
                ConstraintGroup((0,), {0: np.eye(2, dtype=complex) / 1e12}),
                ConstraintGroup((1,), {1: np.eye(2, dtype=complex) / 1.0}),
            ],
        )
        lam = [np.eye(2, dtype=complex), np.eye(2, dtype=complex)]
        mu, sigma_t, info = solve_mu(net, lam, SolverConfig())
        assert mu[0] == 0.0
        assert 0 not in info.active
        usage = constraint_usage(net, sigma_t)
        assert usage[0] < 1.0

    def test_saturating_lambda_recovers_phi_inverse_scale(self):
        # when Lambda is enormous, (Phi + H^H Lambda H)^-1 vanishes and the
        # tentative covariance approaches w Phi^-1, so the binding mu solves
        # w tr(Phi^-1 Q) = 1, i.e. mu -> w for Q = I/pt with Phi = mu Q
        pt = 7.0
        w = 1.3
        net = siso_net(1.0, pt, weight=w)
        lam = [np.array([[1e14]], dtype=complex)]
        mu, sigma_t, _ = solve_mu(net, lam, SolverConfig())
        assert mu[0] == pytest.approx(w, rel=1e-6)
        assert sigma_t[0][0, 0].real == pytest.approx(pt, rel=1e-6)


class TestScaleAndCommit:
    def test_rescales_peak_usage_to_one(self):
        net = random_network(8, Scenario(links=2, tx=2, rx=2))
        sigma_t = [0.3 * np.eye(2, dtype=complex), 0.2 * np.eye(2, dtype=complex)]
        sigma, omegas, lam_scale = scale_and_commit(net, sigma_t)
        assert constraint_usage(net, sigma).max() == pytest.approx(1.0, abs=1e-12)
        assert lam_scale == pytest.approx(
            constraint_usage(net, sigma_t).max(), abs=1e-12
        )

    def test_rejects_infeasible_tentative(self):
        net = random_network(8, Scenario(links=2, tx=2, rx=2, total_power=1.0))
        with pytest.raises(SolverError):
            scale_and_commit(net, [10 * np.eye(2, dtype=complex)] * 2)

    def test_rejects_zero(self):
        net = random_network(8, Scenario(links=2, tx=2, rx=2))
        with pytest.raises(SolverError):
            scale_and_commit(net, [np.zeros((2, 2), dtype=complex)] * 2)


class TestSolve:
    def test_siso_capacity(self):
        h, pt = 0.8 - 0.4j, 4.0
        res = solve(siso_net(h, pt))
        assert res.iterations <= 5
        assert res.sigma[0][0, 0].real == pytest.approx(pt, abs=1e-8)
        assert res.objective == pytest.approx(
            np.log(1 + abs(h) ** 2 * pt), abs=1e-8
        )

    def test_single_link_matches_waterfilling(self):
        # closed-form waterfilling on the direct channel's singular values
        net = single_link_mimo(seed=4, n=3, m=3, pt=5.0)
        res = solve(net, cfg=SolverConfig(kkt_tol=1e-10, obj_tol=1e-14))
        h = net.h(0, 0)
        gains = np.linalg.svd(h, compute_uv=False) ** 2
        pt = 5.0
        # water level by bisection on total power
        lo, hi = 0.0, pt + 1.0 / gains.min()
        for _ in range(200):
            level = 0.5 * (lo + hi)
            p = np.clip(level - 1.0 / gains, 0.0, None)
            if p.sum() > pt:
                hi = level
            else:
                lo = level
        expected = np.sum(np.log(1.0 + gains * p))
        assert res.objective == pytest.approx(expected, abs=1e-7)

    def test_monotone_objective(self):
        net = random_network(9, Scenario(links=4, tx=2, rx=3))
        res = solve(net, cfg=SolverConfig(max_iters=50, obj_tol=1e-14))
        obj = np.array(res.trace.objective)
        assert (np.diff(obj) >= -1e-10 * np.maximum(1.0, np.abs(obj[:-1]))).all()

    def test_converges_and_binds_constraint(self):
        net = random_network(10, Scenario(links=3, tx=2, rx=3))
        res = solve(net)
        assert res.converged
        assert constraint_usage(net, res.sigma).max() == pytest.approx(1.0, abs=1e-9)
        assert res.objective == pytest.approx(
            weighted_sum_rate(net, res.sigma), abs=1e-9
        )

    def test_grouped_mode_converges(self):
        net = random_network(12, Scenario(links=4, tx=2, rx=2,
                                          constraint_mode="grouped", n_cells=2))
        res = solve(net)
        assert res.converged
        assert (constraint_usage(net, res.sigma) <= 1.0 + 1e-9).all()

    def test_kkt_termination_with_tight_tol(self):
        net = random_network(13, Scenario(links=3, tx=2, rx=2))
        res = solve(net, cfg=SolverConfig(kkt_tol=1e-6, obj_tol=1e-15))
        assert res.termination == "kkt"
        assert res.kkt.max_residual < 1e-6

    def test_max_iters_flagged(self):
        net = random_network(14, Scenario(links=4, tx=2, rx=2,
                                          interference_scale=5.0))
        res = solve(net, cfg=SolverConfig(max_iters=3, obj_tol=1e-15,
                                          kkt_tol=1e-14))
        assert not res.converged
        assert res.termination == "max_iters"
        assert res.iterations == 3

    def test_infeasible_start_rejected(self):
        net = random_network(9, Scenario(links=2, tx=2, rx=2, total_power=1.0))
        with pytest.raises(SolverError):
            solve(net, sigma_init=[np.eye(2, dtype=complex) * 10] * 2)

    def test_default_start_interior(self):
        for mode in ("total", "perlink", "grouped"):
            net = random_network(2, Scenario(links=4, tx=2, rx=2,
                                             constraint_mode=mode, n_cells=2))
            usage = constraint_usage(net, default_initial_sigma(net))
            assert (usage <= 0.9 + 1e-12).all()
            assert usage.max() == pytest.approx(0.9, abs=1e-12)


class TestTrace:
    def test_csv_columns(self, tmp_path):
        net = random_network(15, Scenario(links=2, tx=2, rx=2,
                                          constraint_mode="perlink"))
        res = solve(net, cfg=SolverConfig(max_iters=5, kkt_tol=1e-15,
                                          obj_tol=1e-15))
        path = tmp_path / "trace.csv"
        res.trace.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == (
            "iter,objective_nats,lambda_scale,mu_0,mu_1,kkt_max_residual,wall_ms"
        )
        assert len(lines) == 1 + res.iterations
        # objective column round-trips bit-exactly through repr
        first = lines[1].split(",")
        assert float(first[1]) == res.trace.objective[0]

    def test_iterate_reports_ascent(self):
        net = random_network(16, Scenario(links=3, tx=2, rx=2))
        sigma = default_initial_sigma(net)
        out = iterate(net, sigma, SolverConfig())
        assert out.objective_after >= out.objective_before - 1e-10
        assert 0.0 < out.lam_scale <= 1.0 + 1e-8
