"""Interference-network data model, rate evaluation, and scenario generation.

A `Network` is a set of MIMO links (transmitter with n_l antennas, receiver
with m_l antennas), a full matrix of channel gains H[l][k] of shape
(m_l, n_k) from transmitter k to receiver l, positive per-link weights, and
one or more linear power-covariance constraint groups: for each group s with
member set L^s and shaping matrices Q_l^s (Hermitian positive definite),

    sum_{l in L^s} trace(Sigma_l Q_l^s) <= 1.

Noise covariance at every receiver is the identity. All rates are in nats.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import matops
from .matops import hermitize

NETWORK_FORMAT = "mimo-interference-network"
NETWORK_FORMAT_VERSION = 1


class NetworkValidationError(ValueError):
    """Network structure violates a shape or constraint-group invariant."""


@dataclass(frozen=True)
class Link:
    """One transmitter-receiver pair: n_l transmit and m_l receive antennas."""

    tx_antennas: int
    rx_antennas: int

    def __post_init__(self):
        if self.tx_antennas < 1 or self.rx_antennas < 1:
            raise NetworkValidationError("antenna counts must be positive")


@dataclass
class ConstraintGroup:
    """A shared trace constraint over a set of links.

    `shaping[l]` is the n_l x n_l Hermitian PD matrix Q_l^s for each member l.
    """

    members: tuple[int, ...]
    shaping: dict[int, np.ndarray]

    def __post_init__(self):
        self.members = tuple(self.members)
        if not self.members:
            raise NetworkValidationError("constraint group must be nonempty")
        if set(self.members) != set(self.shaping):
            raise NetworkValidationError("shaping matrices must match member set")


@dataclass
class Network:
    """Immutable-by-convention interference network instance."""

    links: list[Link]
    channels: list[list[np.ndarray]]  # channels[l][k]: (m_l, n_k)
    weights: np.ndarray
    groups: list[ConstraintGroup]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=float)
        nl = len(self.links)
        if self.weights.shape != (nl,) or np.any(self.weights <= 0):
            raise NetworkValidationError("need one positive weight per link")
        if len(self.channels) != nl:
            raise NetworkValidationError("need one channel row per link")
        for l, row in enumerate(self.channels):
            if len(row) != nl:
                raise NetworkValidationError("channel matrix table must be square")
            for k, h in enumerate(row):
                expect = (self.links[l].rx_antennas, self.links[k].tx_antennas)
                if h.shape != expect:
                    raise NetworkValidationError(
                        f"channel ({l},{k}) has shape {h.shape}, expected {expect}"
                    )
        covered = set()
        for g in self.groups:
            for l in g.members:
                if l < 0 or l >= nl:
                    raise NetworkValidationError(f"group member {l} out of range")
                q = g.shaping[l]
                n = self.links[l].tx_antennas
                if q.shape != (n, n):
                    raise NetworkValidationError(
                        f"shaping matrix for link {l} has shape {q.shape}"
                    )
                w = np.linalg.eigvalsh(hermitize(q))
                if w[0] <= 0:
                    raise NetworkValidationError(
                        f"shaping matrix for link {l} is not positive definite"
                    )
                covered.add(l)
        if covered != set(range(nl)):
            raise NetworkValidationError("constraint groups must cover every link")

    @property
    def n_links(self) -> int:
        return len(self.links)

    def h(self, l: int, k: int) -> np.ndarray:
        return self.channels[l][k]

    def groups_of_link(self, l: int) -> list[int]:
        return [s for s, g in enumerate(self.groups) if l in g.members]


def interference_plus_noise(net: Network, sigma: list[np.ndarray]) -> list[np.ndarray]:
    """Per-receiver interference-plus-noise covariances.

    Omega_l = I + sum_{k != l} H_lk Sigma_k H_lk^H, hermitized. With PSD
    inputs every Omega_l dominates the identity.
    """
    _check_sigma_shapes(net, sigma)
    omegas = []
    for l in range(net.n_links):
        omega = np.eye(net.links[l].rx_antennas, dtype=complex)
        for k in range(net.n_links):
            if k == l:
                continue
            h = net.h(l, k)
            omega = omega + h @ sigma[k] @ h.conj().T
        omegas.append(hermitize(omega))
    return omegas


def achievable_rate(
    net: Network,
    sigma: list[np.ndarray],
    l: int,
    rank_tol: float = matops.DEFAULT_RANK_TOL,
) -> float:
    """Rate of link l (nats) treating other links' signals as noise."""
    omega = interference_plus_noise(net, sigma)[l]
    h = net.h(l, l)
    signal = hermitize(h @ sigma[l] @ h.conj().T)
    return matops.ext_logdet_diff(signal, omega, rank_tol)


def weighted_sum_rate(
    net: Network,
    sigma: list[np.ndarray],
    rank_tol: float = matops.DEFAULT_RANK_TOL,
) -> float:
    """Objective value sum_l w_l R_l (nats) at consistent interference."""
    omegas = interference_plus_noise(net, sigma)
    return objective_value(net, sigma, omegas, rank_tol)


def objective_value(
    net: Network,
    sigma: list[np.ndarray],
    omegas: list[np.ndarray],
    rank_tol: float = matops.DEFAULT_RANK_TOL,
) -> float:
    """Max-min objective sum_l w_l (log|Omega_l + H Sigma H^H| - log|Omega_l|).

    Equals `weighted_sum_rate` when the omegas are the consistent
    interference-plus-noise covariances.
    """
    total = 0.0
    for l in range(net.n_links):
        h = net.h(l, l)
        signal = hermitize(h @ sigma[l] @ h.conj().T)
        total += net.weights[l] * matops.ext_logdet_diff(signal, omegas[l], rank_tol)
    return float(total)


def constraint_usage(net: Network, sigma: list[np.ndarray]) -> np.ndarray:
    """Per-group trace sums sum_{l in L^s} trace(Sigma_l Q_l^s), as reals."""
    _check_sigma_shapes(net, sigma)
    usage = np.zeros(len(net.groups))
    for s, g in enumerate(net.groups):
        usage[s] = sum(
            float(np.trace(sigma[l] @ g.shaping[l]).real) for l in g.members
        )
    return usage


def _check_sigma_shapes(net: Network, sigma) -> None:
    if len(sigma) != net.n_links:
        raise NetworkValidationError("need one covariance per link")
    for l, s in enumerate(sigma):
        n = net.links[l].tx_antennas
        if s.shape != (n, n):
            raise NetworkValidationError(
                f"covariance for link {l} has shape {s.shape}, expected {(n, n)}"
            )


# ---------------------------------------------------------------------------
# scenario generation


@dataclass
class Scenario:
    """Parameters for random network generation.

    constraint_mode is one of "total" (single group, Q = I / total_power),
    "perlink" (one singleton group per link, Q = I / P_l), or "grouped"
    (links partitioned into `n_cells` equal cells sharing a budget each).
    Direct channels are unscaled; cross channels are multiplied by
    `interference_scale`.
    """

    links: int = 10
    tx: int = 3
    rx: int = 4
    interference_scale: float = 1.0
    weight_range: tuple[float, float] = (0.5, 1.0)
    constraint_mode: str = "total"
    total_power: float = 10.0
    perlink_power_choices: tuple[float, ...] = tuple(range(1, 11))
    n_cells: int = 2

    def validate(self):
        if self.links < 1 or self.tx < 1 or self.rx < 1:
            raise NetworkValidationError("scenario dimensions must be positive")
        if self.interference_scale < 0:
            raise NetworkValidationError("interference_scale must be >= 0")
        lo, hi = self.weight_range
        if not (0 < lo <= hi):
            raise NetworkValidationError("weight_range must be positive and ordered")
        if self.constraint_mode not in ("total", "perlink", "grouped"):
            raise NetworkValidationError(
                f"unknown constraint_mode {self.constraint_mode!r}"
            )
        if self.total_power <= 0:
            raise NetworkValidationError("total_power must be positive")
        if self.constraint_mode == "grouped" and not (
            1 <= self.n_cells <= self.links
        ):
            raise NetworkValidationError("n_cells must be in [1, links]")

    def to_dict(self) -> dict:
        return {
            "links": self.links,
            "tx": self.tx,
            "rx": self.rx,
            "interference_scale": self.interference_scale,
            "weight_range": list(self.weight_range),
            "constraint_mode": self.constraint_mode,
            "total_power": self.total_power,
            "perlink_power_choices": list(self.perlink_power_choices),
            "n_cells": self.n_cells,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        sc = cls(
            links=int(d["links"]),
            tx=int(d["tx"]),
            rx=int(d["rx"]),
            interference_scale=float(d["interference_scale"]),
            weight_range=tuple(d["weight_range"]),
            constraint_mode=str(d["constraint_mode"]),
            total_power=float(d["total_power"]),
            perlink_power_choices=tuple(d.get("perlink_power_choices", range(1, 11))),
            n_cells=int(d.get("n_cells", 2)),
        )
        sc.validate()
        return sc


def _complex_gaussian(rng: np.random.Generator, m: int, n: int) -> np.ndarray:
    # unit variance per complex entry: (x + iy) / sqrt(2)
    return (rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))) / np.sqrt(2)


def random_network(seed: int, scenario: Scenario) -> Network:
    """Draw a network with i.i.d. complex Gaussian channels, deterministically.

    Cross channels (k != l) are scaled by scenario.interference_scale;
    weights are uniform on the weight range; per-link budgets are drawn
    uniformly from the configured choices.
    """
    scenario.validate()
    rng = np.random.default_rng(seed)
    nl = scenario.links
    links = [Link(scenario.tx, scenario.rx) for _ in range(nl)]
    channels = []
    for l in range(nl):
        row = []
        for k in range(nl):
            h = _complex_gaussian(rng, scenario.rx, scenario.tx)
            if k != l:
                h = scenario.interference_scale * h
            row.append(h)
        channels.append(row)
    lo, hi = scenario.weight_range
    weights = rng.uniform(lo, hi, size=nl)

    if scenario.constraint_mode == "total":
        q = {
            l: np.eye(scenario.tx, dtype=complex) / scenario.total_power
            for l in range(nl)
        }
        groups = [ConstraintGroup(tuple(range(nl)), q)]
        budgets = {"total_power": scenario.total_power}
    elif scenario.constraint_mode == "perlink":
        powers = rng.choice(np.asarray(scenario.perlink_power_choices, float), size=nl)
        groups = [
            ConstraintGroup((l,), {l: np.eye(scenario.tx, dtype=complex) / powers[l]})
            for l in range(nl)
        ]
        budgets = {"perlink_power": powers.tolist()}
    else:  # grouped: contiguous cells sharing a budget each
        powers = rng.choice(np.asarray(scenario.perlink_power_choices, float),
                            size=scenario.n_cells)
        cells = np.array_split(np.arange(nl), scenario.n_cells)
        groups = []
        for cell, p in zip(cells, powers):
            members = tuple(int(l) for l in cell)
            q = {l: np.eye(scenario.tx, dtype=complex) / p for l in members}
            groups.append(ConstraintGroup(members, q))
        budgets = {"cell_power": powers.tolist()}

    return Network(
        links=links,
        channels=channels,
        weights=weights,
        groups=groups,
        metadata={"seed": seed, "scenario": scenario.to_dict(), "budgets": budgets},
    )


# ---------------------------------------------------------------------------
# serialization


def _complex_matrix_to_lists(a: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in np.asarray(a)]


def _complex_matrix_from_lists(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def network_to_dict(net: Network) -> dict:
    """Self-describing document; complex entries as (re, im) float pairs."""
    return {
        "format": NETWORK_FORMAT,
        "version": NETWORK_FORMAT_VERSION,
        "links": [
            {"tx_antennas": lk.tx_antennas, "rx_antennas": lk.rx_antennas}
            for lk in net.links
        ],
        "weights": [float(w) for w in net.weights],
        "channels": [
            [_complex_matrix_to_lists(net.h(l, k)) for k in range(net.n_links)]
            for l in range(net.n_links)
        ],
        "groups": [
            {
                "members": list(g.members),
                "shaping": {str(l): _complex_matrix_to_lists(g.shaping[l])
                            for l in g.members},
            }
            for g in net.groups
        ],
        "metadata": net.metadata,
    }


def network_from_dict(d: dict) -> Network:
    if d.get("format") != NETWORK_FORMAT:
        raise NetworkValidationError(f"unrecognized document format {d.get('format')!r}")
    if d.get("version") != NETWORK_FORMAT_VERSION:
        raise NetworkValidationError(f"unsupported format version {d.get('version')!r}")
    links = [Link(lk["tx_antennas"], lk["rx_antennas"]) for lk in d["links"]]
    channels = [
        [_complex_matrix_from_lists(h) for h in row] for row in d["channels"]
    ]
    groups = [
        ConstraintGroup(
            tuple(g["members"]),
            {int(l): _complex_matrix_from_lists(q) for l, q in g["shaping"].items()},
        )
        for g in d["groups"]
    ]
    return Network(
        links=links,
        channels=channels,
        weights=np.asarray(d["weights"], dtype=float),
        groups=groups,
        metadata=d.get("metadata", {}),
    )


def save_network(net: Network, path) -> None:
    with open(path, "w") as f:
        json.dump(network_to_dict(net), f, indent=1)
        f.write("\n")


def load_network(path) -> Network:
    with open(path) as f:
        return network_from_dict(json.load(f))
