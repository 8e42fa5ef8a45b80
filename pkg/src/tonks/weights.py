"""Boundary weights of the ordering graph.

When two neighbouring particles in the ordered configuration
x_1 < ... < x_N meet at the k-th boundary (x_k = x_{k+1} = z), the
strong-coupling energy shift is controlled by

    gamma_k = N! * integral over the ordered free coordinates and z of
              (d Psi / d x_k at the coincidence)^2

where Psi is the free-fermion reference state.  Small particle numbers
(N <= 3) are integrated by adaptive composite Gauss-Legendre panels;
larger N uses stratified, sharded Monte Carlo with a deterministic
seeded reduction.  On the coincidence plane the two touching gradient
components are opposite, so the squared gradient equals the squared
half-jump of the derivative; both forms are available.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import ndtri

from .slater import SlaterState

_LEGGAUSS_CACHE: dict[int, tuple[np.ndarray, np.ndarray]] = {}


class ToleranceError(RuntimeError):
    """Requested integration tolerance was not reached; carries the best estimate."""

    def __init__(self, message: str, best: "BoundaryWeight"):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class BoundaryWeight:
    """One boundary weight with its estimated absolute error."""

    k: int
    value: float
    error: float
    method: str


@dataclass(frozen=True)
class IntegrationConfig:
    """Controls for the boundary-weight integrators.

    method is "auto" (quadrature up to N=3, Monte Carlo beyond),
    "quadrature", or "monte-carlo".  tol bounds the quadrature error
    estimate; mc_target, when set, bounds the Monte Carlo standard error.
    Monte Carlo work is split into a fixed number of shards so results
    are bit-identical for any thread count.
    """

    method: str = "auto"
    tol: float = 1e-10
    samples: int = 2_000_000
    seed: int = 0
    strata: int = 64
    shards: int = 16
    threads: int = 1
    mc_target: float | None = None
    max_doublings: int = 8
    panel_order: int = 16
    decay_eps: float = 1e-12
    form: str = "gradient"

    def __post_init__(self):
        if self.method not in ("auto", "quadrature", "monte-carlo"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.form not in ("gradient", "jump"):
            raise ValueError(f"unknown integrand form {self.form!r}")
        if self.samples < self.strata * self.shards:
            raise ValueError("need at least one sample per stratum and shard")
        if self.max_doublings < 1:
            raise ValueError("max_doublings must be at least 1")


def _gauss(order: int) -> tuple[np.ndarray, np.ndarray]:
    if order not in _LEGGAUSS_CACHE:
        _LEGGAUSS_CACHE[order] = leggauss(order)
    return _LEGGAUSS_CACHE[order]


def _panel_rule(lo: float, hi: float, panels: int, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on [lo, hi]."""
    x0, w0 = _gauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[1:] + edges[:-1])
    nodes = (mid[:, None] + half[:, None] * x0[None, :]).ravel()
    wts = (half[:, None] * w0[None, :]).ravel()
    return nodes, wts


def _coincidence_value(state: SlaterState, conf: np.ndarray, slot: np.ndarray, form: str) -> np.ndarray:
    """N! times the squared boundary derivative for ordered configurations.

    conf rows are ordered configurations whose 0-based slots (slot, slot+1)
    hold the coincident pair.
    """
    _, g = state.psi_grad(conf)
    rows = np.arange(conf.shape[0])
    if form == "gradient":
        gk = g[rows, slot]
    else:
        gk = 0.5 * (g[rows, slot] - g[rows, slot + 1])
    return math.factorial(state.n) * gk * gk


def _quad_value(state: SlaterState, k: int, radius: float, panels: int, order: int, form: str) -> float:
    """One composite-rule evaluation of gamma_k for N in {2, 3}."""
    n = state.n
    z, wz = _panel_rule(-radius, radius, panels, order)
    if n == 2:
        conf = np.column_stack([z, z])
        f = _coincidence_value(state, conf, np.zeros(len(z), dtype=int), form)
        return float(np.dot(wz, f))
    s, ws = _panel_rule(0.0, 1.0, panels, order)
    zz = np.repeat(z, len(s))
    ss = np.tile(s, len(z))
    ww = np.repeat(wz, len(s)) * np.tile(ws, len(z))
    if k == 1:
        y = zz + (radius - zz) * ss
        jac = radius - zz
        conf = np.column_stack([zz, zz, y])
        slot = np.zeros(len(zz), dtype=int)
    else:
        y = -radius + (zz + radius) * ss
        jac = zz + radius
        conf = np.column_stack([y, zz, zz])
        slot = np.ones(len(zz), dtype=int)
    f = _coincidence_value(state, conf, slot, form)
    return float(np.dot(ww, f * jac))


def _truncation_bound(state: SlaterState, k: int, radius: float, form: str) -> float:
    """Crude bound on the mass outside the integration box from edge probes.

    Probes the integrand along the domain boundary (pair at |z| = R, or
    free coordinate pinned at the box edge) and scales by the box measure.
    """
    n = state.n
    probes = np.linspace(-radius, radius, 17)
    if n == 2:
        z = np.array([-radius, radius])
        conf = np.column_stack([z, z])
        f = _coincidence_value(state, conf, np.zeros(2, dtype=int), form)
        return float(np.max(f)) * 2.0 * radius
    if k == 1:
        conf = np.vstack([
            np.column_stack([probes, probes, np.full_like(probes, radius)]),
            np.column_stack([np.full_like(probes, -radius), np.full_like(probes, -radius), probes]),
        ])
        slots = np.zeros(conf.shape[0], dtype=int)
    else:
        conf = np.vstack([
            np.column_stack([np.full_like(probes, -radius), probes, probes]),
            np.column_stack([probes, np.full_like(probes, radius), np.full_like(probes, radius)]),
        ])
        slots = np.ones(conf.shape[0], dtype=int)
    f = _coincidence_value(state, conf, slots, form)
    return float(np.max(f)) * (2.0 * radius) ** 2


def _quad_gamma(state: SlaterState, k: int, cfg: IntegrationConfig) -> BoundaryWeight:
    if state.n > 3:
        raise ValueError("quadrature boundary weights support at most 3 particles; use Monte Carlo")
    radius = state.basis.decay_radius(state.occupation, eps=cfg.decay_eps)
    panels = 4
    prev = _quad_value(state, k, radius, panels, cfg.panel_order, cfg.form)
    trunc = _truncation_bound(state, k, radius, cfg.form)
    best = None
    for _ in range(cfg.max_doublings):
        panels *= 2
        cur = _quad_value(state, k, radius, panels, cfg.panel_order, cfg.form)
        err = abs(cur - prev) + trunc
        best = BoundaryWeight(k=k, value=cur, error=err, method="quadrature")
        if err <= cfg.tol:
            return best
        prev = cur
    raise ToleranceError(
        f"quadrature for boundary {k} reached error {best.error:.3e} "
        f"after {panels} panels, above tol {cfg.tol:.1e}",
        best,
    )


def _mc_shard_counts(cfg: IntegrationConfig) -> list[int]:
    per_stratum = cfg.samples // cfg.strata
    base = per_stratum // cfg.shards
    extra = per_stratum % cfg.shards
    return [base + (1 if r < extra else 0) for r in range(cfg.shards)]


def _mc_shard(state: SlaterState, cfg: IntegrationConfig, seed_seq, count: int,
              sigma_z: float, sigma_w: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-stratum, per-boundary (sum, sumsq) accumulated over one shard."""
    n = state.n
    rng = np.random.default_rng(seed_seq)
    nb = n - 1
    sums = np.zeros((cfg.strata, nb))
    sumsq = np.zeros((cfg.strata, nb))
    fact = 1.0 / math.factorial(n - 2)
    for s in range(cfg.strata):
        u = rng.random(count)
        z = sigma_z * ndtri((s + u) / cfg.strata)
        w = rng.normal(0.0, sigma_w, size=(count, n - 2))
        jcount = np.sum(w < z[:, None], axis=1)
        conf = np.concatenate([w, z[:, None], z[:, None]], axis=1)
        conf.sort(axis=1)
        f = _coincidence_value(state, conf, jcount, cfg.form)
        logq = -0.5 * (z / sigma_z) ** 2 - math.log(sigma_z * math.sqrt(2 * math.pi))
        logq = logq - 0.5 * np.sum((w / sigma_w) ** 2, axis=1) \
            - (n - 2) * math.log(sigma_w * math.sqrt(2 * math.pi))
        v = fact * f * np.exp(-logq)
        for k0 in range(nb):
            vk = np.where(jcount == k0, v, 0.0)
            sums[s, k0] += vk.sum()
            sumsq[s, k0] += np.dot(vk, vk)
    return sums, sumsq


def _mc_gammas(state: SlaterState, cfg: IntegrationConfig) -> list[BoundaryWeight]:
    """All boundary weights from one stratified stream.

    Each sample's ordered configuration selects exactly one boundary, so a
    single stream estimates every gamma_k at once.  The doubled coordinate
    is stratified through the normal inverse CDF; shards are reduced in a
    fixed order so results do not depend on the thread count.
    """
    n = state.n
    if n < 2:
        raise ValueError("Monte Carlo boundary weights need at least 2 particles")
    radius = state.basis.decay_radius(state.occupation, eps=1e-10)
    sigma_w = max(radius / 3.5, 0.5)
    sigma_z = sigma_w
    counts = _mc_shard_counts(cfg)
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.shards)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            parts = list(pool.map(
                lambda rc: _mc_shard(state, cfg, rc[1], rc[0], sigma_z, sigma_w),
                zip(counts, seqs),
            ))
    else:
        parts = [_mc_shard(state, cfg, sq, c, sigma_z, sigma_w) for c, sq in zip(counts, seqs)]
    nb = n - 1
    sums = np.zeros((cfg.strata, nb))
    sumsq = np.zeros((cfg.strata, nb))
    for ps, pq in parts:
        sums += ps
        sumsq += pq
    per_stratum = sum(counts)
    mean = sums.sum(axis=0) / (cfg.strata * per_stratum)
    var_s = (sumsq - sums**2 / per_stratum) / (per_stratum - 1)
    sem = np.sqrt(np.sum(var_s, axis=0) / (cfg.strata**2 * per_stratum))
    out = []
    for k0 in range(nb):
        bw = BoundaryWeight(k=k0 + 1, value=float(mean[k0]), error=float(sem[k0]),
                            method="monte-carlo")
        if cfg.mc_target is not None and bw.error > cfg.mc_target:
            raise ToleranceError(
                f"Monte Carlo standard error {bw.error:.3e} for boundary {bw.k} "
                f"is above the requested target {cfg.mc_target:.1e}",
                bw,
            )
        out.append(bw)
    return out


def _resolve_method(state: SlaterState, cfg: IntegrationConfig) -> str:
    if cfg.method == "auto":
        return "quadrature" if state.n <= 3 else "monte-carlo"
    return cfg.method


def gamma(state: SlaterState, k: int, config: IntegrationConfig | None = None) -> BoundaryWeight:
    """The boundary weight gamma_k of a reference state, with error estimate."""
    cfg = config or IntegrationConfig()
    n = state.n
    if not 1 <= k <= n - 1:
        raise ValueError(f"boundary index {k} outside 1..{n - 1}")
    if _resolve_method(state, cfg) == "quadrature":
        return _quad_gamma(state, k, cfg)
    return _mc_gammas(state, cfg)[k - 1]


def all_gammas(state: SlaterState, config: IntegrationConfig | None = None,
               use_parity: bool | None = None) -> list[BoundaryWeight]:
    """All boundary weights gamma_1..gamma_{N-1}.

    For a parity-symmetric trap gamma_k equals gamma_{N-k}; with
    use_parity (defaulting to the basis symmetry flag) the quadrature
    path computes only the lower half and mirrors the rest.  The Monte
    Carlo path estimates every boundary from one stream regardless.
    """
    cfg = config or IntegrationConfig()
    n = state.n
    parity = bool(getattr(state.basis, "symmetric", False)) if use_parity is None else use_parity
    if _resolve_method(state, cfg) == "monte-carlo":
        return _mc_gammas(state, cfg)
    out: list[BoundaryWeight | None] = [None] * (n - 1)
    for k in range(1, n):
        mirror = n - k
        if parity and out[mirror - 1] is not None:
            src = out[mirror - 1]
            out[k - 1] = replace(src, k=k)
        else:
            out[k - 1] = _quad_gamma(state, k, cfg)
    return out
