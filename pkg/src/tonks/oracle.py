"""Finite-coupling exact diagonalization for validating the strong-coupling law.

Few fermions with a contact interaction g * sum of delta(x_i - x_j) are
diagonalized in a truncated harmonic product basis.  Energies tracked
across couplings by eigenvector overlap are fitted against 1/g, and the
negated slopes are compared with the Laplacian eigenvalues K; the
interaction expectation of each tracked state doubles as the exact
dE/dg of the truncated model.  A transcendental two-body relation
provides an independent closed-form reference for N = 2.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh
from scipy.optimize import brentq, linear_sum_assignment
from scipy.sparse.linalg import LinearOperator, eigsh
from scipy.special import digamma
from scipy.special import gamma as gamma_fn
from scipy.stats import t as student_t

from .sectors import ComponentSpec
from .traps import _hermite_ladder

DELTA_MODE_CAP = 60
DENSE_DIM_CAP = 5000
BASIS_DIM_CAP = 200_000


def delta_tensor(n_modes: int) -> np.ndarray:
    """Four-orbital contact integrals of the harmonic basis.

    Entry [a,b,c,d] is the integral of phi_a phi_b phi_c phi_d over the
    line, evaluated by a Gauss-Hermite rule exact at the top polynomial
    degree.  Entries with odd index sum vanish by parity and are zeroed
    exactly.
    """
    if not 1 <= n_modes <= DELTA_MODE_CAP:
        raise ValueError(f"n_modes must be in 1..{DELTA_MODE_CAP}, got {n_modes}")
    m_nodes = 2 * n_modes + 3
    y, w = np.polynomial.hermite.hermgauss(m_nodes)
    x = y / math.sqrt(2.0)
    # The four orbital Gaussians supply exp(-y^2); fold it against the
    # rule weights in log space so large node values cannot overflow.
    wt = np.exp(np.log(w) + y * y) / math.sqrt(2.0)
    t = _hermite_ladder(x, n_modes - 1)
    pair = (t[:, None, :] * t[None, :, :]).reshape(n_modes * n_modes, m_nodes)
    i4 = (pair * wt) @ pair.T
    i4 = i4.reshape(n_modes, n_modes, n_modes, n_modes)
    par = np.arange(n_modes) % 2
    odd = (par[:, None, None, None] + par[None, :, None, None]
           + par[None, None, :, None] + par[None, None, None, :]) % 2 == 1
    i4[odd] = 0.0
    return i4


@dataclass(frozen=True)
class EDConfig:
    """Setup of an exact-diagonalization run.

    n_modes single-particle orbitals per particle, couplings g_values
    (positive, strictly increasing), n_states retained eigenpairs.
    components=None keeps the distinguishable product basis; a
    ComponentSpec antisymmetrizes each block of identical fermions.
    """

    n_particles: int
    n_modes: int
    g_values: tuple[float, ...]
    n_states: int = 8
    components: ComponentSpec | None = None

    def __post_init__(self):
        if self.n_particles not in (2, 3):
            raise ValueError("exact diagonalization supports 2 or 3 particles")
        if self.n_modes < self.n_particles + 2:
            raise ValueError(
                f"n_modes={self.n_modes} too small: need at least n_particles + 2"
            )
        if self.n_modes > DELTA_MODE_CAP:
            raise ValueError(f"n_modes exceeds cap {DELTA_MODE_CAP}")
        dim = self.n_modes**self.n_particles
        if dim > BASIS_DIM_CAP:
            raise ValueError(f"basis dimension {dim} exceeds cap {BASIS_DIM_CAP}")
        gs = tuple(float(g) for g in self.g_values)
        if len(gs) < 1 or any(g <= 0 for g in gs):
            raise ValueError("g_values must be positive")
        if any(b <= a for a, b in zip(gs, gs[1:])):
            raise ValueError("g_values must be strictly increasing")
        object.__setattr__(self, "g_values", gs)
        if self.n_states < 1:
            raise ValueError("n_states must be positive")
        if self.components is not None and self.components.n != self.n_particles:
            raise ValueError("component sizes must sum to n_particles")


@dataclass(frozen=True)
class EDResult:
    """Spectra of one EDConfig across its couplings.

    energies are sorted ascending per coupling; tracked reorders each row
    so that column j follows a single adiabatic state from the smallest
    coupling upward (matched by eigenvector overlap), with the matched
    overlaps in track_quality.  interaction holds the expectation of
    the bare contact operator in each tracked state, which equals dE/dg
    of the truncated model exactly.
    """

    config: EDConfig
    basis_dim: int
    energies: np.ndarray = field(repr=False)
    tracked: np.ndarray = field(repr=False)
    track_quality: np.ndarray = field(repr=False)
    interaction: np.ndarray = field(repr=False)


def _antisymmetrizer(n_modes: int, size: int) -> np.ndarray:
    """Isometry from ordered occupations to the antisymmetric block subspace."""
    if size == 1:
        return np.eye(n_modes)
    cols = list(itertools.combinations(range(n_modes), size))
    t = np.zeros((n_modes**size, len(cols)))
    scale = 1.0 / math.sqrt(math.factorial(size))
    for j, occ in enumerate(cols):
        for perm in itertools.permutations(range(size)):
            sign = 1
            for i in range(size):
                for k in range(i + 1, size):
                    if perm[i] > perm[k]:
                        sign = -sign
            idx = 0
            for slot in range(size):
                idx = idx * n_modes + occ[perm[slot]]
            t[idx, j] = sign * scale
    return t


def _component_map(cfg: EDConfig) -> np.ndarray | None:
    comp = cfg.components
    if comp is None or all(s == 1 for s in comp.sizes):
        return None
    t = None
    for s in comp.sizes:
        block = _antisymmetrizer(cfg.n_modes, s)
        t = block if t is None else np.kron(t, block)
    return t


class _ContactOperator:
    """Pairwise contact-interaction action on a 3-particle product state.

    Uses the Gauss-Hermite factorization of the contact integrals, so a
    matvec costs O(n_modes^3 * nodes) without any dense pair matrix.
    """

    def __init__(self, n_modes: int):
        m_nodes = 2 * n_modes + 3
        y, w = np.polynomial.hermite.hermgauss(m_nodes)
        x = y / math.sqrt(2.0)
        self.wt = np.exp(np.log(w) + y * y) / math.sqrt(2.0)
        self.t = _hermite_ladder(x, n_modes - 1)
        self.n = n_modes

    def _pair12(self, psi: np.ndarray) -> np.ndarray:
        t, wt = self.t, self.wt
        p = np.einsum("im,ijc->mjc", t, psi)
        b = np.einsum("jm,mjc->mc", t, p)
        return np.einsum("im,jm,mc->ijc", t, t, wt[:, None] * b)

    def apply(self, psi: np.ndarray) -> np.ndarray:
        n = self.n
        psi = psi.reshape(n, n, n)
        out = self._pair12(psi)
        out = out + self._pair12(psi.transpose(2, 0, 1)).transpose(1, 2, 0)
        out = out + self._pair12(psi.transpose(1, 2, 0)).transpose(2, 0, 1)
        return out.reshape(-1)


def _dense_interaction(cfg: EDConfig, i4: np.ndarray) -> np.ndarray:
    n = cfg.n_modes
    d = i4.reshape(n * n, n * n)
    if cfg.n_particles == 2:
        return d
    eye = np.eye(n)
    w = np.kron(d, eye)
    w += np.kron(eye, d)
    w += np.einsum("acdf,be->abcdef", i4, eye).reshape(n**3, n**3)
    return w


def diagonalize(cfg: EDConfig) -> EDResult:
    """Solve the truncated contact-interaction problem at every coupling.

    Dense symmetric diagonalization up to DENSE_DIM_CAP, a matrix-free
    Lanczos solve beyond (product basis only).  Eigenvectors are matched
    across couplings by maximal-overlap assignment starting from the
    smallest coupling.
    """
    n = cfg.n_modes
    npart = cfg.n_particles
    tmap = _component_map(cfg)
    e1 = np.arange(n) + 0.5
    h0 = e1
    for _ in range(npart - 1):
        h0 = np.add.outer(h0, e1).reshape(-1)
    dim_full = n**npart
    dim = dim_full if tmap is None else tmap.shape[1]
    if cfg.n_states > dim:
        raise ValueError(f"n_states={cfg.n_states} exceeds basis dimension {dim}")
    dense = dim <= DENSE_DIM_CAP
    i4 = delta_tensor(n)
    w_dense = None
    op = None
    if tmap is not None:
        w_full = _dense_interaction(cfg, i4)
        w_dense = tmap.T @ w_full @ tmap
        h0_red = tmap.T @ (h0[:, None] * tmap)
        offdiag = np.max(np.abs(h0_red - np.diag(np.diag(h0_red))))
        if offdiag > 1e-10:
            raise RuntimeError("component projection failed to commute with the trap term")
        h0 = np.diag(h0_red)
        if not dense:
            raise ValueError("component-projected bases above the dense cap are not supported")
    elif dense:
        w_dense = _dense_interaction(cfg, i4)
    else:
        if npart != 3:
            raise ValueError("matrix-free path covers 3 particles only")
        op = _ContactOperator(n)
    n_g = len(cfg.g_values)
    energies = np.empty((n_g, cfg.n_states))
    tracked = np.empty_like(energies)
    quality = np.ones_like(energies)
    inter = np.empty_like(energies)
    prev = None
    v0 = None
    for gi, g in enumerate(cfg.g_values):
        if dense:
            h = g * w_dense
            h[np.diag_indices_from(h)] += h0
            vals, vecs = eigh(h, subset_by_index=[0, cfg.n_states - 1])
        else:
            def matvec(x, _g=g):
                return h0 * x + _g * op.apply(x)
            lin = LinearOperator((dim, dim), matvec=matvec, dtype=float)
            if v0 is None:
                # Fixed seeded start keeps the Lanczos solve deterministic.
                v0 = np.random.default_rng(0).standard_normal(dim)
            # Buffer states and a wide Krylov basis so degenerate pairs
            # are resolved with full multiplicity.
            k_solve = min(cfg.n_states + 4, dim - 1)
            vals, vecs = eigsh(lin, k=k_solve, which="SA", v0=v0,
                               ncv=min(max(4 * k_solve, 80), dim), tol=0)
            order = np.argsort(vals)[: cfg.n_states]
            vals, vecs = vals[order], vecs[:, order]
        energies[gi] = vals
        if prev is None:
            tracked[gi] = vals
            perm = np.arange(cfg.n_states)
        else:
            overlap = np.abs(prev.T @ vecs)
            rows, cols = linear_sum_assignment(-overlap)
            perm = np.empty(cfg.n_states, dtype=int)
            perm[rows] = cols
            tracked[gi] = vals[perm]
            quality[gi] = overlap[np.arange(cfg.n_states), perm]
        vecs = vecs[:, perm]
        if w_dense is not None:
            wv = w_dense @ vecs
        else:
            wv = np.column_stack([op.apply(vecs[:, j]) for j in range(cfg.n_states)])
        inter[gi] = np.einsum("ij,ij->j", vecs, wv)
        prev = vecs
    return EDResult(
        config=cfg,
        basis_dim=dim,
        energies=energies,
        tracked=tracked,
        track_quality=quality,
        interaction=inter,
    )


@dataclass(frozen=True)
class SlopeFit:
    """Weighted fit of one tracked energy against 1/g.

    k_value is the negated slope; uncertainty combines the fit-residual
    half width (Student-t at 95%) with the shift under a basis reduced
    by four modes.
    """

    state_index: int
    k_value: float
    intercept: float
    residual_halfwidth: float
    truncation_shift: float

    @property
    def uncertainty(self) -> float:
        return self.residual_halfwidth + self.truncation_shift


def _weighted_slope(g: np.ndarray, e: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept and slope half-width of e vs 1/g, weights g^2."""
    x = 1.0 / g
    w = g**2
    xm = np.average(x, weights=w)
    em = np.average(e, weights=w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (e - em)) / sxx
    resid = e - em - slope * (x - xm)
    dof = len(g) - 2
    if dof > 0:
        s2 = np.sum(w * resid**2) / dof
        half = float(student_t.ppf(0.975, dof)) * math.sqrt(s2 / sxx)
    else:
        half = math.inf
    return float(slope), float(em - slope * xm), half


def slope_fit(result: EDResult, state_index: int,
              reduced: EDResult | None = None) -> SlopeFit:
    """Extract K for one tracked state, with an honest uncertainty.

    The energies demand at least three couplings.  When no reduced-basis
    result is supplied, the same configuration is rerun with four fewer
    modes to estimate the truncation contribution.
    """
    cfg = result.config
    if len(cfg.g_values) < 3:
        raise ValueError("slope fits need at least three couplings")
    if not 0 <= state_index < cfg.n_states:
        raise ValueError(f"state index {state_index} outside 0..{cfg.n_states - 1}")
    g = np.asarray(cfg.g_values)
    slope, intercept, half = _weighted_slope(g, result.tracked[:, state_index])
    if reduced is None:
        reduced = diagonalize(replace(cfg, n_modes=cfg.n_modes - 4))
    # Adiabatic tracking may order columns differently in the reduced
    # basis, so match by nearest fitted slope instead of column index.
    r_slopes = [_weighted_slope(g, reduced.tracked[:, j])[0]
                for j in range(reduced.tracked.shape[1])]
    r_slope = min(r_slopes, key=lambda s: abs(s - slope))
    return SlopeFit(
        state_index=state_index,
        k_value=-slope,
        intercept=intercept,
        residual_halfwidth=half,
        truncation_shift=abs(r_slope - slope),
    )


def _two_body_g(e_rel: float) -> float:
    """Coupling at which e_rel is a relative-motion eigenvalue."""
    a = 0.75 - 0.5 * e_rel
    b = 0.25 - 0.5 * e_rel
    return -2.0 * math.sqrt(2.0) * gamma_fn(a) / gamma_fn(b)


def two_body_reference(g: float, branch: int = 0) -> float:
    """Exact two-body total energy at coupling g from the transcendental relation.

    branch b counts the interacting even relative states upward; the
    centre of mass stays in its ground mode.  Each branch interpolates
    between its free value 2b + 1 at g = 0 and 2b + 2 at g = infinity.
    """
    if g <= 0:
        raise ValueError("the reference solves the repulsive branch g > 0")
    if branch < 0:
        raise ValueError("branch must be non-negative")
    lo = 2 * branch + 0.5 + 1e-9
    hi = 2 * branch + 1.5 - 1e-9
    e_rel = brentq(lambda e: _two_body_g(e) - g, lo, hi, xtol=1e-13, rtol=1e-15)
    return e_rel + 0.5


def two_body_slope(g: float, branch: int = 0) -> float:
    """g^2 dE/dg of the two-body reference: the running slope coefficient.

    Tends to the Laplacian eigenvalue 2 gamma of the interacting branch
    as g grows.
    """
    e_tot = two_body_reference(g, branch=branch)
    e_rel = e_tot - 0.5
    a = 0.75 - 0.5 * e_rel
    b = 0.25 - 0.5 * e_rel
    dg_de = _two_body_g(e_rel) * (-0.5) * (digamma(a) - digamma(b))
    return g**2 / dg_de
