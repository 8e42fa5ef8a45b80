"""Strong-coupling spectra and adiabatic sector wavefunctions.

Diagonalizing the weighted ordering Laplacian gives the slope
coefficients K_j of the large-coupling expansion

    E_j(g) = E_free - K_j / g + O(1/g^2),

one per admissible amplitude vector.  An amplitude vector a assembles a
full wavefunction by scaling the reference determinant sector by
sector: Psi(x) = a_sigma(x) Psi_ref(x), where sigma(x) is the ordering
of the coordinates.  The uniform vector leaves the determinant
untouched (slope zero); the alternating-sign vector builds the
node-free profile that tracks the bosonic branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import eigh

from .sectors import SectorGraph, build_graph
from .slater import SlaterState


@dataclass(frozen=True)
class KSpectrum:
    """Eigenvalues and eigenvectors of a weighted ordering Laplacian.

    values ascend; vectors holds the matching orthonormal columns;
    groups collects index tuples of states degenerate within tol.
    classify() fills labels (one per group) and retained (dimension of
    each group surviving the graph's component projection).
    """

    values: np.ndarray
    vectors: np.ndarray = field(repr=False)
    groups: tuple[tuple[int, ...], ...]
    tol: float
    labels: tuple[str, ...] | None = None
    retained: tuple[int, ...] | None = None

    @property
    def n_states(self) -> int:
        return len(self.values)

    def group_projector(self, gi: int) -> np.ndarray:
        """Orthogonal projector onto the gi-th degenerate subspace."""
        v = self.vectors[:, list(self.groups[gi])]
        return v @ v.T


def solve(lap: np.ndarray, degeneracy_tol: float | None = None) -> KSpectrum:
    """Full spectrum of a (projected or full) ordering Laplacian."""
    lap = np.asarray(lap, dtype=float)
    if lap.ndim != 2 or lap.shape[0] != lap.shape[1]:
        raise ValueError("laplacian must be square")
    asym = np.max(np.abs(lap - lap.T)) if lap.size else 0.0
    scale = max(1.0, float(np.max(np.abs(lap))) if lap.size else 1.0)
    if asym > 1e-12 * scale:
        raise ValueError(f"laplacian is not symmetric (asymmetry {asym:.3e})")
    vals, vecs = eigh(lap)
    tol = degeneracy_tol if degeneracy_tol is not None else 1e-8 * scale
    groups = []
    start = 0
    for i in range(1, len(vals) + 1):
        if i == len(vals) or vals[i] - vals[i - 1] > tol:
            groups.append(tuple(range(start, i)))
            start = i
    # Deterministic signs: largest-magnitude component of each vector positive.
    for j in range(vecs.shape[1]):
        lead = int(np.argmax(np.abs(vecs[:, j])))
        if vecs[lead, j] < 0:
            vecs[:, j] = -vecs[:, j]
    return KSpectrum(values=vals, vectors=vecs, groups=tuple(groups), tol=tol)


def classify(spectrum: KSpectrum, graph: SectorGraph) -> KSpectrum:
    """Label degenerate groups by exchange character.

    "uniform" marks the group holding the constant amplitude vector
    (the reference determinant itself, slope zero); "alternating" the
    sign-of-ordering vector (bosonic branch, maximal slope); all other
    groups are "mixed".  retained counts the dimensions of each group
    surviving the graph's component projection.
    """
    m = graph.n_nodes
    if spectrum.vectors.shape[0] != m:
        raise ValueError("spectrum was not computed on this graph's full Laplacian")
    ones = np.full(m, 1.0 / math.sqrt(m))
    alt = graph.signs / math.sqrt(m)
    proj = graph.projection_matrix()
    labels = []
    retained = []
    for gi, idx in enumerate(spectrum.groups):
        v = spectrum.vectors[:, list(idx)]
        w_ones = float(np.linalg.norm(v.T @ ones))
        w_alt = float(np.linalg.norm(v.T @ alt))
        if w_ones > 1.0 - 1e-8:
            labels.append("uniform")
        elif w_alt > 1.0 - 1e-8:
            labels.append("alternating")
        else:
            labels.append("mixed")
        sv = np.linalg.svd(proj.T @ v, compute_uv=False) if proj.size else np.array([])
        retained.append(int(np.sum(sv > 1e-8)))
    return replace(spectrum, labels=tuple(labels), retained=tuple(retained))


@dataclass(frozen=True)
class EnergyExpansion:
    """Large-coupling energy law E(g) = e_free - slope_k / g."""

    e_free: float
    slope_k: float

    def __call__(self, g) -> np.ndarray:
        g = np.asarray(g, dtype=float)
        if np.any(g <= 0):
            raise ValueError("the expansion holds for repulsive coupling g > 0")
        return self.e_free - self.slope_k / g

    def derivative(self, g) -> np.ndarray:
        """dE/dg, the contact slope of this branch."""
        g = np.asarray(g, dtype=float)
        if np.any(g <= 0):
            raise ValueError("the expansion holds for repulsive coupling g > 0")
        return self.slope_k / g**2


def expansion(state: SlaterState, spectrum: KSpectrum) -> list[EnergyExpansion]:
    """One energy law per Laplacian eigenvalue, anchored at the state's free energy."""
    return [EnergyExpansion(e_free=state.energy, slope_k=float(k)) for k in spectrum.values]


def _lehmer_rank(perm_rows: np.ndarray) -> np.ndarray:
    """Lexicographic rank of each permutation row of 0..n-1."""
    _, n = perm_rows.shape
    ranks = np.zeros(perm_rows.shape[0], dtype=np.int64)
    for i in range(n - 1):
        c = np.sum(perm_rows[:, i + 1 :] < perm_rows[:, [i]], axis=1)
        ranks += c * math.factorial(n - 1 - i)
    return ranks


class SectorWavefunction:
    """Adiabatic wavefunction assembled from sector amplitudes.

    amplitudes are indexed by the lexicographic node order of the
    ordering graph; normalize rescales them so the assembled state has
    unit norm (each sector carries 1/N! of the reference norm).
    """

    def __init__(self, state: SlaterState, amplitudes, normalize: bool = True):
        self.state = state
        n = state.n
        a = np.asarray(amplitudes, dtype=float).copy()
        if a.shape != (math.factorial(n),):
            raise ValueError(
                f"need {math.factorial(n)} amplitudes for {n} particles, got shape {a.shape}"
            )
        total = float(np.sum(a * a)) / math.factorial(n)
        if total <= 0:
            raise ValueError("amplitudes must not vanish identically")
        if normalize:
            a = a / math.sqrt(total)
        self.amplitudes = a
        self._graph = build_graph(n)

    def sector_index(self, x) -> np.ndarray:
        """Canonical node index of the ordering sector containing each configuration."""
        x = np.asarray(x, dtype=float)
        flat = x.reshape(-1, self.state.n)
        perm = np.argsort(flat, axis=1, kind="stable")
        return _lehmer_rank(perm).reshape(x.shape[:-1])

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        idx = self.sector_index(x)
        return self.amplitudes[idx] * self.state.psi(x)

    def sector_probabilities(self) -> np.ndarray:
        """Probability of finding the system in each ordering sector."""
        p = self.amplitudes**2 / math.factorial(self.state.n)
        return p / p.sum()

    def one_body_density(self, grid: np.ndarray, samples: int = 200_000,
                         seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
        """Seeded Monte Carlo one-body density histogram on a bin-edge grid.

        Returns (per-particle densities, total density), with the total
        normalized to the particle number.  Importance samples a product
        normal sized to the occupied orbitals and self-normalizes.
        """
        grid = np.asarray(grid, dtype=float)
        if grid.ndim != 1 or len(grid) < 2 or np.any(np.diff(grid) <= 0):
            raise ValueError("grid must be an increasing array of bin edges")
        n = self.state.n
        radius = self.state.basis.decay_radius(self.state.occupation, eps=1e-10)
        sigma = max(radius / 3.0, 0.5)
        rng = np.random.default_rng(seed)
        x = rng.normal(0.0, sigma, size=(samples, n))
        logq = -0.5 * np.sum((x / sigma) ** 2, axis=1) - n * math.log(sigma * math.sqrt(2 * math.pi))
        psi = self(x)
        wgt = psi**2 * np.exp(-logq)
        total_w = float(np.sum(wgt))
        if total_w <= 0:
            raise RuntimeError("all sampled configurations fell outside the state's support")
        widths = np.diff(grid)
        per = np.zeros((n, len(grid) - 1))
        for i in range(n):
            hist, _ = np.histogram(x[:, i], bins=grid, weights=wgt)
            per[i] = hist / (total_w * widths)
        return per, per.sum(axis=0)
