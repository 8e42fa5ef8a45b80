"""Free-fermion reference states built from trap orbitals.

The reference wavefunction for occupation (n_1 < ... < n_N) is the
normalized Slater determinant

    Psi(x_1..x_N) = det[ phi_{n_j}(x_i) ] / sqrt(N!)

with total energy the sum of the occupied orbital energies.  Values and
gradients are evaluated in batches through pivoted LU determinants, so
configurations with nearly coincident coordinates stay well conditioned.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

DET_CHUNK = 8192


@dataclass(frozen=True)
class SlaterState:
    """A filled set of trap orbitals and its determinant wavefunction."""

    basis: object = field(repr=False)
    occupation: tuple[int, ...]
    energy: float

    @property
    def n(self) -> int:
        return len(self.occupation)

    def _matrices(self, x: np.ndarray, with_grad: bool) -> tuple[np.ndarray, np.ndarray | None]:
        vals, ders = self.basis.eval_many(list(self.occupation), x.reshape(-1))
        n = self.n
        b = x.shape[0]
        # [batch, particle, orbital]
        m = vals.reshape(n, b, n).transpose(1, 2, 0)
        d = ders.reshape(n, b, n).transpose(1, 2, 0) if with_grad else None
        return m, d

    def psi(self, x) -> np.ndarray:
        """Wavefunction at configurations of shape (..., N)."""
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        flat = x.reshape(-1, self.n)
        out = np.empty(flat.shape[0])
        norm = 1.0 / math.sqrt(math.factorial(self.n))
        for lo in range(0, flat.shape[0], DET_CHUNK):
            chunk = flat[lo : lo + DET_CHUNK]
            m, _ = self._matrices(chunk, with_grad=False)
            out[lo : lo + DET_CHUNK] = np.linalg.det(m)
        return (norm * out).reshape(lead)

    def grad(self, x) -> np.ndarray:
        """Gradient with respect to every coordinate, shape (..., N)."""
        return self.psi_grad(np.asarray(x, dtype=float))[1]

    def psi_grad(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Wavefunction and gradient together, sharing orbital evaluations.

        The derivative against coordinate i is the determinant with row i
        replaced by orbital derivatives, which stays finite and accurate on
        the coincidence planes where the determinant itself vanishes.
        """
        x = np.asarray(x, dtype=float)
        lead = x.shape[:-1]
        n = self.n
        flat = x.reshape(-1, n)
        val = np.empty(flat.shape[0])
        grd = np.empty((flat.shape[0], n))
        norm = 1.0 / math.sqrt(math.factorial(n))
        for lo in range(0, flat.shape[0], DET_CHUNK):
            chunk = flat[lo : lo + DET_CHUNK]
            m, d = self._matrices(chunk, with_grad=True)
            val[lo : lo + DET_CHUNK] = np.linalg.det(m)
            for i in range(n):
                mi = m.copy()
                mi[:, i, :] = d[:, i, :]
                grd[lo : lo + DET_CHUNK, i] = np.linalg.det(mi)
        return (norm * val).reshape(lead), (norm * grd).reshape(lead + (n,))


def make_level(basis, n: int, level: int = 0, tie_tol: float = 1e-9) -> SlaterState:
    """The level-th excited free-fermion state of n particles in the trap.

    Occupations are ranked by total energy over a growing orbital pool;
    the pool is extended until no occupation involving an unexplored
    orbital could still undercut the requested level.  A tie at the
    requested level within tie_tol means the state is not unique and is
    rejected.
    """
    if n < 1:
        raise ValueError("need at least one particle")
    if level < 0:
        raise ValueError("level must be non-negative")
    cap = basis.cap
    if n - 1 > cap:
        raise ValueError(f"{n} particles do not fit in a basis capped at index {cap}")
    pool = min(cap, n + level)
    while True:
        energies = [basis.energy(m) for m in range(pool + 1)]
        ranked = sorted(
            (sum(energies[m] for m in occ), occ)
            for occ in itertools.combinations(range(pool + 1), n)
        )
        # Any occupation reaching past the pool costs at least floor_energy.
        floor_energy = sum(energies[: n - 1]) + basis.energy(pool + 1) if pool < cap else math.inf
        if len(ranked) > level + 1 and ranked[level + 1][0] < floor_energy - tie_tol:
            break
        if pool == cap:
            if len(ranked) <= level:
                raise ValueError(
                    f"level {level} needs orbitals beyond the basis cap (index {cap})"
                )
            break
        pool = min(cap, 2 * pool + 1)
    e_sel, occ_sel = ranked[level]
    neighbors = []
    if level > 0:
        neighbors.append(ranked[level - 1])
    if len(ranked) > level + 1:
        neighbors.append(ranked[level + 1])
    clashes = [occ for e, occ in neighbors if abs(e - e_sel) <= tie_tol]
    if math.isfinite(floor_energy) and floor_energy - e_sel <= tie_tol:
        clashes.append(tuple(range(n - 1)) + (pool + 1,))
    if clashes:
        listed = ", ".join(str(c) for c in [occ_sel, *clashes])
        raise ValueError(
            f"level {level} is degenerate: occupations {listed} share total energy "
            f"{e_sel:.12g} within {tie_tol:g}; pick a definite occupation by hand"
        )
    return SlaterState(basis=basis, occupation=occ_sel, energy=float(e_sel))
