"""The graph of spatial orderings and its weighted Laplacian.

Each node is a permutation sigma, read as "slot s of the ordered
configuration x_(1) < ... < x_(N) holds particle sigma_s".  Two
orderings are adjacent when they differ by swapping the particles in
neighbouring slots (k, k+1); that edge carries the boundary weight
gamma_k.  Strong-coupling amplitudes live on the nodes: an adiabatic
state is a_sigma times the reference determinant in sector sigma, and
its energy slope K is an eigenvalue of the graph Laplacian.

Exchange statistics enter through a component assignment: particles of
the same component are identical fermions, and admissible amplitude
vectors are invariant under relabeling them.  (In this amplitude
convention the reference determinant already carries the full
antisymmetry; the uniform vector reproduces it identically.)
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .weights import BoundaryWeight

GRAPH_PARTICLE_CAP = 8
DENSE_NODE_CAP = 720


@dataclass(frozen=True)
class ComponentSpec:
    """Partition of the particles into components of identical fermions.

    Particles are numbered 0..N-1; component c owns the consecutive
    block of sizes[c] labels.
    """

    sizes: tuple[int, ...]

    def __post_init__(self):
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ValueError(f"component sizes must be positive, got {self.sizes}")

    @staticmethod
    def distinguishable(n: int) -> "ComponentSpec":
        return ComponentSpec(sizes=(1,) * n)

    @staticmethod
    def identical(n: int) -> "ComponentSpec":
        return ComponentSpec(sizes=(n,))

    @staticmethod
    def parse(text: str) -> "ComponentSpec":
        try:
            sizes = tuple(int(p) for p in text.replace(" ", "").split(","))
        except ValueError as exc:
            raise ValueError(f"cannot parse component sizes from {text!r}") from exc
        return ComponentSpec(sizes=sizes)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    def generators(self) -> list[tuple[int, int]]:
        """Adjacent same-component label transpositions generating the relabeling group."""
        gens = []
        start = 0
        for s in self.sizes:
            for p in range(start, start + s - 1):
                gens.append((p, p + 1))
            start += s
        return gens


def _perm_sign(p: tuple[int, ...]) -> int:
    sign = 1
    seen = [False] * len(p)
    for i in range(len(p)):
        if seen[i]:
            continue
        length = 0
        j = i
        while not seen[j]:
            seen[j] = True
            j = p[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


@dataclass(frozen=True)
class SectorGraph:
    """Ordering graph for n particles with a component assignment.

    perms lists the nodes in lexicographic order; edges rows are
    (node u, node v, 0-based slot) for each adjacent-slot swap; orbit
    maps each node to its relabeling orbit and carries the symmetry
    projection implicitly.
    """

    n: int
    components: ComponentSpec
    perms: tuple[tuple[int, ...], ...]
    edges: np.ndarray = field(repr=False)
    signs: np.ndarray = field(repr=False)
    orbit: np.ndarray = field(repr=False)
    orbit_sizes: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.perms)

    @property
    def n_orbits(self) -> int:
        return len(self.orbit_sizes)

    def index(self, perm) -> int:
        p = tuple(perm)
        lo, hi = 0, len(self.perms)
        while lo < hi:
            mid = (lo + hi) // 2
            if self.perms[mid] < p:
                lo = mid + 1
            else:
                hi = mid
        if lo == len(self.perms) or self.perms[lo] != p:
            raise KeyError(f"not a node of this graph: {p}")
        return lo

    def projection_matrix(self) -> np.ndarray:
        """Dense orthonormal basis of relabeling-invariant amplitude vectors.

        Column j is the normalized indicator of orbit j.
        """
        p = np.zeros((self.n_nodes, self.n_orbits))
        amp = 1.0 / np.sqrt(self.orbit_sizes.astype(float))
        p[np.arange(self.n_nodes), self.orbit] = amp[self.orbit]
        return p


def build_graph(n: int, components: ComponentSpec | None = None) -> SectorGraph:
    """Enumerate the ordering graph for n particles.

    Node count grows as n!, so n is capped at GRAPH_PARTICLE_CAP.
    """
    if n < 2:
        raise ValueError("the ordering graph needs at least 2 particles")
    if n > GRAPH_PARTICLE_CAP:
        raise ValueError(f"n={n} exceeds the graph cap of {GRAPH_PARTICLE_CAP} particles")
    comp = components or ComponentSpec.distinguishable(n)
    if comp.n != n:
        raise ValueError(f"component sizes {comp.sizes} sum to {comp.n}, expected {n}")
    perms = tuple(itertools.permutations(range(n)))
    index = {p: i for i, p in enumerate(perms)}
    edges = []
    for u, p in enumerate(perms):
        for s in range(n - 1):
            q = list(p)
            q[s], q[s + 1] = q[s + 1], q[s]
            v = index[tuple(q)]
            if u < v:
                edges.append((u, v, s))
    edges_arr = np.array(edges, dtype=np.int64)
    signs = np.array([_perm_sign(p) for p in perms], dtype=np.int64)
    # Orbits of the relabeling action pi . sigma = (pi(sigma_1), ..., pi(sigma_N)).
    gens = comp.generators()
    orbit = np.full(len(perms), -1, dtype=np.int64)
    n_orbits = 0
    for start in range(len(perms)):
        if orbit[start] >= 0:
            continue
        stack = [start]
        orbit[start] = n_orbits
        while stack:
            u = stack.pop()
            p = perms[u]
            for a, b in gens:
                q = tuple(b if e == a else a if e == b else e for e in p)
                v = index[q]
                if orbit[v] < 0:
                    orbit[v] = n_orbits
                    stack.append(v)
        n_orbits += 1
    sizes = np.bincount(orbit, minlength=n_orbits)
    return SectorGraph(
        n=n,
        components=comp,
        perms=perms,
        edges=edges_arr,
        signs=signs,
        orbit=orbit,
        orbit_sizes=sizes,
    )


def _weight_array(graph: SectorGraph, gammas) -> np.ndarray:
    """Normalize weights to an array indexed by 0-based slot."""
    n = graph.n
    if isinstance(gammas, dict):
        vals = [gammas[k] for k in range(1, n)]
    else:
        items = list(gammas)
        if items and isinstance(items[0], BoundaryWeight):
            by_k = {bw.k: bw.value for bw in items}
            vals = [by_k[k] for k in range(1, n)]
        else:
            vals = [float(v) for v in items]
    arr = np.asarray(vals, dtype=float)
    if arr.shape != (n - 1,):
        raise ValueError(f"need {n - 1} boundary weights, got shape {arr.shape}")
    if np.any(arr < 0):
        raise ValueError("boundary weights must be non-negative")
    return arr


def laplacian(graph: SectorGraph, gammas) -> np.ndarray:
    """Dense weighted graph Laplacian over all n! orderings."""
    if graph.n_nodes > DENSE_NODE_CAP:
        raise ValueError(
            f"{graph.n_nodes} nodes is too large for a dense Laplacian; "
            "use projected_laplacian with a component assignment"
        )
    w = _weight_array(graph, gammas)
    m = graph.n_nodes
    lap = np.zeros((m, m))
    u, v, s = graph.edges.T
    g = w[s]
    np.add.at(lap, (u, u), g)
    np.add.at(lap, (v, v), g)
    np.subtract.at(lap, (u, v), g)
    np.subtract.at(lap, (v, u), g)
    return lap


def projected_laplacian(graph: SectorGraph, gammas) -> np.ndarray:
    """Laplacian restricted to relabeling-invariant amplitudes.

    Assembled edge by edge in the orbit basis, so the full n! x n!
    matrix is never formed.
    """
    w = _weight_array(graph, gammas)
    d = graph.n_orbits
    amp = 1.0 / np.sqrt(graph.orbit_sizes.astype(float))
    lap = np.zeros((d, d))
    u, v, s = graph.edges.T
    ou = graph.orbit[u]
    ov = graph.orbit[v]
    g = w[s]
    same = ou == ov
    diff = ~same
    # Same-orbit edges: (P_u - P_v) vanishes since orbit amplitudes are equal.
    np.add.at(lap, (ou[diff], ou[diff]), g[diff] * amp[ou[diff]] ** 2)
    np.add.at(lap, (ov[diff], ov[diff]), g[diff] * amp[ov[diff]] ** 2)
    cross = g[diff] * amp[ou[diff]] * amp[ov[diff]]
    np.subtract.at(lap, (ou[diff], ov[diff]), cross)
    np.subtract.at(lap, (ov[diff], ou[diff]), cross)
    return lap


def trace_identity_gap(graph: SectorGraph, gammas) -> float:
    """Relative gap between the Laplacian trace and n! * sum of weights.

    Accumulates the weighted degree of every node, which must cover each
    boundary exactly once.
    """
    w = _weight_array(graph, gammas)
    m = graph.n_nodes
    expected = m * float(np.sum(w))
    u, v, s = graph.edges.T
    g = w[s]
    diag = np.bincount(u, weights=g, minlength=m) + np.bincount(v, weights=g, minlength=m)
    return abs(float(diag.sum()) - expected) / max(abs(expected), 1.0)


def cycle_ordering(graph: SectorGraph) -> np.ndarray:
    """Hexagon tour for n=3: canonical node indices in cycle order.

    Starts at the ordering (2,1,3) (1-based particle labels) and walks
    the six sectors by alternating the upper (k=2) and lower (k=1)
    boundary swaps.
    """
    if graph.n != 3:
        raise ValueError("the cycle ordering is defined for n=3 only")
    cur = (1, 0, 2)
    order = [graph.index(cur)]
    slot = 1
    for _ in range(5):
        q = list(cur)
        q[slot], q[slot + 1] = q[slot + 1], q[slot]
        cur = tuple(q)
        order.append(graph.index(cur))
        slot = 1 - slot
    return np.array(order, dtype=np.int64)


def dump_edges(graph: SectorGraph, gammas) -> str:
    """Edge list as text: one line per edge, 'sigma tau k gamma_k' with 1-based labels."""
    w = _weight_array(graph, gammas)
    lines = []
    for u, v, s in graph.edges:
        pu = ",".join(str(e + 1) for e in graph.perms[u])
        pv = ",".join(str(e + 1) for e in graph.perms[v])
        lines.append(f"{pu} {pv} {s + 1} {w[s]:.12g}")
    return "\n".join(lines) + "\n"
