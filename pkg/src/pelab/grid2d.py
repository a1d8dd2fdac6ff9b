"""Entanglement of the two-dimensional state phi* on a side x side grid.

phi* = (phi0 + phi1) / sqrt(2), where phi0 holds one copy of psi on every row
(indicator qubits all 0) and phi1 one copy on every column (indicator qubits
all 1). The two branches are cutwise orthogonal for every bipartition, so

    S(phi*_A) = (S(phi0_A) + S(phi1_A)) / 2 + 1,

and each branch is a product over rows (columns) of subset entropies of psi.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .entanglement import cut_entropy, superposed_entropy
from .numcore import DomainError, RefusalError, SeededRng
from .phasestate import StateVector

SIDE_LIMIT = 12
DIRECT_SIDE_LIMIT = 3


def snake_coords(i: int, side: int) -> tuple[int, int]:
    """Boustrophedon position: even rows run left to right, odd rows right to left."""
    if not 0 <= i < side * side:
        raise DomainError("index outside the grid")
    r, c = divmod(i, side)
    return (r, c) if r % 2 == 0 else (r, side - 1 - c)


def snake_index(r: int, c: int, side: int) -> int:
    return r * side + (c if r % 2 == 0 else side - 1 - c)


@dataclass(frozen=True)
class GridBipartition:
    side: int
    mask: np.ndarray  # bool (side, side), True = in A

    def __post_init__(self):
        m = np.asarray(self.mask, dtype=bool)
        if m.shape != (self.side, self.side):
            raise DomainError("mask shape does not match the grid")
        if m.all() or not m.any():
            raise DomainError("both sides of a bipartition must be nonempty")
        object.__setattr__(self, "mask", m)

    @property
    def size_a(self) -> int:
        return int(self.mask.sum())

    @property
    def size_b(self) -> int:
        return self.side * self.side - self.size_a


def area(bp: GridBipartition) -> int:
    """Number of A sites with at least one 4-neighbour in B."""
    m = bp.mask
    b = ~m
    touch = np.zeros_like(m)
    touch[1:, :] |= b[:-1, :]
    touch[:-1, :] |= b[1:, :]
    touch[:, 1:] |= b[:, :-1]
    touch[:, :-1] |= b[:, 1:]
    return int((m & touch).sum())


def subset_entropies(psi: StateVector) -> np.ndarray:
    """S(psi_A) for every subset A, indexed by bitmask (bit t = site t)."""
    if psi.n > SIDE_LIMIT:
        raise RefusalError(f"subset enumeration refused above {SIDE_LIMIT} sites")
    full = (1 << psi.n) - 1
    out = np.zeros(1 << psi.n)
    for mask in range(1, full):
        comp = full ^ mask
        if comp < mask:
            out[mask] = out[comp]
            continue
        out[mask] = cut_entropy(psi, [t for t in range(psi.n) if mask >> t & 1])
    return out


@dataclass
class GridState:
    side: int
    psi: StateVector

    def __post_init__(self):
        if self.psi.n != self.side:
            raise DomainError("psi must live on side sites")
        if self.side > SIDE_LIMIT:
            raise RefusalError(f"side above {SIDE_LIMIT} refused")
        self._table = None

    @property
    def table(self) -> np.ndarray:
        if self._table is None:
            self._table = subset_entropies(self.psi)
        return self._table


def _line_mask(bits) -> int:
    return sum(1 << t for t, v in enumerate(bits) if v)


def branch_entropies(gs: GridState, bp: GridBipartition) -> tuple[float, float]:
    """(S(phi0_A), S(phi1_A)): row copies and column copies."""
    t = gs.table
    s0 = sum(t[_line_mask(row)] for row in bp.mask)
    s1 = sum(t[_line_mask(col)] for col in bp.mask.T)
    return float(s0), float(s1)


def grid_entropy(gs: GridState, bp: GridBipartition) -> float:
    return superposed_entropy(*branch_entropies(gs, bp))


def phi_star(psi: StateVector) -> StateVector:
    """Full phi* on side^2 sites of dimension 2 d (indicator times content).

    Sites are row-major; copies of psi run left to right on rows and top to
    bottom on columns.
    """
    side, d = psi.n, psi.local_dim
    if side > DIRECT_SIDE_LIMIT:
        raise RefusalError("direct phi* construction refused above 3 x 3")
    n = side * side
    rows = psi.amplitudes
    for _ in range(side - 1):
        rows = np.kron(rows, psi.amplitudes)
    content0 = rows.reshape((d,) * n)
    # content1[col k, row t] -> reorder to row-major (row t, col k)
    cols = rows.reshape((d,) * n)
    perm = [k * side + t for t in range(side) for k in range(side)]
    content1 = cols.transpose(perm)
    full = np.zeros((2 * d,) * n, dtype=complex)
    full[(slice(0, d),) * n] += content0 / math.sqrt(2)
    full[(slice(d, 2 * d),) * n] += content1 / math.sqrt(2)
    return StateVector(n, full.reshape(-1), 2 * d)


def direct_grid_entropy(psi: StateVector, bp: GridBipartition) -> float:
    state = phi_star(psi)
    sites = [int(i) for i in np.flatnonzero(bp.mask.reshape(-1))]
    return cut_entropy(state, sites)


def beta_profile(psi: StateVector, table: np.ndarray | None = None) -> dict[int, float]:
    """beta(k) = min over |A| = k of S(psi_A) / k, for k = 1 .. n - 1."""
    t = subset_entropies(psi) if table is None else table
    best: dict[int, float] = {}
    for mask in range(1, (1 << psi.n) - 1):
        k = bin(mask).count("1")
        v = t[mask] / k
        if k not in best or v < best[k]:
            best[k] = float(v)
    return dict(sorted(best.items()))


def percolation_mask(side: int, rng: SeededRng) -> np.ndarray:
    while True:
        p = 0.15 + 0.7 * rng.random()
        m = rng.random((side, side)) < p
        if m.any() and not m.all():
            return m


def blob_mask(side: int, rng: SeededRng) -> np.ndarray:
    """Random connected region grown from a seed site."""
    target = 1 + int(rng.integers(0, side * side - 1))
    m = np.zeros((side, side), dtype=bool)
    r, c = int(rng.integers(0, side)), int(rng.integers(0, side))
    m[r, c] = True
    frontier = {(r, c)}
    while m.sum() < target:
        cand = sorted({
            (a + da, b + db)
            for a, b in frontier
            for da, db in ((1, 0), (-1, 0), (0, 1), (0, -1))
            if 0 <= a + da < side and 0 <= b + db < side and not m[a + da, b + db]
        })
        a, b = cand[int(rng.integers(0, len(cand)))]
        m[a, b] = True
        frontier.add((a, b))
    return m


def random_bipartitions(side: int, count: int, rng: SeededRng) -> list[GridBipartition]:
    """Alternating percolation masks and connected blobs."""
    out = []
    for i in range(count):
        m = percolation_mask(side, rng) if i % 2 == 0 else blob_mask(side, rng)
        out.append(GridBipartition(side, m))
    return out


DEFAULT_CONSTANTS = {"C1": 4.0, "C2": 0.5, "C3": 0.0}


def law_check(gs: GridState, mode: str, samples: int, rng: SeededRng, constants: dict | None = None) -> dict:
    """Area law (low) or volume law (high) on random bipartitions.

    low:  S <= C1 * Area(A) * (log2 side)^2
    high: S >= C2 * beta_min * min(|A|, |B|) - C3, where beta_min is the
          smallest beta(k) over k <= side / 2.
    worst_ratio is the largest S / bound (low) or smallest S / bound (high).
    """
    if mode not in ("low", "high"):
        raise DomainError(f"unknown mode {mode!r}")
    cst = dict(DEFAULT_CONSTANTS, **(constants or {}))
    beta = beta_profile(gs.psi, gs.table)
    beta_min = min(v for k, v in beta.items() if k <= gs.side // 2)
    passed, ratios = 0, []
    for bp in random_bipartitions(gs.side, samples, rng):
        s = grid_entropy(gs, bp)
        if mode == "low":
            bound = cst["C1"] * area(bp) * math.log2(gs.side) ** 2
            ok = s <= bound
        else:
            bound = cst["C2"] * beta_min * min(bp.size_a, bp.size_b) - cst["C3"]
            ok = s >= bound
        passed += ok
        ratios.append(s / bound if bound > 0 else math.inf)
    worst = max(ratios) if mode == "low" else min(ratios)
    return {
        "mode": mode,
        "samples": samples,
        "pass_rate": passed / samples if samples else 1.0,
        "worst_ratio": worst,
        "constants": {**cst, "beta_min": beta_min},
    }
