"""History-state Hamiltonians built from clock-machine rule tables.

H = H_valid + H_transition + H_input acts on configurations of n + 2 sites.
Vectors are sparse maps configuration -> amplitude, so the exponentially
large site space is never materialized; verification runs on the span of
history vectors plus sampled invalid configurations.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as sla

from .grid2d import snake_coords
from .machine import (
    BLANK,
    LEFTEND,
    RIGHT,
    RIGHTEND,
    VISITED,
    Layout,
    MachineConfig,
    RuleSet,
    _allowed_pairs,
    build_clock_machine,
    initial_config,
    run_history,
    validate,
)
from .numcore import DomainError, SeededRng

DENSE_LIMIT = 2000
EIG_TOL = 1e-10
PSD_TOL = 1e-12
SHIFT = 1e-2


# ---------------------------------------------------------------------------
# terms


def _end_ok(site: int, n: int, x: str) -> bool:
    if site == 0:
        return x == LEFTEND
    if site == n + 1:
        return x == RIGHTEND
    return x not in (LEFTEND, RIGHTEND)


def _pair_allowed(layout: Layout, t: int) -> frozenset:
    arrows = layout.arrows(t)
    inner = _allowed_pairs(layout.alphabet(t), arrows)
    if arrows:
        edge = {(LEFTEND, VISITED), (BLANK, RIGHTEND)}
        edge |= {(LEFTEND, a) for a in arrows} | {(a, RIGHTEND) for a in arrows}
    else:
        edge = {(LEFTEND, a) for a in layout.alphabet(t)} | {(a, RIGHTEND) for a in layout.alphabet(t)}
    return frozenset(inner | edge)


@dataclass(frozen=True)
class LocalTerm:
    """One term on 1 or 2 adjacent sites.

    kind "valid": projector onto bad symbols of one track (1 site) or onto
    forbidden adjacent pairs (2 sites). kind "transition": hopping term of
    one window. kind "input": projector onto a wrong input symbol met by the
    initialization sweep.
    """

    kind: str
    sites: tuple[int, ...]
    track: int | None = None
    target: str | None = None

    def to_json(self) -> dict:
        d = {"kind": self.kind, "sites": list(self.sites)}
        if self.track is not None:
            d["track"] = self.track
        if self.target is not None:
            d["target"] = self.target
        return d

    @classmethod
    def from_json(cls, d: dict) -> LocalTerm:
        return cls(d["kind"], tuple(d["sites"]), d.get("track"), d.get("target"))


@dataclass
class HamiltonianSpec:
    layout: Layout
    rules: RuleSet
    w_star: str
    terms: list[LocalTerm]
    geometry: str = "line"
    coords: dict | None = None
    exact: bool = False
    _allowed: dict = field(default_factory=dict, repr=False)

    @property
    def n_sites(self) -> int:
        return self.layout.n + 2

    def local_dims(self) -> list[int]:
        return [self.layout.local_dim()] * self.n_sites

    def allowed(self, t: int) -> frozenset:
        if t not in self._allowed:
            self._allowed[t] = _pair_allowed(self.layout, t)
        return self._allowed[t]

    def half(self):
        return Fraction(1, 2) if self.exact else 0.5

    def select(self, kinds) -> HamiltonianSpec:
        kinds = {kinds} if isinstance(kinds, str) else set(kinds)
        return HamiltonianSpec(self.layout, self.rules, self.w_star,
                               [t for t in self.terms if t.kind in kinds],
                               self.geometry, self.coords, self.exact)

    def to_json(self) -> dict:
        return {
            "layout": self.layout.to_json(),
            "w_star": self.w_star,
            "geometry": self.geometry,
            "coords": None if self.coords is None else [list(self.coords[s]) for s in range(self.n_sites)],
            "local_dims": self.local_dims(),
            "terms": [t.to_json() for t in self.terms],
        }

    @classmethod
    def from_json(cls, d: dict, exact: bool = False) -> HamiltonianSpec:
        layout = Layout.from_json(d["layout"])
        rs, _ = build_clock_machine(layout.n, layout.k, layout.machine, d["w_star"])
        coords = None if d.get("coords") is None else {i: tuple(c) for i, c in enumerate(d["coords"])}
        return cls(layout, rs, d["w_star"], [LocalTerm.from_json(t) for t in d["terms"]],
                   d.get("geometry", "line"), coords, exact)


def build_h_valid(layout: Layout) -> list[LocalTerm]:
    n = layout.n
    terms = [LocalTerm("valid", (s,), t) for s in range(n + 2) for t in range(layout.tracks)]
    terms += [LocalTerm("valid", (s, s + 1), t) for s in range(n + 1) for t in range(layout.tracks)
              if layout.arrows(t)]
    return terms


def build_h_transition(rs: RuleSet) -> list[LocalTerm]:
    return [LocalTerm("transition", (i, i + 1)) for i in range(rs.layout.n + 1)]


def build_h_input(w_star, layout: Layout) -> list[LocalTerm]:
    w = list(w_star)
    if len(w) != layout.n:
        raise DomainError("input length must equal n")
    return [LocalTerm("input", (c,), target=w[c - 1]) for c in range(1, layout.n + 1)]


def build_hamiltonian(n: int, k: int, machine, w_star: str, exact: bool = False) -> HamiltonianSpec:
    rs, _ = build_clock_machine(n, k, machine, w_star)
    lay = rs.layout
    terms = build_h_valid(lay) + build_h_transition(rs) + build_h_input(w_star, lay)
    return HamiltonianSpec(lay, rs, "".join(w_star), terms, exact=exact)


# ---------------------------------------------------------------------------
# application


def _add(out: dict, c, a) -> None:
    out[c] = out.get(c, 0) + a


def term_apply(H: HamiltonianSpec, term: LocalTerm, cfg: MachineConfig) -> list:
    """[(config, coefficient)] of term |cfg>."""
    lay = H.layout
    if term.kind == "valid":
        if len(term.sites) == 1:
            (s,) = term.sites
            x = cfg.sites[s][term.track]
            return [] if _end_ok(s, lay.n, x) else [(cfg, 1)]
        s = term.sites[0]
        pair = (cfg.sites[s][term.track], cfg.sites[s + 1][term.track])
        return [] if pair in H.allowed(term.track) else [(cfg, 1)]
    if term.kind == "input":
        (c,) = term.sites
        site = cfg.sites[c]
        return [(cfg, 1)] if site[0] == RIGHT and site[lay.tape_track] != term.target else []
    if term.kind == "transition":
        i = term.sites[0]
        half = H.half()
        left, right = cfg.sites[i], cfg.sites[i + 1]
        out: dict = {}
        fwd = H.rules.local(i, left, right)
        if fwd is not None:
            _add(out, cfg, half)  # domain projector
            for l2, r2, a in fwd:
                _add(out, cfg.replace(i, l2, r2), -half * a)
        back = H.rules.preimages(i, left, right)
        for l0, r0, a in back:
            pre = cfg.replace(i, l0, r0)
            ca = a.conjugate() if isinstance(a, complex) else a
            _add(out, pre, -half * ca)
            # range projector K K^dagger
            for l2, r2, b in H.rules.local(i, l0, r0):
                _add(out, cfg.replace(i, l2, r2), half * ca * b)
        return list(out.items())
    raise DomainError(f"unknown term kind {term.kind!r}")


def apply(H: HamiltonianSpec, v: dict) -> dict:
    """H v for a sparse vector v (configuration -> amplitude)."""
    out: dict = {}
    for cfg, amp in v.items():
        for term in H.terms:
            for c2, a in term_apply(H, term, cfg):
                _add(out, c2, a * amp)
    return {c: a for c, a in out.items() if a != 0}


def energy(H: HamiltonianSpec, cfg: MachineConfig):
    """<cfg| H |cfg>."""
    return apply(H, {cfg: 1}).get(cfg, 0)


def inner(u: dict, v: dict):
    if len(u) > len(v):
        return np.conj(inner(v, u))
    s = 0
    for c, a in u.items():
        b = v.get(c)
        if b is not None:
            s += (a.conjugate() if isinstance(a, complex) else a) * b
    return s


def norm(v: dict) -> float:
    return math.sqrt(sum(abs(a) ** 2 for a in v.values()))


# ---------------------------------------------------------------------------
# history states and restriction


def branch(H: HamiltonianSpec, w) -> list[dict]:
    """History vectors c_0 .. c_{T-1} started from input w."""
    return run_history(H.rules, initial_config(H.layout, w))


def history_state(H_or_rules, init, T: int | None = None) -> dict:
    """(1/sqrt T) sum_t c_t over the first T history vectors."""
    rs = H_or_rules.rules if isinstance(H_or_rules, HamiltonianSpec) else H_or_rules
    hist = run_history(rs, init)
    if T is not None:
        hist = hist[:T]
    scale = 1 / math.sqrt(len(hist))
    out: dict = {}
    for sup in hist:
        for c, a in sup.items():
            _add(out, c, a * scale)
    return out


@dataclass
class RestrictedOperator:
    basis: list[dict]
    matrix: np.ndarray
    leakage: float = 0.0

    @property
    def dim(self) -> int:
        return len(self.basis)

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        M = np.asarray(self.matrix, dtype=complex)
        return bool(np.max(np.abs(M - M.conj().T), initial=0.0) <= tol)


def restrict(H: HamiltonianSpec, basis: list[dict]) -> RestrictedOperator:
    """<b_s| H |b_t> over an orthonormal basis with disjoint supports.

    leakage is the largest norm of the part of H b_t outside span(basis).
    """
    where = {}
    for s, b in enumerate(basis):
        for c, a in b.items():
            if c in where:
                raise DomainError("basis vectors must have disjoint supports")
            where[c] = (s, a)
    d = len(basis)
    M = np.zeros((d, d), dtype=object if H.exact else complex)
    if H.exact:
        M[:] = Fraction(0)
    leak = 0.0
    for t, b in enumerate(basis):
        hb = apply(H, b)
        for c, a in hb.items():
            if c in where:
                s, bs = where[c]
                M[s, t] += (bs.conjugate() if isinstance(bs, complex) else bs) * a
        resid = dict(hb)
        for s in range(d):
            if M[s, t] != 0:
                for c, a in basis[s].items():
                    _add(resid, c, -M[s, t] * a)
        leak = max(leak, norm({c: a for c, a in resid.items() if abs(a) > 1e-15}))
    if not H.exact and np.allclose(M.imag, 0):
        M = M.real
    return RestrictedOperator(basis, M, leak)


def path_matrix(T: int) -> np.ndarray:
    """The T x T matrix with 1 on the diagonal, -1/2 beside it and 1/2 in the corners."""
    M = np.eye(T) - 0.5 * (np.eye(T, k=1) + np.eye(T, k=-1))
    M[0, 0] = M[-1, -1] = 0.5
    return M


# ---------------------------------------------------------------------------
# spectra


def spectrum(R, how_many: int = 2, vectors: bool = False):
    """Lowest eigenvalues (ascending) of a restricted operator or matrix.

    Dense below 2000 dimensions; otherwise shift-invert Lanczos from a fixed
    start, all-ones tilted by a ramp. All-ones alone is the exact ground state
    of a path block and has no overlap with its odd excited states.
    """
    M = R.matrix if isinstance(R, RestrictedOperator) else R
    M = np.asarray(M, dtype=float if np.isrealobj(M) or M.dtype == object else complex)
    d = M.shape[0]
    how_many = min(how_many, d)
    if d <= DENSE_LIMIT:
        w, V = np.linalg.eigh(M)
        w, V = w[:how_many], V[:, :how_many]
    else:
        v0 = 1 + np.linspace(-0.5, 0.5, d)
        v0 /= np.linalg.norm(v0)
        # shift-invert just below zero: H is PSD and its low gaps are tiny
        w, V = sla.eigsh(sp.csc_matrix(M), k=how_many, sigma=-SHIFT, which="LM", v0=v0, tol=EIG_TOL)
        order = np.argsort(w)
        w, V = w[order], V[:, order]
    return (w, V) if vectors else w


def kitaev_bound(a1: float, a2: float, Lambda: float, theta: float) -> float:
    """a1 + a2 + 2 Lambda sin^2(theta / 2)."""
    return a1 + a2 + 2 * Lambda * math.sin(theta / 2) ** 2


def ground_space_angle(G1: np.ndarray, G2: np.ndarray) -> float:
    """Smallest principal angle between column spaces of G1 and G2."""
    Q1, _ = np.linalg.qr(G1)
    Q2, _ = np.linalg.qr(G2)
    s = np.linalg.svd(Q1.conj().T @ Q2, compute_uv=False)
    return float(math.acos(min(1.0, s.max())))


def spectra_csv(values) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "eigenvalue"])
    for i, v in enumerate(values):
        w.writerow([i, f"{float(v):.15g}"])
    return buf.getvalue()


# ---------------------------------------------------------------------------
# verification


def random_config(layout: Layout, rng: SeededRng) -> MachineConfig:
    """Uniform symbol soup over every track alphabet plus the end markers."""
    sites = []
    for _ in range(layout.n + 2):
        site = []
        for t in range(layout.tracks):
            alpha = layout.alphabet(t) + (LEFTEND, RIGHTEND)
            site.append(alpha[int(rng.integers(0, len(alpha)))])
        sites.append(tuple(site))
    return MachineConfig(tuple(sites))


def sample_invalid(layout: Layout, count: int, rng: SeededRng) -> list[MachineConfig]:
    out = []
    while len(out) < count:
        c = random_config(layout, rng)
        if validate(layout, c):
            out.append(c)
    return out


def block_energy(H: HamiltonianSpec, w) -> float:
    """Ground energy of H on the history span of input w."""
    R = restrict(H, branch(H, w))
    return float(spectrum(R, 1)[0])


def gap_report(H: HamiltonianSpec, samples: int = 4, invalid: int = 100, seed: int = 0) -> dict:
    """Ground energy and gap of the w* block, other-input blocks and the invalid floor."""
    rng = SeededRng(seed)
    R = restrict(H, branch(H, H.w_star))
    ev = spectrum(R, 2)
    alphabet = H.layout.machine.alphabet
    others = []
    for _ in range(samples):
        w = "".join(alphabet[int(rng.integers(0, len(alphabet)))] for _ in range(H.layout.n))
        if w != H.w_star:
            others.append((w, block_energy(H, w)))
    floor = min(float(np.real(energy(H, c))) for c in sample_invalid(H.layout, invalid, rng))
    return {
        "T": R.dim,
        "ground_energy": float(ev[0]),
        "gap": float(ev[1] - ev[0]) if len(ev) > 1 else None,
        "path_gap": 1 - math.cos(math.pi / R.dim),
        "leakage": R.leakage,
        "other_blocks": [{"w": w, "ground_energy": e} for w, e in others],
        "invalid_floor": floor,
    }


def residual(H: HamiltonianSpec) -> float:
    """||H psi|| for the history state of w*."""
    psi = history_state(H, initial_config(H.layout, H.w_star))
    return norm(apply(H, psi))


# ---------------------------------------------------------------------------
# 2D embedding


def embed_snake(H: HamiltonianSpec, side: int) -> HamiltonianSpec:
    """Place the chain on a side x side grid along the boustrophedon path."""
    if side * side < H.n_sites:
        raise DomainError(f"{H.n_sites} sites do not fit on a {side} x {side} grid")
    coords = {s: snake_coords(s, side) for s in range(H.n_sites)}
    for t in H.terms:
        if len(t.sites) == 2:
            (r1, c1), (r2, c2) = coords[t.sites[0]], coords[t.sites[1]]
            if abs(r1 - r2) + abs(c1 - c2) != 1:
                raise DomainError(f"term on {t.sites} is not grid-local")
    return HamiltonianSpec(H.layout, H.rules, H.w_star, list(H.terms), "grid", coords, H.exact)
