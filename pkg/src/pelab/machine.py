"""Multi-track Turing machines: the clock machine that drives a history-state
construction, a reversible dilution machine, and Bennett pebbling.

Clock machine layout on n cells between the end markers (sites 0 and n+1):

    track 0        head of the new machine (init arrows, then subscript-0 arrows)
    tracks 1..k    clock arrows
    track k+1      state of the simulated machine, at its head position
    track k+2      tape of the simulated machine

Every transition rewrites one window of two adjacent sites. The head moves
in the direction it points; in the computation phase each head move may push
clock arrow 1, which may push arrow 2, and so on within the same step. A
rightward head arriving on the simulated head applies the simulated
transition. Left moves land directly on the left neighbour; right moves park
a primed state that the next leftward sweep pushes one cell right.

Rules are tables keyed by local patterns; the Hamiltonian builder reads the
same tables.
"""

from __future__ import annotations

import itertools
import json
import math
import re
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .numcore import DomainError, NotFoundError, RefusalError

LEFTEND, RIGHTEND = "⊲", "⊳"
VISITED, BLANK = "□", "␣"
RIGHT, LEFT, RIGHT0, LEFT0 = "▷", "◁", "▷₀", "◁₀"
ENDS = (LEFTEND, RIGHTEND)
HEAD_ARROWS = (RIGHT, LEFT, RIGHT0, LEFT0)
CLOCK_ARROWS = (RIGHT, LEFT)
PRIME = "'"
NORM_TOL = 1e-10
HISTORY_LIMIT = 2_000_000


# ---------------------------------------------------------------------------
# simulated machines


@dataclass(frozen=True)
class TuringMachine:
    """Single-tape (quantum) Turing machine.

    delta maps (q, a) to a tuple of (q2, b, D, amplitude) with D in "LR".
    """

    states: tuple[str, ...]
    alphabet: tuple[str, ...]
    delta: dict
    initial: str
    accepting: frozenset = frozenset()
    name: str = "machine"

    def __post_init__(self):
        for s in self.states:
            if s.endswith(PRIME) or s in ENDS or s in (VISITED, BLANK):
                raise DomainError(f"reserved state name {s!r}")
        for (q, a), outs in self.delta.items():
            if q not in self.states or a not in self.alphabet:
                raise DomainError(f"delta entry ({q}, {a}) outside Q x Sigma")
            for q2, b, d, _ in outs:
                if q2 not in self.states or b not in self.alphabet or d not in ("L", "R"):
                    raise DomainError(f"bad delta target {(q2, b, d)}")
        entered = {}
        for outs in self.delta.values():
            for q2, _, d, amp in outs:
                if amp != 0 and entered.setdefault(q2, d) != d:
                    raise DomainError(f"state {q2} is entered by both left and right moves")

    @property
    def right_states(self) -> frozenset:
        return frozenset(q2 for outs in self.delta.values() for q2, _, d, a in outs if d == "R" and a != 0)

    @property
    def left_states(self) -> frozenset:
        return frozenset(self.states) - self.right_states

    @property
    def is_classical(self) -> bool:
        return all(len(outs) == 1 and outs[0][3] == 1 for outs in self.delta.values())

    def isometry_defect(self) -> float:
        """max |<d(q,a), d(q',a')> - [(q,a) = (q',a')]| over the table."""
        keys = sorted(self.delta)
        cols = []
        for key in keys:
            v = {}
            for q2, b, d, amp in self.delta[key]:
                v[(q2, b, d)] = v.get((q2, b, d), 0) + complex(amp)
            cols.append(v)
        worst = 0.0
        for i, u in enumerate(cols):
            for j, v in enumerate(cols):
                ip = sum(np.conj(u[x]) * v.get(x, 0) for x in u)
                worst = max(worst, abs(ip - (i == j)))
        return worst

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "states": list(self.states),
            "alphabet": list(self.alphabet),
            "initial": self.initial,
            "accepting": sorted(self.accepting),
            "delta": [
                {"q": q, "a": a, "out": [[q2, b, d, [complex(amp).real, complex(amp).imag]] for q2, b, d, amp in outs]}
                for (q, a), outs in sorted(self.delta.items())
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> TuringMachine:
        delta = {}
        for e in d["delta"]:
            outs = []
            for q2, b, dd, (re_, im) in e["out"]:
                amp = complex(re_, im)
                if amp.imag == 0 and amp.real in (0.0, 1.0, -1.0):
                    amp = int(amp.real)
                outs.append((q2, b, dd, amp))
            delta[(e["q"], e["a"])] = tuple(outs)
        return cls(tuple(d["states"]), tuple(d["alphabet"]), delta, d["initial"],
                   frozenset(d.get("accepting", ())), d.get("name", "machine"))


def toggle_machine() -> TuringMachine:
    """Classical reversible toy: shuttles between cells 1 and 2, flipping cell 2."""
    delta = {}
    for x in "01":
        delta[("a", x)] = (("b", x, "R", 1),)
        delta[("b", x)] = (("a", str(1 - int(x)), "L", 1),)
    return TuringMachine(("a", "b"), ("0", "1"), delta, "a", name="toggle")


def hadamard_machine() -> TuringMachine:
    """Quantum toy: like toggle_machine, but cell 2 receives a Hadamard."""
    h = 1 / math.sqrt(2)
    delta = {}
    for x in "01":
        delta[("a", x)] = (("b", x, "R", 1),)
        delta[("b", x)] = tuple(("a", y, "L", h * (-1 if x == y == "1" else 1)) for y in "01")
    return TuringMachine(("a", "b"), ("0", "1"), delta, "a", name="hadamard")


def single_step_machine() -> TuringMachine:
    """One state that writes nothing new and moves right; used for one-rule toys."""
    delta = {("a", x): (("a", x, "R", 1),) for x in "01"}
    return TuringMachine(("a",), ("0", "1"), delta, "a", name="drift")


# ---------------------------------------------------------------------------
# layouts and configurations


def _primed(q: str) -> str:
    return q + PRIME


@dataclass(frozen=True)
class Layout:
    n: int
    k: int
    machine: TuringMachine

    def __post_init__(self):
        if self.n < 2 or self.k < 1:
            raise DomainError("need n >= 2 cells and k >= 1 clock tracks")

    @property
    def tracks(self) -> int:
        return self.k + 3

    @property
    def state_track(self) -> int:
        return self.k + 1

    @property
    def tape_track(self) -> int:
        return self.k + 2

    @property
    def state_symbols(self) -> tuple[str, ...]:
        m = self.machine
        return tuple(m.states) + tuple(_primed(q) for q in m.states if q in m.right_states)

    def alphabet(self, t: int) -> tuple[str, ...]:
        """Interior symbols of track t (the end markers come on top)."""
        if t == 0:
            return (VISITED, BLANK) + HEAD_ARROWS
        if 1 <= t <= self.k:
            return (VISITED, BLANK) + CLOCK_ARROWS
        if t == self.state_track:
            return (VISITED, BLANK) + self.state_symbols
        if t == self.tape_track:
            return tuple(self.machine.alphabet)
        raise DomainError(f"no track {t}")

    def arrows(self, t: int) -> tuple[str, ...]:
        if t == 0:
            return HEAD_ARROWS
        if 1 <= t <= self.k:
            return CLOCK_ARROWS
        if t == self.state_track:
            return self.state_symbols
        return ()

    def local_dim(self) -> int:
        return math.prod(len(self.alphabet(t)) + 2 for t in range(self.tracks))

    def to_json(self) -> dict:
        return {"n": self.n, "k": self.k, "machine": self.machine.to_json()}

    @classmethod
    def from_json(cls, d: dict) -> Layout:
        return cls(d["n"], d["k"], TuringMachine.from_json(d["machine"]))


@dataclass(frozen=True)
class MachineConfig:
    """n + 2 sites, each a tuple of per-track symbols."""

    sites: tuple[tuple[str, ...], ...]

    @property
    def n(self) -> int:
        return len(self.sites) - 2

    def track(self, t: int) -> tuple[str, ...]:
        return tuple(s[t] for s in self.sites)

    def replace(self, i: int, left: tuple, right: tuple) -> MachineConfig:
        return MachineConfig(self.sites[:i] + (left, right) + self.sites[i + 2:])

    def head(self) -> tuple[int, str]:
        for i, s in enumerate(self.sites):
            if s[0] in HEAD_ARROWS:
                return i, s[0]
        raise DomainError("configuration has no head")

    def render(self, tracks: Iterable[int] = (0, 1)) -> str:
        """Interior cells of the chosen tracks joined by '|'."""
        return "|".join("".join(s[t] for s in self.sites[1:-1]) for t in tracks)

    def to_json(self) -> list:
        return [list(s) for s in self.sites]

    @classmethod
    def from_json(cls, d) -> MachineConfig:
        return cls(tuple(tuple(s) for s in d))


def config_from_tracks(tracks: list[str | list[str]]) -> MachineConfig:
    """Build a configuration from per-track symbol lists, end markers included."""
    cols = [list(t) if not isinstance(t, list) else t for t in tracks]
    if len({len(c) for c in cols}) != 1:
        raise DomainError("tracks must have equal length")
    return MachineConfig(tuple(tuple(c[i] for c in cols) for i in range(len(cols[0]))))


def initial_config(layout: Layout, w: str | Iterable[str]) -> MachineConfig:
    w = list(w)
    n = layout.n
    if len(w) != n or any(a not in layout.machine.alphabet for a in w):
        raise DomainError(f"input must be {n} symbols from {layout.machine.alphabet}")
    arrow_row = [LEFTEND, RIGHT] + [BLANK] * (n - 1) + [RIGHTEND]
    tracks = [arrow_row] * (layout.k + 1)
    tracks.append([LEFTEND, layout.machine.initial] + [BLANK] * (n - 1) + [RIGHTEND])
    tracks.append([LEFTEND] + w + [RIGHTEND])
    return config_from_tracks(tracks)


@dataclass(frozen=True)
class Violation:
    track: int | None
    sites: tuple[int, ...]
    reason: str

    def __str__(self):
        where = "site" if self.track is None else f"track {self.track}"
        return f"{where} {list(self.sites)}: {self.reason}"


def validate(layout: Layout, cfg: MachineConfig) -> list[Violation]:
    """Every way cfg breaks the valid-configuration conditions; [] if valid."""
    out = []
    n = layout.n
    if len(cfg.sites) != n + 2 or any(len(s) != layout.tracks for s in cfg.sites):
        return [Violation(None, (), f"expected {n + 2} sites of {layout.tracks} tracks")]
    bad_ends = [i for i, s in ((0, cfg.sites[0]), (n + 1, cfg.sites[-1]))
                if any(x != (LEFTEND if i == 0 else RIGHTEND) for x in s)]
    if bad_ends:
        out.append(Violation(None, tuple(bad_ends), "end markers missing"))
    for t in range(layout.tracks):
        row = cfg.track(t)[1:-1]
        foreign = tuple(i + 1 for i, x in enumerate(row) if x not in layout.alphabet(t))
        if foreign:
            out.append(Violation(t, foreign, "symbol outside the track alphabet"))
            continue
        arrows = layout.arrows(t)
        if not arrows:
            continue
        code = "".join("v" if x == VISITED else "b" if x == BLANK else "a" if x in arrows else "x" for x in row)
        if not re.fullmatch("v*ab*", code):
            marks = tuple(i + 1 for i, x in enumerate(row) if x in arrows)
            out.append(Violation(t, marks, f"not of the form {VISITED}* arrow {BLANK}*"))
    return out


# ---------------------------------------------------------------------------
# rule tables


def _allowed_pairs(alpha: tuple[str, ...], arrows: tuple[str, ...]) -> set[tuple[str, str]]:
    """Locally valid adjacent pairs of one interior-only arrow track."""
    if not arrows:
        return set(itertools.product(alpha, alpha))
    ok = {(VISITED, VISITED), (BLANK, BLANK)}
    ok |= {(VISITED, a) for a in arrows} | {(a, BLANK) for a in arrows}
    return ok


@dataclass(frozen=True)
class ClockRule:
    before: tuple[str, str]
    after: tuple[str, str]
    event: str | None
    # "flip": next track must not show a right arrow at cell 1 (and exist);
    # "start": next track shows a right arrow at cell 1, or there is none
    guard: str | None = None


def _clock_table(event: str, edge: bool) -> dict:
    """Response of an arrow track to its predecessor moving in `event`.

    event "L": predecessor went from cell i+1 to i; edge means i+1 = n.
    event "R": predecessor went from cell i to i+1; edge means i = 1.
    Untriggered patterns whose image collides with a triggered one are
    unreachable and left without a rule, keeping the map injective. The one
    reachable collision, a left-end flip against an arrow that has not moved
    since the start, is split by a guard on the next track.
    """
    pairs = _allowed_pairs((VISITED, BLANK) + CLOCK_ARROWS, CLOCK_ARROWS)
    fired, idle = {}, {}
    for x, y in sorted(pairs):
        if event == "L" and x == RIGHT:
            fired[(x, y)] = ClockRule((x, y), (VISITED, RIGHT), "R")
        elif event == "L" and edge and y == RIGHT:
            fired[(x, y)] = ClockRule((x, y), (VISITED, LEFT), None)
        elif event == "R" and y == LEFT:
            fired[(x, y)] = ClockRule((x, y), (LEFT, BLANK), "L")
        elif event == "R" and edge and x == LEFT:
            fired[(x, y)] = ClockRule((x, y), (RIGHT, BLANK), None, "flip")
        elif event == "R" and edge and x == RIGHT:
            fired[(x, y)] = ClockRule((x, y), (x, y), None, "start")
        else:
            idle[(x, y)] = ClockRule((x, y), (x, y), None)
    images = {r.after for r in fired.values()}
    table = dict(fired)
    table.update({p: r for p, r in idle.items() if r.after not in images})
    return table


_HEAD_RULES = {
    # (window class, left, right) -> (left', right', event, phase)
    ("mid", RIGHT, BLANK): (VISITED, RIGHT, None, "init"),
    ("mid", VISITED, LEFT): (LEFT, BLANK, None, "init"),
    ("right", RIGHT, RIGHTEND): (LEFT, RIGHTEND, None, "init"),
    ("left", LEFTEND, LEFT): (LEFTEND, RIGHT0, "A", "init"),
    ("mid", RIGHT0, BLANK): (VISITED, RIGHT0, "R", "comp"),
    ("mid", VISITED, LEFT0): (LEFT0, BLANK, "L", "comp"),
    ("right", RIGHT0, RIGHTEND): (LEFT0, RIGHTEND, None, "comp"),
    ("left", LEFTEND, LEFT0): (LEFTEND, RIGHT0, "A", "comp"),
}


@dataclass
class RuleSet:
    """All transition tables of the clock machine for one layout."""

    layout: Layout
    head: dict = field(default_factory=dict)
    clock: dict = field(default_factory=dict)
    sim: dict = field(default_factory=dict)

    # forward ---------------------------------------------------------------

    def window_class(self, i: int) -> str:
        if i == 0:
            return "left"
        if i == self.layout.n:
            return "right"
        return "mid"

    def _edge(self, event: str, i: int) -> bool:
        return i + 1 == self.layout.n if event == "L" else i == 1

    def local(self, i: int, left: tuple, right: tuple) -> list | None:
        """Image of window (i, i+1) as [(left', right', amplitude)], or None."""
        lay = self.layout
        h = self.head.get((self.window_class(i), left[0], right[0]))
        if h is None:
            return None
        a0, b0, ev, phase = h
        # the end-of-init and bounce arrivals differ in clock track 1
        if ev == "A" and (right[1] == RIGHT) != (phase == "init"):
            return None
        if phase == "comp" and ev is None and left[0] == RIGHT0 and left[lay.k] == RIGHT:
            return None  # halting: head and last clock arrow both pointing right at cell n
        new_l, new_r = [a0], [b0]
        e = ev if ev in ("L", "R") else None
        for j in range(1, lay.k + 1):
            if e is None:
                new_l.append(left[j])
                new_r.append(right[j])
                continue
            r = self.clock[(e, self._edge(e, i))].get((left[j], right[j]))
            if r is None or not self._guard_ok(r, j, left):
                return None
            new_l.append(r.after[0])
            new_r.append(r.after[1])
            e = r.event
        s, t = lay.state_track, lay.tape_track
        if ev is None:
            return [(tuple(new_l + [left[s], left[t]]), tuple(new_r + [right[s], right[t]]), 1)]
        if ev == "A":
            outs = self.sim["A"].get((right[s], right[t]))
            if outs is None:
                return None
            return [(tuple(new_l + [left[s], left[t]]), tuple(new_r + [ss, tt]), amp) for (ss, tt), amp in outs]
        outs = self.sim[ev].get(((left[s], right[s]), (left[t], right[t])))
        if outs is None:
            return None
        return [
            (tuple(new_l + [sl, tl]), tuple(new_r + [sr, tr]), amp)
            for ((sl, sr), (tl, tr)), amp in outs
        ]

    def _guard_ok(self, r: ClockRule, j: int, left: tuple) -> bool:
        if r.guard is None:
            return True
        nxt_right = j < self.layout.k and left[j + 1] == RIGHT
        if r.guard == "flip":
            return j < self.layout.k and not nxt_right
        return j == self.layout.k or nxt_right

    def window_of(self, cfg: MachineConfig) -> int | None:
        """The window a valid configuration rewrites next."""
        try:
            c, arrow = cfg.head()
        except DomainError:
            return None
        return c if arrow in (RIGHT, RIGHT0) else c - 1

    def successors(self, cfg: MachineConfig) -> list | None:
        i = self.window_of(cfg)
        if i is None or not 0 <= i <= self.layout.n:
            return None
        outs = self.local(i, cfg.sites[i], cfg.sites[i + 1])
        if outs is None:
            return None
        return [(cfg.replace(i, l, r), amp) for l, r, amp in outs]

    # backward --------------------------------------------------------------

    def preimages(self, i: int, left: tuple, right: tuple) -> list:
        """[(left, right, amplitude)] with local(i, left, right) containing (left', right')."""
        lay = self.layout
        cls = self.window_class(i)
        found = []
        for (c, hl, hr), (a0, b0, ev, _) in self.head.items():
            if c != cls or (a0, b0) != (left[0], right[0]):
                continue
            cands = [([hl], [hr], ev if ev in ("L", "R") else None)]
            for j in range(1, lay.k + 1):
                nxt = []
                for bl, br, e in cands:
                    if e is None:
                        nxt.append((bl + [left[j]], br + [right[j]], None))
                        continue
                    for r in self.clock[(e, self._edge(e, i))].values():
                        if r.after == (left[j], right[j]):
                            nxt.append((bl + [r.before[0]], br + [r.before[1]], r.event))
                cands = nxt
            s, t = lay.state_track, lay.tape_track
            for bl, br, _ in cands:
                if ev is None:
                    sims = [((left[s], right[s]), (left[t], right[t]))]
                elif ev == "A":
                    sims = [((left[s], ss), (left[t], tt)) for ss, tt in self._sim_inverse("A", (right[s], right[t]))]
                else:
                    sims = self._sim_inverse(ev, ((left[s], right[s]), (left[t], right[t])))
                for (sl, sr), (tl, tr) in sims:
                    L, R = tuple(bl + [sl, tl]), tuple(br + [sr, tr])
                    outs = self.local(i, L, R) or []
                    for l2, r2, amp in outs:
                        if (l2, r2) == (left, right):
                            found.append((L, R, amp))
        return found

    def _sim_inverse(self, ev: str, after) -> list:
        key = ("inv", ev)
        if key not in self.sim:
            inv = {}
            for before, outs in self.sim[ev].items():
                for out, _ in outs:
                    inv.setdefault(out, []).append(before)
            self.sim[key] = inv
        return self.sim[key].get(after, [])

    # serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "layout": self.layout.to_json(),
            "head": [[c, l, r, *v] for (c, l, r), v in sorted(self.head.items(), key=str)],
            "clock": {
                f"{e}{'|edge' if edge else ''}": [[*r.before, *r.after, r.event, r.guard] for r in t.values()]
                for (e, edge), t in sorted(self.clock.items())
            },
            "sim": {
                ev: [[json.dumps(b, ensure_ascii=False), [[json.dumps(o, ensure_ascii=False), _amp_json(a)] for o, a in outs]]
                     for b, outs in sorted(t.items(), key=str)]
                for ev, t in sorted(self.sim.items(), key=str) if isinstance(ev, str)
            },
        }


def _amp_json(a) -> list[float]:
    c = complex(a)
    return [c.real, c.imag]


def _sim_tables(layout: Layout) -> dict:
    m = layout.machine
    states = layout.state_symbols
    unprimed = set(m.states)
    spairs = _allowed_pairs((VISITED, BLANK) + states, states)
    tpairs = set(itertools.product(m.alphabet, m.alphabet))
    tables = {}
    for ev in ("R", "L"):
        fired, idle = {}, {}
        for sp, tp in itertools.product(sorted(spairs), sorted(tpairs)):
            sl, sr = sp
            out = {}
            if ev == "R" and sr in unprimed:
                for q2, b, d, amp in m.delta.get((sr, tp[1]), ()):
                    key = ((q2, BLANK), (tp[0], b)) if d == "L" else ((VISITED, _primed(q2)), (tp[0], b))
                    out[key] = out.get(key, 0) + amp
            elif ev == "L" and sl.endswith(PRIME):
                out[((VISITED, sl[:-1]), tp)] = 1
            if out:
                fired[(sp, tp)] = tuple((o, a) for o, a in out.items() if a != 0)
            else:
                idle[(sp, tp)] = ((sp, tp), 1)
        images = {o for outs in fired.values() for o, _ in outs}
        table = dict(fired)
        table.update({b: (o,) for b, o in idle.items() if o[0] not in images})
        tables[ev] = table
    # arrival at cell 1: only right moves stay on the tape
    fired, idle = {}, {}
    for s1, a1 in itertools.product((VISITED, BLANK) + states, m.alphabet):
        out = {}
        if s1 in unprimed:
            for q2, b, d, amp in m.delta.get((s1, a1), ()):
                if d == "R":
                    out[(_primed(q2), b)] = out.get((_primed(q2), b), 0) + amp
        if out:
            fired[(s1, a1)] = tuple((o, a) for o, a in out.items() if a != 0)
        else:
            idle[(s1, a1)] = ((s1, a1), 1)
    images = {o for outs in fired.values() for o, _ in outs}
    table = dict(fired)
    table.update({b: (o,) for b, o in idle.items() if o[0] not in images})
    tables["A"] = table
    return tables


def build_clock_machine(n: int, k: int, original: TuringMachine, w) -> tuple[RuleSet, MachineConfig]:
    """Rule tables of the (k+2)-track machine simulating `original`, and its start."""
    layout = Layout(n, k, original)
    rs = RuleSet(layout)
    rs.head = dict(_HEAD_RULES)
    rs.clock = {(e, edge): _clock_table(e, edge) for e in ("L", "R") for edge in (False, True)}
    rs.sim = _sim_tables(layout)
    return rs, initial_config(layout, w)


# ---------------------------------------------------------------------------
# evolution

Superposition = dict


class Halted(Exception):
    """Raised inside run helpers when no rule applies."""


def step(rs: RuleSet, sup: Superposition) -> Superposition | None:
    """One step of the machine on a superposition; None once every branch has halted."""
    out: dict = {}
    halted = 0
    for cfg, amp in sup.items():
        succ = rs.successors(cfg)
        if succ is None:
            halted += 1
            continue
        for c2, a2 in succ:
            out[c2] = out.get(c2, 0) + amp * a2
    if halted == len(sup):
        return None
    if halted:
        raise DomainError("some branches halted while others continue")
    return {c: a for c, a in out.items() if abs(a) > 1e-15}


def run_history(rs: RuleSet, init, t_max: int = HISTORY_LIMIT) -> list[Superposition]:
    """[c_0, c_1, ...] until the machine halts or t_max steps are taken."""
    cur = init if isinstance(init, dict) else {init: 1}
    hist = [cur]
    for _ in range(t_max):
        nxt = step(rs, cur)
        if nxt is None:
            break
        hist.append(nxt)
        cur = nxt
    return hist


def classical_run(rs: RuleSet, init: MachineConfig, t_max: int = HISTORY_LIMIT) -> list[MachineConfig]:
    """Configuration path of a deterministic run (first branch of each step)."""
    path = [init]
    cur = init
    for _ in range(t_max):
        succ = rs.successors(cur)
        if succ is None:
            break
        if len(succ) != 1:
            raise DomainError("branching step in a classical run")
        cur = succ[0][0]
        path.append(cur)
    return path


def clock_path(n: int, k: int) -> list[MachineConfig]:
    """Run with a trivial simulated machine; the clock does not depend on it."""
    rs, init = build_clock_machine(n, k, toggle_machine(), "0" * n)
    return classical_run(rs, init)


def halting_time(n: int, k: int) -> int:
    """Number of steps from the initial configuration to the halting one."""
    return len(clock_path(n, k)) - 1


def predicted_runtime(n: int, k: int, sweep: Iterable[int] | None = None) -> dict:
    """Exact halting time at n and the log-log exponent fitted over `sweep`."""
    ns = list(sweep or range(3, 9))
    times = [halting_time(m, k) for m in ns]
    slope = float(np.polyfit(np.log(ns), np.log(times), 1)[0])
    return {"n": n, "k": k, "steps": halting_time(n, k), "sweep": dict(zip(ns, times)), "exponent": slope}


def init_phase_length(n: int, k: int) -> int:
    """Steps taken before the head first shows a subscript-0 arrow."""
    for t, cfg in enumerate(clock_path(n, k)):
        if cfg.head()[1] in (RIGHT0, LEFT0):
            return t
    raise NotFoundError("computation phase never reached")


def _arrow_phase(pos: int, arrow: str, n: int) -> int:
    """Position in the 2n-cycle (1,>) .. (n,>) (n,<) .. (1,<)."""
    return pos - 1 if arrow in (RIGHT, RIGHT0) else 2 * n - pos


def _push_phase(phase: int, n: int, fresh: bool) -> int:
    """Phase of arrow j right after it pushed arrow j+1 into `phase`.

    fresh marks an arrow j+1 that has not moved since the start.
    """
    if phase == 0:
        return 0 if fresh else 1
    if phase == n:
        return n + 1
    return 2 * n - phase


def clock_value(cfg: MachineConfig, k: int) -> int:
    """Monotone clock reading decoded from head and clock-arrow positions alone.

    Each arrow contributes its phase counted from the moment it last pushed
    the next arrow, as a base-2n digit; the initialization sweep reads 0..2n-1.
    """
    n = cfg.n
    m = 2 * n
    pos, arrow = cfg.head()
    if arrow in (RIGHT, LEFT):
        return _arrow_phase(pos, arrow, n)
    phases = [_arrow_phase(pos, arrow, n)]
    for j in range(1, k + 1):
        row = cfg.track(j)
        p = next(i for i, x in enumerate(row) if x in CLOCK_ARROWS)
        phases.append(_arrow_phase(p, row[p], n))
    v = phases[k] * m ** k
    for j in range(k):
        fresh = j + 1 == k or phases[j + 2] == 0
        v += ((phases[j] - _push_phase(phases[j + 1], n, fresh)) % m) * m ** j
    return m + v


# ---------------------------------------------------------------------------
# history dumps


def history_jsonl(history: list[Superposition]) -> str:
    lines = []
    for t, sup in enumerate(history):
        items = sorted(sup.items(), key=lambda kv: kv[0].sites)
        lines.append(json.dumps({
            "t": t,
            "terms": [{"config": c.to_json(), "amp": _amp_json(a)} for c, a in items],
        }, ensure_ascii=False, sort_keys=True))
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# dilution


@dataclass(frozen=True)
class DilutionConfig:
    state: str
    head: int
    memory: str
    counter: int
    tape: tuple[str, ...]


DIL_BLANK = "#"


def dilution_pattern(n_bits: int, tape_len: int) -> tuple[int, ...]:
    """Target cells floor(j * tape_len / n_bits) for j = 0 .. n_bits - 1."""
    if not 1 <= n_bits <= tape_len:
        raise DomainError("need 1 <= n_bits <= tape_len")
    return tuple(j * tape_len // n_bits for j in range(n_bits))


@dataclass(frozen=True)
class DilutionMachine:
    """Moves input bits, rightmost first, onto marked cells of a pattern track.

    States: scan (right to the first blank), grab (one cell left, swap the bit
    into memory), seek (right to the next non-blank or the end), drop (left to
    a mark, swap the bit out), home (left to cell 0, decrement the counter).
    """

    n_bits: int
    tape_len: int
    marks: tuple[bool, ...]

    def initial(self, x: str) -> DilutionConfig:
        if len(x) != self.n_bits or set(x) - {"0", "1"}:
            raise DomainError(f"input must be {self.n_bits} bits")
        tape = tuple(x) + (DIL_BLANK,) * (self.tape_len - self.n_bits)
        return DilutionConfig("scan", 0, DIL_BLANK, self.n_bits, tape)

    def step(self, c: DilutionConfig) -> DilutionConfig | None:
        L = self.tape_len
        here = c.tape[c.head] if 0 <= c.head < L else None
        if c.state == "scan":
            if c.counter == 0:
                return None
            if here is None or here == DIL_BLANK:
                return DilutionConfig("grab", c.head - 1, c.memory, c.counter, c.tape)
            return DilutionConfig("scan", c.head + 1, c.memory, c.counter, c.tape)
        if c.state == "grab":
            tape = c.tape[:c.head] + (c.memory,) + c.tape[c.head + 1:]
            return DilutionConfig("seek", c.head + 1, here, c.counter, tape)
        if c.state == "seek":
            if here is None or here != DIL_BLANK:
                return DilutionConfig("drop", c.head - 1, c.memory, c.counter, c.tape)
            return DilutionConfig("seek", c.head + 1, c.memory, c.counter, c.tape)
        if c.state == "drop":
            if self.marks[c.head]:
                tape = c.tape[:c.head] + (c.memory,) + c.tape[c.head + 1:]
                return DilutionConfig("home", c.head, here, c.counter, tape)
            return DilutionConfig("drop", c.head - 1, c.memory, c.counter, c.tape)
        if c.state == "home":
            if c.head == 0:
                # reversible decrement of the looping counter
                return DilutionConfig("scan", 0, c.memory, c.counter - 1, c.tape)
            return DilutionConfig("home", c.head - 1, c.memory, c.counter, c.tape)
        raise DomainError(f"unknown state {c.state}")

    def run(self, x: str) -> list[DilutionConfig]:
        hist = [self.initial(x)]
        while (nxt := self.step(hist[-1])) is not None:
            hist.append(nxt)
        return hist


def build_dilution_tm(n_bits: int, tape_len: int) -> DilutionMachine:
    pat = set(dilution_pattern(n_bits, tape_len))
    return DilutionMachine(n_bits, tape_len, tuple(i in pat for i in range(tape_len)))


def dilute(x: str, tape_len: int) -> tuple[str, ...]:
    return build_dilution_tm(len(x), tape_len).run(x)[-1].tape


def injectivity_scan(tm: DilutionMachine, inputs: Iterable[str]) -> tuple[int, int]:
    """(reached configurations with a successor, distinct images); equal iff injective."""
    domain = set()
    for x in inputs:
        hist = tm.run(x)
        domain.update(hist[:-1])
    images = {tm.step(c) for c in domain}
    return len(domain), len(images)


# ---------------------------------------------------------------------------
# pebbling


@dataclass(frozen=True)
class PebbleSchedule:
    T: int
    pebbles: int
    moves: tuple[tuple[str, int], ...]

    def to_json(self) -> dict:
        return {"T": self.T, "pebbles": self.pebbles, "moves": [list(m) for m in self.moves]}


class InfeasibleError(DomainError):
    pass


def pebble_valid(T: int, pebbles: int, moves) -> bool:
    """Replay a schedule: checkpoint i may change only while i-1 is pebbled."""
    have = set()
    for op, i in moves:
        if not 1 <= i <= T or (i > 1 and i - 1 not in have):
            return False
        if op == "place":
            if i in have:
                return False
            have.add(i)
        elif op == "remove":
            if i not in have:
                return False
            have.remove(i)
        else:
            return False
        if len(have) > pebbles:
            return False
    return have == {T}


BFS_LIMIT = 16


def _bennett(lo: int, hi: int, p: int) -> list[tuple[str, int]]:
    """Pebble hi from a pebble on lo with p more pebbles; only lo and hi stay."""
    if hi == lo + 1:
        return [("place", hi)]
    mid = (lo + hi) // 2
    first = _bennett(lo, mid, p - 1)
    undo = [("remove" if op == "place" else "place", i) for op, i in reversed(first)]
    return first + _bennett(mid, hi, p - 1) + undo


def pebble_schedule(T: int, pebbles: int) -> PebbleSchedule:
    """Shortest schedule by breadth-first search (T <= 16), else Bennett's recursion."""
    if T < 1 or pebbles < 1:
        raise DomainError("need T >= 1 and pebbles >= 1")
    # halving: p pebbles reach 2^(p-1) checkpoints and no further
    if T > 1 << (pebbles - 1):
        raise InfeasibleError(f"{pebbles} pebbles reach at most checkpoint {1 << (pebbles - 1)}")
    if T > BFS_LIMIT:
        moves = _bennett(0, T, pebbles)
        return PebbleSchedule(T, pebbles, tuple(moves))
    goal = 1 << (T - 1)
    prev = {0: None}
    queue = deque([0])
    while queue:
        s = queue.popleft()
        if s == goal:
            break
        for i in range(1, T + 1):
            if i > 1 and not s >> (i - 2) & 1:
                continue
            t = s ^ (1 << (i - 1))
            if bin(t).count("1") > pebbles or t in prev:
                continue
            prev[t] = (s, ("place" if t > s else "remove", i))
            queue.append(t)
    if goal not in prev:
        raise InfeasibleError("no schedule")
    moves = []
    s = goal
    while prev[s] is not None:
        s, mv = prev[s]
        moves.append(mv)
    return PebbleSchedule(T, pebbles, tuple(reversed(moves)))


# ---------------------------------------------------------------------------
# phase pipeline


@dataclass(frozen=True)
class PipelineSnapshot:
    t: int
    stage: str
    input_track: tuple[str, ...]
    phase_bit: int
    aux: tuple


@dataclass
class PipelineRun:
    n: int
    tape_len: int
    table: np.ndarray
    branches: dict

    def final_state(self):
        """Tape state after the last step with the phase kicked back onto the input.

        Sites are the tape cells (blank -> |0>, bit -> |bit>); the ancilla in
        |-> factors out and the auxiliary tracks are x-independent.
        """
        from .phasestate import StateVector

        if self.tape_len > 24:
            raise RefusalError("tape too long to materialize")
        amps = np.zeros(1 << self.tape_len)
        for x, hist in self.branches.items():
            last = hist[-1]
            idx = int("".join("0" if c == DIL_BLANK else c for c in last.input_track), 2)
            amps[idx] += (-1) ** last.phase_bit
        return StateVector(self.tape_len, amps / math.sqrt(len(self.branches)))


def phase_pipeline(table, n: int, tape_len: int, pad_steps: int) -> PipelineRun:
    """Classical branches of superposition, function computation, dilution and padding.

    The function computation is a single reversible step XOR-ing s(x) into
    the phase register. Branch x carries aux = (head, state, memory, counter,
    pad counter), which must not depend on x once dilution is over.
    """
    t = np.asarray(table, dtype=np.uint8)
    if t.size != 1 << n:
        raise DomainError("table must have 2^n entries")
    tm = build_dilution_tm(n, tape_len)
    branches = {}
    for x in range(1 << n):
        xs = format(x, f"0{n}b")
        hist = [PipelineSnapshot(0, "superpose", tuple(xs) + (DIL_BLANK,) * (tape_len - n), 0, ("idle", pad_steps))]
        hist.append(PipelineSnapshot(1, "compute", hist[-1].input_track, int(t[x]), ("idle", pad_steps)))
        for c in tm.run(xs)[1:]:
            hist.append(PipelineSnapshot(len(hist), "dilute", c.tape, int(t[x]),
                                         (c.head, c.state, c.memory, c.counter, pad_steps)))
        for p in range(pad_steps - 1, -1, -1):
            prev = hist[-1]
            hist.append(PipelineSnapshot(len(hist), "pad", prev.input_track, prev.phase_bit, prev.aux[:-1] + (p,)))
        branches[xs] = hist
    return PipelineRun(n, tape_len, t, branches)
