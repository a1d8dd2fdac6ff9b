import itertools
import json
import math
from fractions import Fraction

import numpy as np
import pytest

from pelab.hamiltonian import (
    HamiltonianSpec,
    LocalTerm,
    apply,
    branch,
    build_hamiltonian,
    embed_snake,
    energy,
    gap_report,
    ground_space_angle,
    history_state,
    inner,
    kitaev_bound,
    norm,
    path_matrix,
    residual,
    restrict,
    sample_invalid,
    spectra_csv,
    spectrum,
    term_apply,
)
from pelab.machine import (
    BLANK,
    LEFTEND,
    RIGHT,
    RIGHTEND,
    VISITED,
    MachineConfig,
    hadamard_machine,
    initial_config,
    single_step_machine,
    toggle_machine,
    validate,
)
from pelab.numcore import DomainError, SeededRng


@pytest.fixture(scope="module")
def toggle():
    return build_hamiltonian(3, 1, toggle_machine(), "010")


@pytest.fixture(scope="module")
def quantum():
    return build_hamiltonian(3, 1, hadamard_machine(), "011")


def _real(x):
    return float(np.real(complex(x)))


# -- H_valid ---------------------------------------------------------------


def test_valid_nullspace_matches_validate_per_track():
    # H_valid and validate both split over tracks, so each track is
    # enumerated over every symbol string with the other tracks held valid.
    H = build_hamiltonian(2, 1, toggle_machine(), "01")
    Hv = H.select("valid")
    lay = H.layout
    base = initial_config(lay, "01")
    for t in range(lay.tracks):
        alpha = lay.alphabet(t) + (LEFTEND, RIGHTEND)
        for row in itertools.product(alpha, repeat=lay.n + 2):
            sites = tuple(s[:t] + (x,) + s[t + 1:] for s, x in zip(base.sites, row))
            cfg = MachineConfig(sites)
            e = _real(energy(Hv, cfg))
            if validate(lay, cfg):
                assert e >= 1
            else:
                assert e == 0


def test_initial_config_has_zero_valid_energy(toggle):
    cfg = initial_config(toggle.layout, "010")
    assert energy(toggle.select("valid"), cfg) == 0


def test_single_violation_costs_at_least_one(toggle):
    cfg = initial_config(toggle.layout, "010")
    # a second clock arrow after the first
    bad = cfg.replace(2, cfg.sites[2][:1] + (RIGHT,) + cfg.sites[2][2:], cfg.sites[3])
    assert validate(toggle.layout, bad)
    assert _real(energy(toggle.select("valid"), bad)) >= 1
    # a visited cell to the right of the head
    bad = cfg.replace(2, (VISITED,) + cfg.sites[2][1:], cfg.sites[3])
    assert _real(energy(toggle.select("valid"), bad)) >= 1


def test_valid_kills_history(toggle):
    for sup in branch(toggle, "010"):
        assert apply(toggle.select("valid"), sup) == {}


def test_invalid_floor(toggle):
    rng = SeededRng(5)
    for c in sample_invalid(toggle.layout, 100, rng):
        assert _real(energy(toggle, c)) >= 1


# -- H_transition ----------------------------------------------------------


def test_single_step_toy_block():
    H = build_hamiltonian(2, 1, single_step_machine(), "00")
    hist = branch(H, "00")
    (c0, _), = hist[0].items()
    i = H.rules.window_of(c0)
    one = HamiltonianSpec(H.layout, H.rules, H.w_star, [LocalTerm("transition", (i, i + 1))])
    R = restrict(one, hist[:2])
    assert np.allclose(R.matrix, [[0.5, -0.5], [-0.5, 0.5]], atol=0)


@pytest.mark.parametrize("which", ["toggle", "quantum"])
def test_restricted_block_is_path(which, request):
    H = request.getfixturevalue(which)
    hist = branch(H, H.w_star)
    R = restrict(H, hist)
    assert R.dim == len(hist)
    assert R.leakage <= 1e-12
    assert R.is_hermitian()
    assert np.max(np.abs(R.matrix - path_matrix(R.dim))) <= 1e-12


def test_off_path_elements_vanish(toggle):
    hist = branch(toggle, "010")
    Ht = toggle.select("transition")
    for s, u in enumerate(hist):
        hu = apply(Ht, u)
        for t, v in enumerate(hist):
            if abs(s - t) > 1:
                assert inner(v, hu) == 0


def test_exact_mode_is_integer_exact():
    H = build_hamiltonian(3, 1, toggle_machine(), "010", exact=True)
    R = restrict(H, branch(H, "010"))
    T = R.dim
    for s in range(T):
        for t in range(T):
            assert isinstance(R.matrix[s, t], (Fraction, int))
            assert R.matrix[s, t] == Fraction(path_matrix(T)[s, t]).limit_denominator(2)


def test_blocks_do_not_couple(toggle):
    a = branch(toggle, "010")
    b = branch(toggle, "110")
    for u in a[::3]:
        hu = apply(toggle, u)
        for v in b:
            assert abs(inner(v, hu)) <= 1e-12


# -- H_input ---------------------------------------------------------------


def test_input_energy_zero_on_w_star(toggle):
    Hi = toggle.select("input")
    for sup in branch(toggle, "010"):
        assert apply(Hi, sup) == {}


@pytest.mark.parametrize("c", [1, 2, 3])
def test_flipped_bit_fires_once_at_init(toggle, c):
    w = list("010")
    w[c - 1] = "1" if w[c - 1] == "0" else "0"
    Hi = toggle.select("input")
    hits = []
    for t, sup in enumerate(branch(toggle, "".join(w))):
        (cfg, _), = sup.items()
        fired = [term.sites for term in Hi.terms if term_apply(Hi, term, cfg)]
        if fired:
            hits.append((t, fired))
    assert hits == [(c - 1, [(c,)])]


def test_wrong_input_blocks_have_positive_energy(toggle, quantum):
    for H in (toggle, quantum):
        R0 = restrict(H, branch(H, H.w_star))
        e0 = spectrum(R0, 1)[0]
        for w in ("000", "111", "100"):
            if w == H.w_star:
                continue
            e = spectrum(restrict(H, branch(H, w)), 1)[0]
            assert e > 1e-6 and e > e0


# -- apply -----------------------------------------------------------------


def _sparse(rng, configs):
    return {c: complex(rng.normal(), rng.normal()) for c in configs}


def test_apply_linear(quantum):
    rng = np.random.default_rng(2)
    hist = branch(quantum, "011")
    pool = [c for sup in hist[:12] for c in sup]
    pool += sample_invalid(quantum.layout, 5, SeededRng(1))
    u = _sparse(rng, pool[::2])
    v = _sparse(rng, pool[1::2])
    a, b = 0.7 - 0.2j, -1.3 + 0.5j
    mix = dict(u)
    for c, x in v.items():
        mix[c] = a * mix.get(c, 0) + b * x if c in u else b * x
    for c in u:
        if c not in v:
            mix[c] = a * u[c]
    left = apply(quantum, mix)
    hu, hv = apply(quantum, u), apply(quantum, v)
    for c in set(left) | set(hu) | set(hv):
        assert abs(left.get(c, 0) - (a * hu.get(c, 0) + b * hv.get(c, 0))) <= 1e-12


def _window_space(H, i, seeds):
    """All window contents reachable from seeds by forward and backward rules."""
    rs = H.rules
    seen, todo = set(), list(seeds)
    while todo:
        p = todo.pop()
        if p in seen:
            continue
        seen.add(p)
        for l2, r2, _ in rs.local(i, *p) or []:
            todo.append((l2, r2))
        for l0, r0, _ in rs.preimages(i, *p):
            todo.append((l0, r0))
    return sorted(seen)


@pytest.mark.parametrize("which", ["toggle", "quantum"])
def test_transition_term_matches_dense(which, request):
    H = request.getfixturevalue(which)
    rs = H.rules
    hist = branch(H, H.w_star)
    for i in range(H.layout.n + 1):
        seeds = {(c.sites[i], c.sites[i + 1]) for sup in hist for c in sup}
        space = _window_space(H, i, seeds)
        idx = {p: j for j, p in enumerate(space)}
        d = len(space)
        K = np.zeros((d, d), dtype=complex)
        P = np.zeros((d, d))
        for p in space:
            outs = rs.local(i, *p)
            if outs is None:
                continue
            P[idx[p], idx[p]] = 1
            for l2, r2, a in outs:
                K[idx[(l2, r2)], idx[p]] += a
        h = 0.5 * (P + K @ K.conj().T - K - K.conj().T)
        assert np.linalg.eigvalsh(h).min() >= -1e-12
        term = LocalTerm("transition", (i, i + 1))
        base = next(iter(hist[0]))
        for p in space:
            cfg = base.replace(i, *p)
            col = np.zeros(d, dtype=complex)
            for c2, a in term_apply(H, term, cfg):
                col[idx[(c2.sites[i], c2.sites[i + 1])]] += a
            assert np.max(np.abs(col - h[:, idx[p]])) <= 1e-12


# -- history states ----------------------------------------------------------


@pytest.mark.parametrize("which", ["toggle", "quantum"])
def test_history_state_is_ground_state(which, request):
    H = request.getfixturevalue(which)
    psi = history_state(H, initial_config(H.layout, H.w_star))
    assert abs(norm(psi) - 1) <= 1e-12
    assert residual(H) <= 1e-9


def test_classical_overlap_uniform(toggle):
    psi = history_state(toggle, initial_config(toggle.layout, "010"))
    T = len(psi)
    assert T == 21
    for a in psi.values():
        assert abs(a - 1 / math.sqrt(T)) <= 1e-15


def test_history_truncation(toggle):
    psi = history_state(toggle.rules, initial_config(toggle.layout, "010"), T=4)
    assert len(psi) == 4 and abs(norm(psi) - 1) <= 1e-12


# -- spectra ---------------------------------------------------------------


def test_path_matrix_T4_spectrum():
    w = spectrum(path_matrix(4), 4)
    assert np.allclose(w, [0, 0.2928932188134524, 1, 1.7071067811865475], atol=1e-12)


def test_path_ground_vector_uniform():
    w, V = spectrum(path_matrix(9), 1, vectors=True)
    v = V[:, 0] * np.sign(V[0, 0])
    assert np.allclose(v, 1 / 3, atol=1e-12)


@pytest.mark.parametrize("T", [2, 3, 21, 100, 512])
def test_path_gap_closed_form(T):
    w = spectrum(path_matrix(T), 2)
    assert abs(w[1] - w[0] - (1 - math.cos(math.pi / T))) <= 1e-9


def test_iterative_branch_agrees_with_dense():
    w = spectrum(path_matrix(2100), 2)
    assert abs(w[0]) <= 1e-9
    assert abs(w[1] - (1 - math.cos(math.pi / 2100))) <= 1e-9


@pytest.mark.parametrize("machine,n,k,T", [
    ("toggle", 3, 1, 21), ("toggle", 4, 1, 36), ("hadamard", 6, 1, 78),
    ("toggle", 8, 1, 136), ("toggle", 3, 2, 57), ("hadamard", 4, 2, 156), ("toggle", 5, 2, 335),
])
def test_machine_gap_matches_path(machine, n, k, T):
    m = toggle_machine() if machine == "toggle" else hadamard_machine()
    w = "01" * n
    H = build_hamiltonian(n, k, m, w[:n])
    R = restrict(H, branch(H, w[:n]))
    assert R.dim == T
    ev = spectrum(R, 2)
    assert abs(ev[0]) <= 1e-9
    assert abs(ev[1] - ev[0] - (1 - math.cos(math.pi / T))) <= 1e-9


def test_kitaev_bound_trivial():
    assert kitaev_bound(0.3, 0.4, 5.0, 0.0) == pytest.approx(0.7)
    assert kitaev_bound(0.3, 0.4, 1.0, math.pi) == pytest.approx(2.7)


def test_kitaev_bound_below_true_ground(toggle):
    basis = branch(toggle, "110")
    A = np.real(restrict(toggle.select("transition"), basis).matrix)
    B = np.real(restrict(toggle.select("input"), basis).matrix)
    wa, Va = np.linalg.eigh(A)
    wb, Vb = np.linalg.eigh(B)
    Ga = Va[:, wa <= 1e-9]
    Gb = Vb[:, wb <= 1e-9]
    lam = min(wa[wa > 1e-9].min(), wb[wb > 1e-9].min())
    theta = ground_space_angle(Ga, Gb)
    assert theta > 0
    true = np.linalg.eigvalsh(A + B)[0]
    assert kitaev_bound(0, 0, lam, theta) <= true + 1e-12


def test_gap_report(toggle):
    rep = gap_report(toggle, samples=4, invalid=100, seed=3)
    assert abs(rep["ground_energy"]) <= 1e-12
    assert rep["gap"] >= 1e-4
    assert abs(rep["gap"] - rep["path_gap"]) <= 1e-9
    assert rep["leakage"] <= 1e-12
    assert rep["other_blocks"]
    assert all(b["ground_energy"] > rep["ground_energy"] for b in rep["other_blocks"])
    assert rep["invalid_floor"] >= 1


def test_spectra_csv():
    text = spectra_csv([0.0, 0.5])
    assert text.splitlines() == ["index,eigenvalue", "0,0", "1,0.5"]


# -- geometry and serialization ------------------------------------------------


def test_terms_are_local(toggle):
    for t in toggle.terms:
        assert len(t.sites) in (1, 2)
        if len(t.sites) == 2:
            assert t.sites[1] == t.sites[0] + 1
        assert 0 <= min(t.sites) and max(t.sites) < toggle.n_sites


def test_snake_embedding(toggle):
    G = embed_snake(toggle, 3)
    assert G.geometry == "grid"
    assert len(set(G.coords.values())) == G.n_sites
    for t in G.terms:
        if len(t.sites) == 2:
            (r1, c1), (r2, c2) = (G.coords[s] for s in t.sites)
            assert abs(r1 - r2) + abs(c1 - c2) == 1
    assert residual(G) <= 1e-9
    with pytest.raises(DomainError):
        embed_snake(toggle, 2)


def test_json_roundtrip(quantum):
    d = json.loads(json.dumps(quantum.to_json(), ensure_ascii=False))
    H2 = HamiltonianSpec.from_json(d)
    assert H2.terms == quantum.terms
    assert H2.local_dims() == quantum.local_dims()
    assert residual(H2) <= 1e-9


def test_input_length_checked():
    with pytest.raises(DomainError):
        build_hamiltonian(3, 1, toggle_machine(), "01")
