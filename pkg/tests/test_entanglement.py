import math

import numpy as np
import pytest

from pelab.entanglement import (
    binary_entropy,
    continuity_bound,
    cut_entropy,
    cutwise_orthogonal,
    entropy,
    entropy_bounds,
    entropy_profile,
    profile_csv,
    pure_trace_distance,
    reduced_density,
    superposed_entropy,
    t_matrix,
)
from pelab.numcore import SeededRng
from pelab.phasestate import PhaseOracle, StateVector, materialize, sample_tree_key


def basis(n, x):
    v = np.zeros(2 ** n)
    v[x] = 1.0
    return StateVector(n, v)


def kron(*vs):
    out = np.array([1.0])
    for v in vs:
        out = np.kron(out, v)
    return out


BELL = np.array([1, 0, 0, 1]) / math.sqrt(2)


def test_product_state_rank_one():
    rho = reduced_density(StateVector(3, kron([1, 0], [0.6, 0.8], [0, 1])), [0, 1])
    assert np.linalg.matrix_rank(rho, tol=1e-12) == 1


def test_bell_reduced_is_half_identity():
    assert np.allclose(reduced_density(StateVector(2, BELL), [0]), np.eye(2) / 2)


def test_ghz_reduced():
    ghz = np.zeros(8)
    ghz[0] = ghz[7] = 1 / math.sqrt(2)
    # hand partial trace over the last qubit
    assert np.allclose(reduced_density(StateVector(3, ghz), [0, 1]), np.diag([0.5, 0, 0, 0.5]))


def test_entropy_values():
    assert entropy(np.diag([1.0, 0.0])) == pytest.approx(0.0, abs=1e-12)
    assert entropy(np.eye(8) / 8) == pytest.approx(3.0)
    assert entropy(np.diag([0.75, 0.25])) == pytest.approx(0.8112781244591328, abs=1e-12)


def test_t_matrix_small():
    assert np.array_equal(t_matrix(PhaseOracle.from_table([0, 0, 0, 0]), [0]), np.ones((2, 2)))
    assert np.array_equal(t_matrix(PhaseOracle.from_table([0, 0, 0, 1]), [0]), [[1, 1], [1, -1]])


def test_t_matrix_row_by_row():
    rng = SeededRng(1)
    n = 10
    table = rng.integers(0, 2, size=1 << n).astype(np.uint8)
    sites = [0, 3, 4, 8]
    rest = [s for s in range(n) if s not in sites]
    T = t_matrix(PhaseOracle.from_table(table), sites)
    for r in range(1 << len(sites)):
        for c in range(1 << len(rest)):
            x = 0
            for k, s in enumerate(sites):
                x |= ((r >> (len(sites) - 1 - k)) & 1) << (n - 1 - s)
            for k, s in enumerate(rest):
                x |= ((c >> (len(rest) - 1 - k)) & 1) << (n - 1 - s)
            assert T[r, c] == 1 - 2 * int(table[x])


def test_entropy_bounds_small():
    assert entropy_bounds(np.ones((2, 2))) == pytest.approx((0.0, 0.0), abs=1e-12)
    assert entropy_bounds(np.array([[1, 1], [1, -1]])) == pytest.approx((1.0, 1.0))


def test_entropy_bounds_sandwich_sample():
    rng = SeededRng(2)
    for _ in range(20):
        n = int(rng.integers(2, 9))
        orc = PhaseOracle.from_table(rng.integers(0, 2, size=1 << n))
        psi = materialize(orc)
        for c in range(1, n):
            lo, hi = entropy_bounds(t_matrix(orc, range(c)))
            s = cut_entropy(psi, range(c))
            assert lo - 1e-9 <= s <= hi + 1e-9


def test_cutwise_orthogonal_examples():
    assert cutwise_orthogonal(basis(2, 0), basis(2, 3), [0])
    assert cutwise_orthogonal(basis(2, 0), basis(2, 3), [1])
    assert not cutwise_orthogonal(basis(2, 0), basis(2, 1), [0])


def test_superposed_entropy_formula():
    assert superposed_entropy(0, 0) == 1
    assert superposed_entropy(2, 4) == 4


def test_superposed_entropy_exact_pair():
    # qubits 0,1 in A; indicator qubits 1 (A) and 3 (B) separate the branches
    one, zero = np.array([0, 1.0]), np.array([1.0, 0])
    phi0 = np.einsum("ac,b,d->abcd", BELL.reshape(2, 2), zero, zero).ravel()
    w = np.array([0.8, 0.6])
    phi1 = np.einsum("a,b,c,d->abcd", w, one, w, one).ravel()
    psi0, psi1 = StateVector(4, phi0), StateVector(4, phi1)
    A = [0, 1]
    assert cutwise_orthogonal(psi0, psi1, A)
    s0, s1 = cut_entropy(psi0, A), cut_entropy(psi1, A)
    sup = StateVector(4, (phi0 + phi1) / math.sqrt(2))
    assert abs(cut_entropy(sup, A) - superposed_entropy(s0, s1)) <= 1e-10
    assert s0 == pytest.approx(1.0) and s1 == pytest.approx(0.0, abs=1e-12)


def test_continuity_bound_formula():
    assert continuity_bound(0, 3) == 0
    assert continuity_bound(1, 1) == pytest.approx(2 + 2 * binary_entropy(0.5))
    assert continuity_bound(1, 1) == pytest.approx(4)


def test_continuity_random_pairs():
    rng = SeededRng(3)
    for _ in range(100):
        n = 6
        v = rng.normal(2 ** n) + 1j * rng.normal(2 ** n)
        v /= np.linalg.norm(v)
        w = v + 0.05 * (rng.normal(2 ** n) + 1j * rng.normal(2 ** n))
        w /= np.linalg.norm(w)
        psi, phi = StateVector(n, v), StateVector(n, w)
        eps = pure_trace_distance(psi, phi)
        ds = abs(cut_entropy(psi, [0, 1]) - cut_entropy(phi, [0, 1]))
        assert ds <= continuity_bound(eps, 2)


def test_profile_product_and_bells():
    prof = entropy_profile(StateVector(4, kron([1, 0], [1, 0], [0, 1], [1, 0])))
    assert all(abs(s) < 1e-12 for _, s in prof)
    prof = entropy_profile(StateVector(4, np.kron(BELL, BELL)))
    assert [c for c, _ in prof] == [1, 2, 3]
    assert np.allclose([s for _, s in prof], [1, 0, 1], atol=1e-12)


def test_profile_csv_header():
    assert profile_csv([(1, 0.5)]).splitlines()[0] == "cut,entropy_bits"


def test_high_tree_profile_tracks_volume():
    # the tree needs a power-of-two n, so the volume check runs at n = 16
    key = sample_tree_key(16, 2, "high", SeededRng(0))
    prof = dict(entropy_profile(materialize(PhaseOracle(16, "tree", key))))
    for c in range(4, 13):
        assert prof[c] >= min(c, 16 - c) - 3
