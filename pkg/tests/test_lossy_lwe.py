import itertools

import numpy as np
import pytest
from scipy.stats import chisquare

from pelab.lossy_lwe import (
    LweKey,
    LweParams,
    border_set,
    lwe_census,
    lwe_eval,
    lwe_eval_all,
    lwe_keygen,
    row_norm_bound_check,
    shifted_round,
    theorem_modulus,
    zero_margin,
)
from pelab.numcore import DomainError, SeededRng, sample_discrete_gaussian


def test_round_identity_when_q_equals_p():
    assert [shifted_round(x, 17, 17) for x in range(17)] == list(range(17))


def test_round_bin_of_extremes():
    # q=37, p=17: c=2, shift 1; x=0 -> y=1 -> bin 0, x=36 -> y=0 -> bin 0
    assert shifted_round(0, 37, 17) == 0
    assert shifted_round(36, 37, 17) == 0


def test_round_bins_near_even():
    q, p = 4099, 17
    sizes = np.bincount(shifted_round(np.arange(q), q, p), minlength=p)
    assert sizes.max() - sizes.min() <= 1


def test_lossy_keys_low_rank_without_noise():
    params = LweParams(6, 1, 97, 1e-6)
    key = lwe_keygen(params, "lossy", SeededRng(3))
    A = key.A % 97
    for (i, j), (k, l) in itertools.product(itertools.combinations(range(6), 2), repeat=2):
        assert (A[i, k] * A[j, l] - A[i, l] * A[j, k]) % 97 == 0


def test_keygen_deterministic():
    p = LweParams.theorem(6, 2)
    assert np.array_equal(lwe_keygen(p, "injective", SeededRng(2)).A, lwe_keygen(p, "injective", SeededRng(2)).A)


def test_injective_entries_uniform():
    p = LweParams(8, 2, 97, 2.0)
    rng = SeededRng(8)
    entries = np.concatenate([lwe_keygen(p, "injective", rng).A.ravel() for _ in range(157)])
    assert entries.size >= 10_000
    assert chisquare(np.bincount(entries, minlength=97)).pvalue > 0.001


def test_eval_zero_input():
    key = lwe_keygen(LweParams(5, 2, 97, 2.0), "injective", SeededRng(0))
    assert lwe_eval(key, 0) == (shifted_round(0, 97, 17),) * 5


def test_zero_matrix_constant():
    key = LweKey(LweParams(5, 2, 97, 2.0), np.zeros((5, 5), dtype=np.int64))
    assert lwe_census(key) == 1


def _straight_line(A, x, n, q, p):
    out = []
    c = q // p
    for i in range(n):
        acc = 0
        for j in range(n):
            bit = (x >> (n - 1 - j)) & 1
            acc += int(A[i][j]) * bit
        y = (acc + c // 2) % q
        out.append(y * p // q)
    return tuple(out)


def test_eval_against_straight_line():
    n, q = 10, 4099
    key = lwe_keygen(LweParams(n, 2, q, 2.0), "injective", SeededRng(6))
    rng = SeededRng(7)
    A = key.A.tolist()
    for _ in range(1000):
        x = rng.getrandbits(n)
        assert lwe_eval(key, x) == _straight_line(A, x, n, q, 17)
    allv = lwe_eval_all(key)
    assert tuple(allv[123]) == lwe_eval(key, 123)


def test_row_norm_check():
    assert row_norm_bound_check(np.zeros((3, 3)), 1)
    assert not row_norm_bound_check(np.array([[0, 2], [0, 0]]), 2)


def test_row_norm_tail():
    n, sigma, q = 12, 2.0, 4099
    rng = SeededRng(9)
    ok = 0
    for _ in range(1000):
        E = sample_discrete_gaussian(sigma, q, rng, size=(n, n)).astype(np.int64)
        E = np.where(E > q // 2, E - q, E)
        ok += row_norm_bound_check(E, 2 * n * sigma)
    assert ok / 1000 >= 1 - 2.0 ** -n


def test_theorem_modulus_in_regime():
    for n, lam in [(6, 2), (10, 4), (14, 2)]:
        q = theorem_modulus(n, lam)
        assert not any("regime" in w for w in LweParams.theorem(n, lam).warnings())
        assert 8 * 17 * n * n * lam ** 0.5 <= q <= 16 * 17 * n * n * lam ** 0.5


def test_border_set_size():
    q, p = 4099, 17
    for beta in (1, 5, 20):
        assert border_set(q, p, beta).sum() == 2 * p * beta


def test_zero_margin():
    # bin of 0 in Z_37 with 17 bins is {36, 0, 1}
    assert zero_margin(37) == 2


def test_params_validation():
    with pytest.raises(DomainError):
        LweParams(4, 2, 97, 2.0, p=16)
    with pytest.raises(DomainError):
        LweParams(4, 2, 97, 0.0)


def test_injective_theorem_keys_collision_free():
    n = 8
    p = LweParams.theorem(n, 2)
    bad = sum(lwe_census(lwe_keygen(p, "injective", SeededRng(s))) != 1 << n for s in range(20))
    assert bad <= 1
