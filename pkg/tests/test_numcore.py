import math

import numpy as np
import pytest

from pelab.numcore import (
    DomainError,
    NotFoundError,
    SeededRng,
    from_hex,
    gaussian_table,
    pow_mod,
    prime_in_range,
    sample_discrete_gaussian,
    sample_rsa_modulus,
    to_hex,
)


def test_pow_mod_binomial_identity():
    # (1 + 15)^2 = 1 + 2 * 15 mod 15^2
    assert pow_mod(16, 2, 225) == 31


def test_pow_mod_zero_exponent():
    assert pow_mod(2, 0, 7) == 1


def test_pow_mod_against_schoolbook():
    # frozen from repeated multiply-and-reduce
    assert pow_mod(143, 3, 225) == 107


def test_pow_mod_rejects_bad_modulus():
    with pytest.raises(DomainError):
        pow_mod(2, 3, 1)


def test_hex_roundtrip():
    assert to_hex(255) == "0xff"
    assert from_hex("0xff") == 255
    with pytest.raises(DomainError):
        from_hex("ff")
    with pytest.raises(DomainError):
        to_hex(-1)


def test_rsa_modulus_four_bits_is_fifteen():
    for seed in range(5):
        m = sample_rsa_modulus(4, SeededRng(seed))
        assert (m.N, m.P, m.Q) == (15, 3, 5)
        assert math.gcd(15, 8) == 1


def test_rsa_modulus_six_bits_admissible_set():
    # 6-bit products of distinct odd primes: 33 35 39 51 55 57; gcd(N, phi) = 1 keeps 33 35 51
    seen = {sample_rsa_modulus(6, SeededRng(s)).N for s in range(60)}
    assert seen == {33, 35, 51}


def test_rsa_modulus_deterministic():
    a = sample_rsa_modulus(64, SeededRng(7))
    b = sample_rsa_modulus(64, SeededRng(7))
    assert a == b
    assert a.N.bit_length() == 64


def test_prime_in_range():
    assert prime_in_range(8, 16) == 11
    assert prime_in_range(2, 2) == 2
    with pytest.raises(NotFoundError):
        prime_in_range(24, 28)


def test_gaussian_vanishing_width():
    draws = sample_discrete_gaussian(0.001, 97, SeededRng(1), size=10_000)
    assert np.mean(draws == 0) > 0.999


def test_gaussian_variance():
    xs, p = gaussian_table(2.0)
    exact = float(np.sum(xs.astype(float) ** 2 * p))
    assert exact == pytest.approx(4.0, abs=1e-9)
    draws = sample_discrete_gaussian(2.0, 97, SeededRng(2), size=100_000)
    centred = np.where(draws > 48, draws - 97, draws)
    assert abs(np.var(centred) - exact) < 0.1 * exact


def test_gaussian_reproducible():
    a = sample_discrete_gaussian(3.0, 101, SeededRng(5), size=50)
    b = sample_discrete_gaussian(3.0, 101, SeededRng(5), size=50)
    assert np.array_equal(a, b)


def test_rng_seed_forms():
    assert SeededRng(3).getrandbits(64) == SeededRng(3).getrandbits(64)
    assert SeededRng("x").getrandbits(64) != SeededRng("y").getrandbits(64)
    r = SeededRng(0)
    assert all(0 <= r.randbelow(10) < 10 for _ in range(100))
