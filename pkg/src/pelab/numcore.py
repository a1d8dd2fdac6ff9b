"""Integer arithmetic, primes and seeded randomness shared by the crypto modules."""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
import numpy as np


class DomainError(ValueError):
    """An argument lies outside the domain of an operation."""


class NotFoundError(LookupError):
    """A search over a finite range came back empty."""


class RefusalError(RuntimeError):
    """A request exceeds a hard size limit."""


# 40 Miller-Rabin rounds: error below 4^-40 = 2^-80.
MR_ROUNDS = 40


def to_hex(value: int) -> str:
    if value < 0:
        raise DomainError("negative value has no BigUint encoding")
    return hex(value)


def from_hex(text: str) -> int:
    if not text.startswith("0x"):
        raise DomainError(f"expected 0x-prefixed hex, got {text!r}")
    return int(text, 16)


class SeededRng:
    """Deterministic random stream from a 32-byte seed.

    The stream is numpy's PCG64 seeded from the seed bytes, so it does not
    depend on the platform word size. ``counter`` counts draw calls.
    """

    def __init__(self, seed: bytes | int | str = 0):
        if isinstance(seed, int):
            seed = seed.to_bytes(32, "big")
        elif isinstance(seed, str):
            seed = hashlib.sha256(seed.encode()).digest()
        if len(seed) != 32:
            seed = hashlib.sha256(seed).digest()
        self.seed = bytes(seed)
        self.counter = 0
        ss = np.random.SeedSequence(int.from_bytes(self.seed, "big"))
        self.gen = np.random.Generator(np.random.PCG64(ss))

    def spawn(self, label: str) -> SeededRng:
        """Independent child stream keyed by ``label``."""
        return SeededRng(hashlib.sha256(self.seed + label.encode()).digest())

    def getrandbits(self, k: int) -> int:
        self.counter += 1
        if k <= 0:
            return 0
        words = self.gen.integers(0, 1 << 32, size=(k + 31) // 32, dtype=np.uint64)
        value = 0
        for w in words:
            value = (value << 32) | int(w)
        return value >> (32 * len(words) - k)

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) by rejection."""
        if n <= 0:
            raise DomainError("randbelow needs n >= 1")
        k = n.bit_length()
        while True:
            v = self.getrandbits(k)
            if v < n:
                return v

    def integers(self, lo, hi, size=None):
        self.counter += 1
        return self.gen.integers(lo, hi, size=size)

    def random(self, size=None):
        self.counter += 1
        return self.gen.random(size)

    def normal(self, size=None):
        self.counter += 1
        return self.gen.standard_normal(size)

    def choice(self, a, size=None, p=None, replace=True):
        self.counter += 1
        return self.gen.choice(a, size=size, p=p, replace=replace)

    def permutation(self, x):
        self.counter += 1
        return self.gen.permutation(x)


def pow_mod(base: int, exp: int, modulus: int) -> int:
    if modulus < 2:
        raise DomainError("modulus must be >= 2")
    if exp < 0 or base < 0:
        raise DomainError("base and exponent must be non-negative")
    return pow(base, exp, modulus)


def is_probable_prime(n: int) -> bool:
    return n >= 2 and bool(gmpy2.is_prime(n, MR_ROUNDS))


def prime_in_range(lo: int, hi: int) -> int:
    """Smallest prime p with lo <= p <= hi."""
    if lo < 2 or lo > hi:
        raise DomainError("need 2 <= lo <= hi")
    p = lo if is_probable_prime(lo) else int(gmpy2.next_prime(lo))
    if p > hi:
        raise NotFoundError(f"no prime in [{lo}, {hi}]")
    return p


@dataclass(frozen=True)
class RsaModulus:
    N: int
    P: int
    Q: int

    @property
    def bit_length(self) -> int:
        return self.N.bit_length()

    def __post_init__(self):
        if self.P * self.Q != self.N or self.P == self.Q:
            raise DomainError("N must be a product of distinct primes")
        if math.gcd(self.N, (self.P - 1) * (self.Q - 1)) != 1:
            raise DomainError("gcd(N, phi(N)) != 1")


@lru_cache(maxsize=None)
def _small_moduli(bits: int) -> tuple[tuple[int, int], ...]:
    lo, hi = 1 << (bits - 1), (1 << bits) - 1
    primes = [p for p in range(3, hi // 3 + 1, 2) if is_probable_prime(p)]
    out = []
    for i, p in enumerate(primes):
        for q in primes[i + 1:]:
            n = p * q
            if n > hi:
                break
            if n >= lo and math.gcd(n, (p - 1) * (q - 1)) == 1:
                out.append((p, q))
    return tuple(out)


def _random_prime(bits: int, rng: SeededRng) -> int:
    while True:
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if is_probable_prime(cand):
            return cand


def sample_rsa_modulus(bits: int, rng: SeededRng) -> RsaModulus:
    """Admissible modulus N = PQ with exactly ``bits`` bits.

    Small sizes enumerate every admissible pair and pick one uniformly.
    """
    if bits < 4:
        raise DomainError("no admissible modulus below 4 bits")
    if bits <= 20:
        pairs = _small_moduli(bits)
        if not pairs:
            raise DomainError(f"no admissible {bits}-bit modulus")
        p, q = pairs[rng.randbelow(len(pairs))]
        return RsaModulus(p * q, p, q)
    pbits = bits // 2
    while True:
        p = _random_prime(pbits, rng)
        q = _random_prime(bits - pbits + rng.randbelow(2), rng)
        n = p * q
        if p != q and n.bit_length() == bits and math.gcd(n, (p - 1) * (q - 1)) == 1:
            return RsaModulus(n, p, q)


@lru_cache(maxsize=256)
def gaussian_table(sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Support and exact probabilities of the truncated discrete Gaussian."""
    if sigma <= 0:
        raise DomainError("sigma must be positive")
    t = math.ceil(10 * sigma)
    xs = np.arange(-t, t + 1)
    w = np.exp(-(xs.astype(float) ** 2) / (2 * sigma * sigma))
    return xs, w / w.sum()


def sample_discrete_gaussian(sigma: float, q: int, rng: SeededRng, size=None):
    """Draw from exp(-x^2 / 2 sigma^2) on [-ceil(10 sigma), ceil(10 sigma)], mod q."""
    if q < 2:
        raise DomainError("q must be >= 2")
    xs, p = gaussian_table(float(sigma))
    draw = rng.choice(xs, size=size, p=p)
    if size is None:
        return int(draw) % q
    return np.mod(draw, q)
