"""Lossy functions from decisional composite residuosity (Damgard-Jurik).

Keys are (N, s, c) and evaluation is x -> c^x mod N^(s+1). Injective keys put
a factor (1+N) in c, which has order N^s; lossy keys are pure N^s-th powers,
so every image lies in a subgroup of order dividing phi(N).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .numcore import (
    DomainError,
    RefusalError,
    SeededRng,
    from_hex,
    pow_mod,
    sample_rsa_modulus,
    to_hex,
)

CENSUS_LIMIT = 22
TOY_LAMBDA = 512


@dataclass(frozen=True)
class DcraParams:
    n: int
    lam: int
    s: int

    def __post_init__(self):
        if self.s < 1:
            raise DomainError("s must be >= 1")
        if self.n < 1:
            raise DomainError("n must be >= 1")
        if 2 * self.lam * self.s <= self.n:
            raise DomainError("need 2*lambda*s > n")
        if self.lam < 4:
            raise DomainError("no admissible modulus below 4 bits")

    @classmethod
    def for_input(cls, n: int, lam: int) -> DcraParams:
        """Smallest s that makes N^s >= 2^n for every lam-bit modulus."""
        return cls(n, lam, max(1, -(-n // (lam - 1))))


@dataclass(frozen=True)
class DcraKey:
    params: DcraParams
    N: int
    c: int
    mode_hint: str = field(default="unknown", compare=False)

    @property
    def s(self) -> int:
        return self.params.s

    @property
    def modulus(self) -> int:
        return self.N ** (self.s + 1)

    @property
    def out_bits(self) -> int:
        return (self.modulus - 1).bit_length()

    @property
    def key_bits(self) -> int:
        return self.N.bit_length() + self.out_bits

    def to_json(self) -> dict:
        return {
            "n": self.params.n,
            "lambda": self.params.lam,
            "s": self.s,
            "N": to_hex(self.N),
            "c": to_hex(self.c),
            "toy": self.params.lam < TOY_LAMBDA,
        }

    @classmethod
    def from_json(cls, d: dict) -> DcraKey:
        return cls(DcraParams(d["n"], d["lambda"], d["s"]), from_hex(d["N"]), from_hex(d["c"]))


def dcra_key_from(params: DcraParams, N: int, r: int, mode: str) -> DcraKey:
    """Assemble a key from an explicit modulus and randomizer."""
    if mode not in ("injective", "lossy"):
        raise DomainError(f"unknown mode {mode!r}")
    if math.gcd(r, N) != 1:
        raise DomainError("r must be a unit mod N")
    mod = N ** (params.s + 1)
    c = pow_mod(r, N ** params.s, mod)
    if mode == "injective":
        if N ** params.s < 1 << params.n:
            raise DomainError("injective keys need N^s >= 2^n")
        c = (1 + N) * c % mod
    return DcraKey(params, N, c, mode)


def dcra_keygen(params: DcraParams, mode: str, rng: SeededRng, force_r: int | None = None) -> DcraKey:
    for _ in range(64):
        N = sample_rsa_modulus(params.lam, rng).N
        if mode == "lossy" or N ** params.s >= 1 << params.n:
            break
    else:
        raise DomainError("no modulus satisfies N^s >= 2^n; increase s")
    if force_r is None:
        r = 0
        while math.gcd(r, N) != 1:
            r = 1 + rng.randbelow(N - 1)
    else:
        r = force_r
    return dcra_key_from(params, N, r, mode)


def dcra_eval(key: DcraKey, x: int) -> int:
    """c^x mod N^(s+1); the same code path serves both branches."""
    if x < 0 or x >> key.params.n:
        raise DomainError(f"input must fit in {key.params.n} bits")
    return pow(key.c, x, key.modulus)


def dcra_eval_bits(key: DcraKey, x: str) -> str:
    """Bit-string form: n input bits to out_bits big-endian output bits."""
    if len(x) != key.params.n:
        raise DomainError(f"expected {key.params.n} input bits")
    return format(dcra_eval(key, int(x, 2)), f"0{key.out_bits}b")


def image_census(eval_fn: Callable[[int], object], n: int) -> int:
    """Exact number of distinct outputs of ``eval_fn`` over all n-bit inputs."""
    if n > CENSUS_LIMIT:
        raise RefusalError(f"census over 2^{n} inputs refused (limit 2^{CENSUS_LIMIT})")
    return len({eval_fn(x) for x in range(1 << n)})


def multiplicative_order(c: int, mod: int) -> int:
    """Order of c in Z*_mod by brute force (toy sizes only)."""
    if math.gcd(c, mod) != 1:
        raise DomainError("c is not a unit")
    k, y = 1, c % mod
    while y != 1:
        y = y * c % mod
        k += 1
    return k
