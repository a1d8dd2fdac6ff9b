"""r-wise independent hash functions as random polynomials over GF(2^w)."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .numcore import DomainError, SeededRng, from_hex, to_hex

MAX_WIDTH = 128


def _deg(a: int) -> int:
    return a.bit_length() - 1


def clmul(a: int, b: int) -> int:
    """Carry-less product of two GF(2)[X] polynomials packed as ints."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_mod(a: int, f: int) -> int:
    df = _deg(f)
    while a and _deg(a) >= df:
        a ^= f << (_deg(a) - df)
    return a


def _poly_gcd(a: int, b: int) -> int:
    while b:
        a, b = b, poly_mod(a, b)
    return a


def is_irreducible(f: int) -> bool:
    """Ben-Or test: gcd(X^(2^i) - X, f) = 1 for i <= deg/2."""
    d = _deg(f)
    if d < 1:
        return False
    t = 2  # X
    for _ in range(d // 2):
        t = poly_mod(clmul(t, t), f)
        if _poly_gcd(t ^ 2, f) != 1:
            return False
    return True


@lru_cache(maxsize=None)
def irreducible_poly(w: int) -> int:
    """The numerically smallest irreducible degree-w polynomial with constant term 1."""
    if not 1 <= w <= MAX_WIDTH:
        raise DomainError(f"field width {w} outside 1..{MAX_WIDTH}")
    base = 1 << w
    for low in range(1, base, 2):
        if is_irreducible(base | low):
            return base | low
    raise AssertionError("unreachable: irreducibles exist in every degree")


def gf_mul(a: int, b: int, w: int) -> int:
    return poly_mod(clmul(a, b), irreducible_poly(w))


@dataclass(frozen=True)
class RwiseKey:
    r: int
    in_bits: int
    out_bits: int
    coeffs: tuple[int, ...]

    def __post_init__(self):
        if len(self.coeffs) != self.r:
            raise DomainError("need exactly r coefficients")
        if any(c < 0 or c >> self.width for c in self.coeffs):
            raise DomainError("coefficient outside the field")

    @property
    def width(self) -> int:
        return max(self.in_bits, self.out_bits)

    @property
    def key_bits(self) -> int:
        return self.r * self.width

    def to_json(self) -> dict:
        return {
            "r": self.r,
            "in_bits": self.in_bits,
            "out_bits": self.out_bits,
            "coeffs": [to_hex(c) for c in self.coeffs],
        }

    @classmethod
    def from_json(cls, d: dict) -> RwiseKey:
        return cls(d["r"], d["in_bits"], d["out_bits"], tuple(from_hex(c) for c in d["coeffs"]))


def sample_rwise_key(r: int, in_bits: int, out_bits: int, rng: SeededRng) -> RwiseKey:
    if r < 1 or in_bits < 1 or out_bits < 1:
        raise DomainError("r, in_bits and out_bits must be positive")
    w = max(in_bits, out_bits)
    irreducible_poly(w)
    return RwiseKey(r, in_bits, out_bits, tuple(rng.getrandbits(w) for _ in range(r)))


def _as_int(x, nbits: int) -> int:
    if isinstance(x, str):
        if len(x) != nbits or set(x) - {"0", "1"}:
            raise DomainError(f"expected a {nbits}-bit string")
        return int(x, 2) if x else 0
    x = int(x)
    if x < 0 or x >> nbits:
        raise DomainError(f"input does not fit in {nbits} bits")
    return x


def eval_rwise(key: RwiseKey, x) -> int:
    """Horner evaluation of sum coeffs[i] x^i; returns the low out_bits."""
    x = _as_int(x, key.in_bits)
    w = key.width
    y = 0
    for c in reversed(key.coeffs):
        y = gf_mul(y, x, w) ^ c
    return y & ((1 << key.out_bits) - 1)


# Batched evaluation on little-endian uint64 limbs.

def _to_limbs(values, nlimbs: int) -> np.ndarray:
    arr = np.asarray(values)
    if arr.dtype != object and nlimbs == 1:
        return arr.astype(np.uint64).reshape(-1, 1)
    out = np.zeros((len(values), nlimbs), dtype=np.uint64)
    mask = (1 << 64) - 1
    for i, v in enumerate(values):
        v = int(v)
        for j in range(nlimbs):
            out[i, j] = (v >> (64 * j)) & mask
    return out


def _const_limbs(v: int, nlimbs: int) -> np.ndarray:
    return np.array([(v >> (64 * j)) & ((1 << 64) - 1) for j in range(nlimbs)], dtype=np.uint64)


def _batch_mul(a: np.ndarray, b: np.ndarray, w: int, low: np.ndarray) -> np.ndarray:
    nl = a.shape[1]
    top_limb, top_off = divmod(w - 1, 64)
    top_mask = np.uint64((1 << (w - 64 * (nl - 1))) - 1)
    one, s63 = np.uint64(1), np.uint64(63)
    acc = np.zeros_like(a)
    cur = a.copy()
    for j in range(w):
        bit = (b[:, j // 64] >> np.uint64(j % 64)) & one
        acc ^= cur * bit[:, None]
        carry = (cur[:, top_limb] >> np.uint64(top_off)) & one
        for i in range(nl - 1, 0, -1):
            cur[:, i] = (cur[:, i] << one) | (cur[:, i - 1] >> s63)
        cur[:, 0] <<= one
        cur[:, nl - 1] &= top_mask
        cur ^= carry[:, None] * low[None, :]
    return acc


def eval_rwise_batch(key: RwiseKey, xs) -> np.ndarray:
    """Evaluate ``key`` on many inputs at once.

    ``xs`` is a sequence of ints (or a uint64 array when in_bits <= 64).
    Returns uint64 outputs when out_bits <= 64, else Python ints.
    """
    w = key.width
    nl = (w + 63) // 64
    low = _const_limbs(irreducible_poly(w) ^ (1 << w), nl)
    x = _to_limbs(xs, nl)
    if x.size and key.in_bits < 64 * nl:
        if nl == 1:
            bad = bool(np.any(x[:, 0] >> np.uint64(key.in_bits)))
        else:
            bad = any(int(v) >> key.in_bits for v in xs)
        if bad:
            raise DomainError(f"input does not fit in {key.in_bits} bits")
    y = np.broadcast_to(_const_limbs(key.coeffs[-1], nl), x.shape).copy()
    for c in reversed(key.coeffs[:-1]):
        y = _batch_mul(y, x, w, low) ^ _const_limbs(c, nl)[None, :]
    if key.out_bits <= 64:
        out = y[:, 0]
        if key.out_bits < 64:
            out = out & np.uint64((1 << key.out_bits) - 1)
        return out
    vals = [sum(int(y[i, j]) << (64 * j) for j in range(nl)) for i in range(len(y))]
    return np.array([v & ((1 << key.out_bits) - 1) for v in vals], dtype=object)
