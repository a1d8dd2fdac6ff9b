"""Public-key phase functions and the phase states they define.

Two constructions:

* tree: leaves of lambda bits are merged pairwise by one DCRA lossy function
  per level, and a 4-wise hash turns the root value into a phase bit;
* chain: an LWE matrix A and pairwise hashes relabel the top m bits for
  m = ell .. n, then a 4-wise hash gives the phase bit.

Bit convention everywhere: bit 1 (site 1) is the most significant bit.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from fractions import Fraction
from typing import Any

import gmpy2
import numpy as np

from .hashfam import RwiseKey, eval_rwise, eval_rwise_batch, sample_rwise_key
from .lossy_dcra import DcraKey, DcraParams, dcra_eval, dcra_keygen
from .lossy_lwe import LweKey, LweParams, all_bitvecs, lwe_keygen, shifted_round
from .numcore import DomainError, RefusalError, SeededRng

MATERIALIZE_LIMIT = 24
COORD_BITS = 5  # ceil(log2 17)
TABLE_MAGIC = b"PHS1"


def _is_pow2(v: int) -> bool:
    return v > 0 and v & (v - 1) == 0


def nominal_level_widths(n: int, lam: int) -> list[int]:
    """Input widths m_l = (2^(l+1) - 2) lam of an ideal tree whose nodes add lam bits."""
    levels = int(math.log2(n // lam))
    return [(2 ** (l + 1) - 2) * lam for l in range(1, levels + 1)]


@dataclass(frozen=True)
class TreeKey:
    n: int
    lam: int
    level_keys: tuple[DcraKey, ...]
    fin_key: RwiseKey

    @property
    def levels(self) -> int:
        return len(self.level_keys)

    @property
    def out_bits(self) -> int:
        return self.level_keys[-1].out_bits

    def level_in_bits(self) -> list[int]:
        widths, w = [], self.lam
        for k in self.level_keys:
            widths.append(2 * w)
            w = k.out_bits
        return widths

    @property
    def key_bits(self) -> int:
        return sum(k.key_bits for k in self.level_keys) + self.fin_key.key_bits

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "lambda": self.lam,
            "level_keys": [k.to_json() for k in self.level_keys],
            "fin_key": self.fin_key.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> TreeKey:
        return cls(d["n"], d["lambda"], tuple(DcraKey.from_json(k) for k in d["level_keys"]),
                   RwiseKey.from_json(d["fin_key"]))


def tree_modulus_bits(lam: int) -> int:
    # lossy nodes then have image size <= phi(N) <= 2^(lam+1) for lam = 2
    return max(4, lam + 2)


def sample_tree_key(n: int, lam: int, mode: str, rng: SeededRng, modulus_bits: int | None = None) -> TreeKey:
    if not (_is_pow2(n) and _is_pow2(lam) and lam < n):
        raise DomainError("n and lambda must be powers of two with lambda < n")
    if mode not in ("low", "high"):
        raise DomainError(f"unknown mode {mode!r}")
    bits = modulus_bits or tree_modulus_bits(lam)
    dmode = "lossy" if mode == "low" else "injective"
    keys, w = [], lam
    for _ in range(int(math.log2(n // lam))):
        key = dcra_keygen(DcraParams.for_input(2 * w, bits), dmode, rng)
        keys.append(key)
        w = key.out_bits
    return TreeKey(n, lam, tuple(keys), sample_rwise_key(4, w, 1, rng))


def tree_hash(key: TreeKey, x: int) -> int:
    """Root value of the hash tree on input x."""
    if x < 0 or x >> key.n:
        raise DomainError(f"input must fit in {key.n} bits")
    lam = key.lam
    leaves = [(x >> (key.n - lam * (i + 1))) & ((1 << lam) - 1) for i in range(key.n // lam)]
    w = lam
    for lk in key.level_keys:
        leaves = [dcra_eval(lk, (leaves[2 * i] << w) | leaves[2 * i + 1]) for i in range(len(leaves) // 2)]
        w = lk.out_bits
    return leaves[0]


def tree_hash_all(key: TreeKey) -> list[int]:
    """Root values for all 2^n inputs, memoized by segment value per level."""
    if key.n > MATERIALIZE_LIMIT:
        raise RefusalError(f"n = {key.n} exceeds {MATERIALIZE_LIMIT}")
    table = [gmpy2.mpz(v) for v in range(1 << key.lam)]
    seg, w = key.lam, key.lam
    for lk in key.level_keys:
        # c^(hi * 2^w + lo) = (c^(2^w))^hi * c^lo
        mod = gmpy2.mpz(lk.modulus)
        c = gmpy2.mpz(lk.c)
        c_hi = gmpy2.powmod(c, 1 << w, mod)
        hi = [gmpy2.powmod(c_hi, v, mod) for v in table]
        lo = [gmpy2.powmod(c, v, mod) for v in table]
        table = [h * l % mod for h in hi for l in lo]
        seg, w = 2 * seg, lk.out_bits
    return [int(v) for v in table]


def phase_tree(key: TreeKey, x: int) -> int:
    return eval_rwise(key.fin_key, tree_hash(key, x))


@dataclass(frozen=True)
class ChainKey:
    n: int
    ell: int
    A: LweKey
    hash_keys: tuple[RwiseKey, ...]
    fin_key: RwiseKey

    @property
    def key_bits(self) -> int:
        q_bits = self.A.params.q.bit_length()
        return self.n * self.n * q_bits + sum(k.key_bits for k in self.hash_keys) + self.fin_key.key_bits

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "ell": self.ell,
            "A": self.A.to_json(),
            "hash_keys": [k.to_json() for k in self.hash_keys],
            "fin_key": self.fin_key.to_json(),
        }

    @classmethod
    def from_json(cls, d: dict) -> ChainKey:
        return cls(d["n"], d["ell"], LweKey.from_json(d["A"]),
                   tuple(RwiseKey.from_json(k) for k in d["hash_keys"]), RwiseKey.from_json(d["fin_key"]))


def sample_chain_key(n: int, ell: int, mode: str, rng: SeededRng, params: LweParams | None = None) -> ChainKey:
    if not 1 <= ell <= n:
        raise DomainError("need 1 <= ell <= n")
    if mode not in ("low", "high"):
        raise DomainError(f"unknown mode {mode!r}")
    params = params or LweParams.theorem(n, ell)
    A = lwe_keygen(params, "lossy" if mode == "low" else "injective", rng)
    fin = sample_rwise_key(4, n, 1, rng)
    hashes = tuple(sample_rwise_key(2, COORD_BITS * n, m, rng) for m in range(ell, n + 1))
    return ChainKey(n, ell, A, hashes, fin)


def pack_zp(vec) -> int:
    """Concatenate coordinates as 5-bit big-endian fields."""
    out = 0
    for v in vec:
        out = (out << COORD_BITS) | int(v)
    return out


def _relabel_table(key: ChainKey, m: int):
    """f^A_m on all m-bit i: hash of round(A pad(i))."""
    pr = key.A.params
    rounded = shifted_round(all_bitvecs(key.n)[: 1 << m] @ key.A.A.T % pr.q, pr.q, pr.p)
    packed = [pack_zp(row) for row in rounded]
    return eval_rwise_batch(key.hash_keys[m - key.ell], packed)


def labelling(key: ChainKey, x: int) -> int:
    n = key.n
    if x < 0 or x >> n:
        raise DomainError(f"input must fit in {n} bits")
    pr = key.A.params
    for m in range(key.ell, n + 1):
        i, j = x >> (n - m), x & ((1 << (n - m)) - 1)
        v = shifted_round(key.A.A @ np.array([(i >> (n - 1 - t)) & 1 for t in range(n)]) % pr.q, pr.q, pr.p)
        x = (eval_rwise(key.hash_keys[m - key.ell], pack_zp(v)) << (n - m)) | j
    return x


def labelling_all(key: ChainKey) -> np.ndarray:
    n = key.n
    if n > MATERIALIZE_LIMIT:
        raise RefusalError(f"n = {n} exceeds {MATERIALIZE_LIMIT}")
    cur = np.arange(1 << n, dtype=np.uint64)
    for m in range(key.ell, n + 1):
        f = _relabel_table(key, m).astype(np.uint64)
        shift = np.uint64(n - m)
        cur = (f[cur >> shift] << shift) | (cur & np.uint64((1 << (n - m)) - 1))
    return cur


def phase_chain(key: ChainKey, x: int) -> int:
    return eval_rwise(key.fin_key, labelling(key, x))


@dataclass(frozen=True)
class PhaseOracle:
    """A total phase function {0,1}^n -> {0,1}; kind is tree, chain or table."""

    n: int
    kind: str
    key: Any

    def __call__(self, x: int) -> int:
        if self.kind == "tree":
            return phase_tree(self.key, x)
        if self.kind == "chain":
            return phase_chain(self.key, x)
        if self.kind == "table":
            return int(self.key[x])
        raise DomainError(f"unknown oracle kind {self.kind!r}")

    def table(self) -> np.ndarray:
        """All 2^n phase bits as a uint8 array indexed by x."""
        if self.n > MATERIALIZE_LIMIT:
            raise RefusalError(f"n = {self.n} exceeds {MATERIALIZE_LIMIT}")
        if self.kind == "tree":
            bits = eval_rwise_batch(self.key.fin_key, tree_hash_all(self.key))
        elif self.kind == "chain":
            bits = eval_rwise_batch(self.key.fin_key, labelling_all(self.key))
        elif self.kind == "table":
            bits = self.key
        else:
            raise DomainError(f"unknown oracle kind {self.kind!r}")
        return np.asarray(bits, dtype=np.uint8)

    @classmethod
    def from_table(cls, table) -> PhaseOracle:
        t = np.asarray(table, dtype=np.uint8)
        n = int(t.size).bit_length() - 1
        if t.size != 1 << n:
            raise DomainError("table length must be a power of two")
        return cls(n, "table", t)


@dataclass
class StateVector:
    n: int
    amplitudes: np.ndarray
    local_dim: int = 2

    def __post_init__(self):
        if self.amplitudes.shape != (self.local_dim ** self.n,):
            raise DomainError("amplitude vector has the wrong length")

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


@dataclass(frozen=True)
class ExactPhaseState:
    """Phase state held as signs with the common amplitude 2^(-n/2)."""

    n: int
    signs: np.ndarray

    def amplitude_squared(self, x: int) -> Fraction:
        return Fraction(1, 2 ** self.n)

    def norm_squared(self) -> Fraction:
        return sum((self.amplitude_squared(x) for x in range(len(self.signs))), Fraction(0))

    def to_float(self) -> StateVector:
        return StateVector(self.n, self.signs.astype(float) / math.sqrt(2 ** self.n))


def phase_signs(table) -> np.ndarray:
    return 1 - 2 * np.asarray(table, dtype=np.int8)


def materialize(oracle: PhaseOracle, exact: bool = False):
    """2^(-n/2) sum_x (-1)^s(x) |x>."""
    if oracle.n > MATERIALIZE_LIMIT:
        raise RefusalError(f"n = {oracle.n} exceeds {MATERIALIZE_LIMIT}")
    signs = phase_signs(oracle.table())
    if exact:
        return ExactPhaseState(oracle.n, signs)
    return StateVector(oracle.n, signs.astype(float) / math.sqrt(2 ** oracle.n))


def write_phase_table(path, table) -> None:
    t = np.asarray(table, dtype=np.uint8)
    n = int(t.size).bit_length() - 1
    with open(path, "wb") as fh:
        fh.write(TABLE_MAGIC + struct.pack(">I", n))
        fh.write(np.packbits(t).tobytes())


def read_phase_table(path) -> np.ndarray:
    with open(path, "rb") as fh:
        head = fh.read(8)
        if head[:4] != TABLE_MAGIC:
            raise DomainError("not a phase table file")
        (n,) = struct.unpack(">I", head[4:])
        data = np.frombuffer(fh.read(), dtype=np.uint8)
    return np.unpackbits(data)[: 1 << n]
