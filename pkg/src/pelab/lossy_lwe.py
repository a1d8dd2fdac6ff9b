"""Lossy functions from learning with errors.

Evaluation is x -> round(A x) with a shifted rounding Z_q -> Z_p. A uniform A
gives an injective map with high probability; A = B^T C + E with thin B, C
squeezes the image through the rank-lambda product C x.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .numcore import (
    DomainError,
    RefusalError,
    SeededRng,
    prime_in_range,
    sample_discrete_gaussian,
)

P_DEFAULT = 17
CENSUS_LIMIT = 22
TOY_LAMBDA = 512


def shifted_round(x, q: int, p: int = P_DEFAULT):
    """Bin index of (x + floor(c/2)) mod q among p near-even bins, c = floor(q/p).

    Works on ints and on integer arrays.
    """
    if not 2 <= p <= q:
        raise DomainError("need 2 <= p <= q")
    c = q // p
    y = (np.asarray(x, dtype=np.int64) + c // 2) % q
    out = y * p // q
    return int(out) if out.ndim == 0 else out


def theorem_modulus(n: int, lam: int, p: int = P_DEFAULT) -> int:
    """Smallest prime in [8 p n^2 sqrt(lam), 16 p n^2 sqrt(lam)]."""
    lo = 8 * p * n * n * math.sqrt(lam)
    return prime_in_range(math.ceil(lo), math.floor(2 * lo))


@dataclass(frozen=True)
class LweParams:
    n: int
    lam: int
    q: int
    sigma: float
    p: int = P_DEFAULT

    def __post_init__(self):
        if self.p != 17:
            raise DomainError("p is fixed to 2^4 + 1")
        if self.sigma <= 0 or self.q < self.p:
            raise DomainError("need sigma > 0 and q >= p")

    @classmethod
    def theorem(cls, n: int, lam: int, sigma: float | None = None) -> LweParams:
        return cls(n, lam, theorem_modulus(n, lam), 2 * math.sqrt(lam) if sigma is None else sigma)

    def warnings(self) -> list[str]:
        out = []
        lo = 8 * self.p * self.n ** 2 * math.sqrt(self.lam)
        if not lo <= self.q <= 2 * lo:
            out.append("q outside the injectivity regime [8pn^2 sqrt(lam), 16pn^2 sqrt(lam)]")
        if self.lam < 17:
            out.append("lam < 17: image bound 2^(lam^2) exceeds 2^n, lossiness not guaranteed")
        return out


@dataclass(frozen=True)
class LweKey:
    params: LweParams
    A: np.ndarray
    mode_hint: str = field(default="unknown", compare=False)
    # (B, C, E) of a lossy key; test metadata, never serialized.
    witness: tuple | None = field(default=None, compare=False, repr=False)

    def to_json(self) -> dict:
        pr = self.params
        return {
            "n": pr.n,
            "lambda": pr.lam,
            "p": pr.p,
            "q": pr.q,
            "sigma": pr.sigma,
            "A": [[int(v) for v in row] for row in self.A],
            "toy": pr.lam < TOY_LAMBDA,
        }

    @classmethod
    def from_json(cls, d: dict) -> LweKey:
        params = LweParams(d["n"], d["lambda"], d["q"], d["sigma"], d["p"])
        return cls(params, np.array(d["A"], dtype=np.int64).reshape(d["n"], d["n"]))


def lwe_keygen(params: LweParams, mode: str, rng: SeededRng) -> LweKey:
    n, q = params.n, params.q
    if mode == "injective":
        return LweKey(params, rng.integers(0, q, size=(n, n)).astype(np.int64), mode)
    if mode != "lossy":
        raise DomainError(f"unknown mode {mode!r}")
    B = rng.integers(0, q, size=(params.lam, n)).astype(np.int64)
    C = rng.integers(0, q, size=(params.lam, n)).astype(np.int64)
    E = sample_discrete_gaussian(params.sigma, q, rng, size=(n, n)).astype(np.int64)
    A = (B.T @ C + E) % q
    return LweKey(params, A, mode, (B, C, E))


def off_regime_params(n: int, lam: int, sigma: float = 0.25) -> LweParams:
    """Small-q parameters where lossiness is visible at desk scale.

    q is the smallest prime >= max(p, 2^((n-2)/lam)), so q^lam sits below 2^n.
    """
    lo = max(P_DEFAULT, math.ceil(2 ** ((n - 2) / lam)))
    return LweParams(n, lam, prime_in_range(lo, 4 * lo), sigma)


def int_to_bitvec(x: int, n: int) -> np.ndarray:
    """Bits of x with the most significant bit first."""
    if x < 0 or x >> n:
        raise DomainError(f"input must fit in {n} bits")
    return np.array([(x >> (n - 1 - i)) & 1 for i in range(n)], dtype=np.int64)


def all_bitvecs(n: int) -> np.ndarray:
    """(2^n, n) matrix whose row x is the MSB-first bit vector of x."""
    xs = np.arange(1 << n, dtype=np.int64)
    return (xs[:, None] >> np.arange(n - 1, -1, -1)) & 1


def lwe_eval(key: LweKey, x: int) -> tuple[int, ...]:
    pr = key.params
    v = key.A @ int_to_bitvec(x, pr.n) % pr.q
    return tuple(int(b) for b in shifted_round(v, pr.q, pr.p))


def lwe_eval_all(key: LweKey) -> np.ndarray:
    """Outputs for every input, one row per x."""
    pr = key.params
    if pr.n > CENSUS_LIMIT:
        raise RefusalError("full evaluation refused above 2^22 inputs")
    return shifted_round(all_bitvecs(pr.n) @ key.A.T % pr.q, pr.q, pr.p)


def lwe_census(key: LweKey) -> int:
    return len(np.unique(lwe_eval_all(key), axis=0))


def centered(M, q: int) -> np.ndarray:
    """Representatives in (-q/2, q/2]."""
    M = np.asarray(M, dtype=np.int64) % q
    return np.where(M > q // 2, M - q, M)


def row_norm_bound_check(E, beta: float) -> bool:
    """True iff every row of E has 1-norm strictly below beta."""
    E = np.atleast_2d(np.asarray(E))
    return bool(np.all(np.abs(E).sum(axis=1) < beta))


def border_set(q: int, p: int, beta: int) -> np.ndarray:
    """Mask of residues within beta of a bin border.

    A border sits between t-1 and t when their bins differ; it claims the
    2*beta residues t-beta .. t+beta-1, so the set has 2*p*beta elements
    whenever 2*beta <= floor(q/p).
    """
    bins = shifted_round(np.arange(q), q, p)
    starts = np.flatnonzero(bins != np.roll(bins, 1))
    mask = np.zeros(q, dtype=bool)
    for t in starts:
        mask[(t + np.arange(-beta, beta)) % q] = True
    return mask


def zero_margin(q: int, p: int = P_DEFAULT) -> int:
    """Smallest |e| for which e mod q leaves the bin of 0."""
    b0 = shifted_round(0, q, p)
    for d in range(1, q):
        if shifted_round(d % q, q, p) != b0 or shifted_round(-d % q, q, p) != b0:
            return d
    return q


def lossy_image_bound(key: LweKey) -> int:
    """(#distinct C x) * 2^(max border count) for a lossy key.

    The border count of z is the number of coordinates i whose noiseless value
    (B^T z)_i lies within beta of a border, beta being the largest row 1-norm
    of E; only those coordinates can round two ways.
    """
    if key.witness is None:
        raise DomainError("bound needs the lossy witness (B, C, E)")
    B, C, E = key.witness
    pr = key.params
    beta = int(np.abs(centered(E, pr.q)).sum(axis=1).max())
    X = all_bitvecs(pr.n)
    Z = np.unique(X @ C.T % pr.q, axis=0)
    V = Z @ B % pr.q
    bins = shifted_round(np.arange(pr.q), pr.q, pr.p)
    # does the bin vary over the window v - beta .. v + beta?
    change = (bins != np.roll(bins, 1)).astype(np.int64)
    csum = np.concatenate([[0], np.cumsum(np.concatenate([change, change, change]))])
    lo = V - beta + pr.q + 1
    hi = V + beta + pr.q + 1
    # a window crossing j borders admits j + 1 bins; j <= 1 whenever 2 beta < c
    spread = 1 + (csum[hi] - csum[lo])
    return len(Z) * int(np.prod(spread, axis=1, dtype=object).max())
