"""Reduced states, von Neumann entropies and the T-matrix bounds.

Sites are 0-based here; site 0 is the most significant digit of the basis
index. All logarithms are base 2.
"""

from __future__ import annotations

import csv
import io
import math

import numpy as np

from .numcore import DomainError, RefusalError
from .phasestate import PhaseOracle, StateVector

REDUCED_DIM_LIMIT = 2 ** 14
HERMITIAN_TOL = 1e-10
EIG_FLOOR = -1e-10
ORTHO_TOL = 1e-10


def _tensor(state: StateVector) -> np.ndarray:
    return np.asarray(state.amplitudes).reshape((state.local_dim,) * state.n)


def _check_cut(n: int, sites) -> list[int]:
    sites = sorted(set(int(s) for s in sites))
    if not sites or len(sites) >= n or sites[0] < 0 or sites[-1] >= n:
        raise DomainError(f"cut {sites} is not a proper nonempty subset of {n} sites")
    return sites


def cut_matrix(state: StateVector, sites) -> np.ndarray:
    """Amplitudes reshaped to (dim I, dim complement)."""
    sites = _check_cut(state.n, sites)
    rest = [s for s in range(state.n) if s not in sites]
    d = state.local_dim
    return _tensor(state).transpose(sites + rest).reshape(d ** len(sites), d ** len(rest))


def reduced_density(state: StateVector, sites) -> np.ndarray:
    sites = _check_cut(state.n, sites)
    if state.local_dim ** len(sites) > REDUCED_DIM_LIMIT:
        raise RefusalError("reduced state dimension above 2^14")
    M = cut_matrix(state, sites)
    return M @ M.conj().T


def entropy(rho: np.ndarray) -> float:
    """-tr(rho log2 rho) with 0 log 0 = 0."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DomainError("density matrix must be square")
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > HERMITIAN_TOL:
        raise DomainError("density matrix is not Hermitian")
    evs = np.linalg.eigvalsh(rho)
    if evs.min() < EIG_FLOOR:
        raise DomainError(f"eigenvalue {evs.min():.3g} below {EIG_FLOOR}")
    evs = evs[evs > 0]
    return float(-(evs * np.log2(evs)).sum())


def entropy_from_schmidt(sv: np.ndarray) -> float:
    p = np.asarray(sv) ** 2
    p = p[p > 0]
    return max(0.0, float(-(p * np.log2(p)).sum()))


def cut_entropy(state: StateVector, sites) -> float:
    """Entanglement entropy of a cut through the singular values of the cut matrix."""
    return entropy_from_schmidt(np.linalg.svd(cut_matrix(state, sites), compute_uv=False))


def t_matrix(oracle: PhaseOracle | np.ndarray, sites) -> np.ndarray:
    """T[i, j] = (-1)^s(i ||_I j) with i on the cut sites and j on the rest."""
    table = oracle.table() if isinstance(oracle, PhaseOracle) else np.asarray(oracle)
    n = int(table.size).bit_length() - 1
    sites = _check_cut(n, sites)
    rest = [s for s in range(n) if s not in sites]
    signs = (1 - 2 * table.astype(np.int64)).reshape((2,) * n)
    return signs.transpose(sites + rest).reshape(2 ** len(sites), 2 ** len(rest))


def entropy_bounds(T: np.ndarray) -> tuple[float, float]:
    """(-log2 ||T T^T / 2^n||_2, log2 rank T) with the spectral norm."""
    T = np.asarray(T, dtype=float)
    sv = np.linalg.svd(T, compute_uv=False)
    lower = -math.log2(sv[0] ** 2 / T.size)
    tol = sv[0] * max(T.shape) * np.finfo(float).eps
    upper = math.log2(int((sv > tol).sum()))
    return lower, upper


def cutwise_orthogonal(psi0: StateVector, psi1: StateVector, sites, tol: float = ORTHO_TOL) -> bool:
    rest = [s for s in range(psi0.n) if s not in set(sites)]
    for part in (sites, rest):
        r0, r1 = reduced_density(psi0, part), reduced_density(psi1, part)
        if np.linalg.norm(r0 @ r1) > tol:
            return False
    return True


def superposed_entropy(S0: float, S1: float) -> float:
    """Entropy of an equal superposition of cutwise-orthogonal states."""
    return 0.5 * (S0 + S1) + 1.0


def binary_entropy(x: float) -> float:
    if x <= 0 or x >= 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def continuity_bound(eps: float, log_dim_A: float) -> float:
    """2 eps log|A| + (1 + eps) h(eps / (1 + eps))."""
    if eps < 0:
        raise DomainError("eps must be non-negative")
    return 2 * eps * log_dim_A + (1 + eps) * binary_entropy(eps / (1 + eps))


def pure_trace_distance(psi: StateVector, phi: StateVector) -> float:
    overlap = abs(np.vdot(psi.amplitudes, phi.amplitudes)) ** 2
    return math.sqrt(max(0.0, 1.0 - overlap))


def profile_cuts(n: int, margin: int = 1) -> range:
    b = max(1, margin)
    return range(b, n - b + 1)


def entropy_profile(state: StateVector, margin: int = 1) -> list[tuple[int, float]]:
    """(c, S) for the prefix cuts {0..c-1} with c in [margin, n - margin]."""
    return [(c, cut_entropy(state, range(c))) for c in profile_cuts(state.n, margin)]


def profile_csv(profile) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["cut", "entropy_bits"])
    for c, s in profile:
        w.writerow([c, f"{s:.12f}"])
    return buf.getvalue()
