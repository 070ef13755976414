"""Rayleigh-Schroedinger coefficients xi_M of the perturbed eigenvalue 0.

Two independent evaluations are provided:

* :func:`xi_via_trees` sums products of closed-path spectral sums over rooted
  tree compositions (the Buermann-Lagrange form of the fixed-point equation);
* :func:`xi_via_trace` evaluates the textbook trace formula
  ((-1)^M / M) sum tr(V R^{k_1} ... V R^{k_M}) by enumerating closed walks
  through the origin.

Both accumulate with :func:`math.fsum`, so results do not depend on the
order in which terms are produced.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .combinatorics import STEP_ARRAY, closed_path_array, compositions, enumerate_trees
from .errors import OrderTooLarge, ZeroDenominator
from .lattice import ModelParams

MAX_ORDER = 12


@dataclass(frozen=True)
class RSCoefficient:
    order: int
    value: float
    method: str  # "trees" or "trace"


def _check_order(M: int, params: ModelParams) -> None:
    if M < 2:
        raise ValueError(f"order must be >= 2, got {M}")
    if M > MAX_ORDER:
        raise OrderTooLarge(f"order {M} exceeds {MAX_ORDER}; enumeration grows like 4^M")
    if M > params.path_cutoff:
        raise OrderTooLarge(f"order {M} exceeds path_cutoff={params.path_cutoff}")


@lru_cache(maxsize=64)
def _interior_energies(length: int, omega: float) -> np.ndarray:
    """F at the interior vertices of every closed path of the given length."""
    paths = closed_path_array(length)
    interior = paths[:, 1:-1, :]
    energies = omega * interior[..., 0] + interior[..., 1].astype(float) ** 2
    if np.any(energies == 0.0):
        raise ZeroDenominator(f"a closed path of length {length} meets F(n) = 0 at omega={omega!r}")
    return energies


def spectral_sum(mu: Sequence[int], params: ModelParams) -> float:
    """Sum over closed paths of length k+1 of prod_j F(path[j])^(-mu_j)."""
    mu = tuple(int(m) for m in mu)
    if not mu or min(mu) < 1:
        raise ValueError(f"mu must be a nonempty tuple of positive integers, got {mu}")
    return _spectral_sum(mu, params.omega)


@lru_cache(maxsize=65536)
def _spectral_sum(mu: tuple[int, ...], omega: float) -> float:
    energies = _interior_energies(len(mu) + 1, omega)
    if energies.shape[0] == 0:
        return 0.0
    terms = np.prod(energies ** -np.asarray(mu, dtype=float), axis=1)
    return math.fsum(terms)


def _path_factor(k: int, extra: int, omega: float) -> float:
    """sum over mu in N^k with |mu| = k + extra of spectral_sum(mu)."""
    return math.fsum(
        _spectral_sum(tuple(e + 1 for e in excess), omega) for excess in compositions(extra, k)
    )


def xi_via_trees(M: int, params: ModelParams) -> RSCoefficient:
    """xi_M from the rooted-tree expansion.

    xi_M = sum_{N <= M/2} sum_{nu in T(N)} sum_{k(1..N) >= 1, sum k + N = M}
           (-1)^{M+N} prod_j sum_{|mu(j)| = k(j) + nu_j} spectral_sum(mu(j)).
    """
    _check_order(M, params)
    omega = params.omega
    terms = []
    for N in range(1, M // 2 + 1):
        sign = (-1) ** (M + N)
        for nu in enumerate_trees(N):
            for k_minus_one in compositions(M - 2 * N, N):
                ks = [k + 1 for k in k_minus_one]
                prod = 1.0
                for k, extra in zip(ks, nu):
                    prod *= _path_factor(k, extra, omega)
                    if prod == 0.0:
                        break
                terms.append(sign * prod)
    return RSCoefficient(M, math.fsum(terms), "trees")


def closed_walk_array(M: int) -> np.ndarray:
    """All closed walks of length M at the origin (revisits allowed), shape (W, M+1, 2)."""
    verts = np.zeros((1, 1, 2), dtype=np.int64)
    for step in range(M):
        remaining = M - step - 1
        last = verts[:, -1, :]
        nxt = (last[:, None, :] + STEP_ARRAY[None, :, :]).reshape(-1, 2)
        keep = np.max(np.abs(nxt), axis=1) <= remaining
        verts = np.repeat(verts, len(STEP_ARRAY), axis=0)[keep]
        verts = np.concatenate([verts, nxt[keep][:, None, :]], axis=1)
    return verts


def xi_via_trace(M: int, params: ModelParams) -> RSCoefficient:
    """xi_M from ((-1)^M / M) sum_{k_1+..+k_M = M-1} tr(V R^{k_1} ... V R^{k_M}).

    R^0 = -P and R^k = K^-k on Ran Q.  The trace is a sum over cyclic vertex
    sequences (m_1..m_M) joined by V-steps; a vertex carrying k_i = 0 must be
    the origin, the others must avoid it.  For a sequence with z origin
    visits and nonzero energies F_1..F_{M-z}, the sum over k gives
    (-1)^z h_{z-1}(1/F) prod(1/F), with h the complete homogeneous symmetric
    polynomial.  Rotating each sequence so that one of its z origin visits
    comes first turns the sum over cyclic sequences into M/z times a sum over
    closed walks rooted at the origin.
    """
    _check_order(M, params)
    if M % 2:
        return RSCoefficient(M, 0.0, "trace")
    walks = closed_walk_array(M)[:, :-1, :]  # m_1 = origin, ..., m_M
    at_origin = (walks[..., 0] == 0) & (walks[..., 1] == 0)
    energies = params.omega * walks[..., 0] + walks[..., 1].astype(float) ** 2
    if np.any(energies[~at_origin] == 0.0):
        raise ZeroDenominator(f"a closed walk of length {M} meets F(n) = 0")
    inv = np.where(at_origin, 0.0, 1.0 / np.where(at_origin, 1.0, energies))
    z = at_origin.sum(axis=1)
    rmax = int(z.max()) - 1
    # h_r over the nonzero entries (zeros contribute nothing to the recurrence)
    h = np.zeros((walks.shape[0], rmax + 1))
    h[:, 0] = 1.0
    for i in range(M):
        x = inv[:, i]
        for r in range(1, rmax + 1):
            h[:, r] += x * h[:, r - 1]
    prod_inv = np.prod(np.where(at_origin, 1.0, inv), axis=1)
    weight = (-1.0) ** z * h[np.arange(len(z)), z - 1] * prod_inv / z
    return RSCoefficient(M, (-1) ** M * math.fsum(weight), "trace")


@lru_cache(maxsize=32)
def _xi_table(max_order: int, params: ModelParams) -> tuple[float, ...]:
    return tuple([0.0, 0.0] + [xi_via_trees(M, params).value for M in range(2, max_order + 1)])


def xi_coefficients(max_order: int, params: ModelParams) -> list[float]:
    """[xi_0, xi_1, ..., xi_max_order] from the tree formula (xi_0 = xi_1 = 0)."""
    return list(_xi_table(max_order, params))


def xi2_closed_form(omega: float) -> float:
    return 4.0 / (omega * omega - 1.0)
