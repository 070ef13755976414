"""Finite-section eigenvalue oracle for K + beta V.

The operator is cut to the sublattice points with |n1| <= N1, |n2| <= N2
and the eigenvalue branch through F(0) = 0 is followed by shifted inverse
iteration.  Nothing here uses the path expansions, so agreement with the
series is an independent check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .errors import IllConditionedFit, NoConvergence, SingularShift
from .lattice import STEPS, LatticeIndex, ModelParams, on_sublattice


@dataclass(frozen=True)
class TruncatedMatrix:
    beta: float
    N1: int
    N2: int
    indices: tuple[LatticeIndex, ...]
    diagonal: np.ndarray
    matrix: sp.csr_matrix

    @property
    def dim(self) -> int:
        return len(self.indices)

    def position(self, n: Sequence[int]) -> int:
        return self._lookup[LatticeIndex(*n)]

    @property
    def _lookup(self) -> dict:
        cache = self.__dict__.get("_lookup_cache")
        if cache is None:
            cache = {n: i for i, n in enumerate(self.indices)}
            object.__setattr__(self, "_lookup_cache", cache)
        return cache

    def unit(self, n: Sequence[int]) -> np.ndarray:
        e = np.zeros(self.dim)
        e[self.position(n)] = 1.0
        return e

    def parity(self) -> np.ndarray:
        """Diagonal of the unitary (-1)^n1, which maps the beta matrix to the -beta one."""
        return np.array([(-1.0) ** n.n1 for n in self.indices])


def build_matrix(beta: float, N1: int, N2: int, params: ModelParams) -> TruncatedMatrix:
    """Sparse K + beta V on {n in L : |n1| <= N1, |n2| <= N2}, indices sorted by (n2, n1)."""
    if N1 < 1 or N2 < 1:
        raise ValueError("N1 and N2 must be >= 1")
    indices = tuple(
        LatticeIndex(n1, n2)
        for n2 in range(-N2, N2 + 1)
        for n1 in range(-N1, N1 + 1)
        if on_sublattice((n1, n2))
    )
    pos = {n: i for i, n in enumerate(indices)}
    diag = np.array([params.omega * n.n1 + n.n2 * n.n2 for n in indices], dtype=float)
    rows, cols = [], []
    for i, n in enumerate(indices):
        for s in STEPS:
            j = pos.get(LatticeIndex(n.n1 + s[0], n.n2 + s[1]))
            if j is not None:
                rows.append(i)
                cols.append(j)
    off = sp.csr_matrix((np.full(len(rows), float(beta)), (rows, cols)), shape=(len(indices),) * 2)
    A = (sp.diags(diag) + off).tocsr()
    return TruncatedMatrix(float(beta), N1, N2, indices, diag, A)


@dataclass(frozen=True)
class Eigenpair:
    value: float
    vector: np.ndarray
    residual: float
    iterations: int


def eigen_near_zero(
    tm: TruncatedMatrix,
    shift: float = 0.0,
    tol: float = 1e-12,
    start: np.ndarray | None = None,
    max_iter: int = 100,
) -> Eigenpair:
    """Eigenpair nearest ``shift`` by inverse iteration from ``start`` (default: unit at the origin).

    Stops once ||A v - mu v|| <= tol ||v|| with mu the Rayleigh quotient.
    """
    A = tm.matrix
    v = tm.unit((0, 0)) if start is None else np.asarray(start, dtype=float).copy()
    v /= np.linalg.norm(v)

    def rq(x):
        Ax = A @ x
        mu = float(x @ Ax)
        return mu, float(np.linalg.norm(Ax - mu * x))

    mu, res = rq(v)
    if res <= tol:
        return Eigenpair(mu, v, res, 0)
    try:
        lu = splu((A - shift * sp.identity(tm.dim, format="csr")).tocsc())
    except RuntimeError as exc:
        raise SingularShift(f"factorization of A - {shift!r} I failed: {exc}") from exc
    for it in range(1, max_iter + 1):
        w = lu.solve(v)
        if not np.all(np.isfinite(w)):
            raise SingularShift(f"shift {shift!r} is numerically an eigenvalue")
        v = w / np.linalg.norm(w)
        if v[tm.position((0, 0))] < 0:
            v = -v
        mu, res = rq(v)
        if res <= tol:
            return Eigenpair(mu, v, res, it)
    raise NoConvergence(f"inverse iteration residual {res:.3g} > {tol:.3g} after {max_iter} steps")


@dataclass(frozen=True)
class OraclePoint:
    beta: float
    eigenvalue: float
    residual: float
    overlap: float


def oracle_branch(
    betas: Sequence[float],
    params: ModelParams,
    N1: int = 40,
    N2: int = 12,
    tol: float = 1e-12,
) -> list[OraclePoint]:
    """Follow the eigenvalue branch through 0 along increasing |beta|.

    Each solve starts from the previous eigenvector, with the shift predicted
    by quadratic scaling of the previous eigenvalue.  ``overlap`` is
    |<v_prev, v>|; values near 1 mean the same branch was tracked.
    """
    order = sorted(range(len(betas)), key=lambda i: abs(betas[i]))
    out: list[OraclePoint | None] = [None] * len(betas)
    prev_vec, prev_val, prev_beta = None, 0.0, 0.0
    for i in order:
        beta = float(betas[i])
        tm = build_matrix(beta, N1, N2, params)
        if prev_vec is None or prev_beta == 0.0:
            shift = 0.0
        else:
            shift = prev_val * (beta / prev_beta) ** 2
        if prev_vec is not None and prev_beta != 0.0 and math.copysign(1, beta) != math.copysign(1, prev_beta):
            start = prev_vec * tm.parity()
        else:
            start = prev_vec
        pair = _solve_with_fallback(tm, shift, tol, start)
        overlap = 1.0 if prev_vec is None else abs(float(prev_vec @ _aligned(pair.vector, tm, prev_beta, beta)))
        out[i] = OraclePoint(beta, pair.value, pair.residual, overlap)
        prev_vec, prev_val, prev_beta = pair.vector, pair.value, beta
    return out  # type: ignore[return-value]


def _aligned(v, tm, prev_beta, beta):
    if prev_beta != 0.0 and math.copysign(1, beta) != math.copysign(1, prev_beta):
        return v * tm.parity()
    return v


def _solve_with_fallback(tm, shift, tol, start):
    try:
        return eigen_near_zero(tm, shift, tol, start)
    except SingularShift:
        # the predicted shift hit an eigenvalue to rounding; nudge it
        return eigen_near_zero(tm, shift + 1e-9 * max(1.0, abs(shift)), tol, start)


def oracle_eigenvalue(beta: float, params: ModelParams, N1: int = 40, N2: int = 12, tol: float = 1e-12) -> float:
    return oracle_branch([beta], params, N1, N2, tol)[0].eigenvalue


@dataclass(frozen=True)
class XiEstimate:
    order: int
    value: float
    fit_residual: float
    condition: float


def oracle_xi(
    M_list: Sequence[int],
    beta_grid: Sequence[float],
    params: ModelParams,
    N1: int = 40,
    N2: int = 12,
    extra_orders: int = 2,
    include_odd: bool = False,
    max_condition: float = 1e10,
) -> list[XiEstimate]:
    """Least-squares power fit of the oracle branch lambda(beta).

    The basis holds beta^m for the requested orders plus ``extra_orders``
    higher ones that absorb truncation bias; odd powers join only with
    ``include_odd``.  Columns are scaled by max|beta|^m, and the fit is refused
    when the scaled design matrix has condition number above ``max_condition``.
    """
    betas = np.asarray(sorted(beta_grid), dtype=float)
    top = max(M_list)
    step = 1 if include_odd else 2
    orders = list(range(2, top + 1, step))
    orders += [top + step * (k + 1) for k in range(extra_orders)]
    if len(betas) <= len(orders):
        raise IllConditionedFit(f"{len(betas)} points cannot fit {len(orders)} coefficients")
    lam = np.array([p.eigenvalue for p in oracle_branch(list(betas), params, N1, N2)])
    scale = np.max(np.abs(betas))
    X = np.column_stack([(betas / scale) ** m for m in orders])
    cond = float(np.linalg.cond(X))
    if cond > max_condition:
        raise IllConditionedFit(f"condition number {cond:.3g} exceeds {max_condition:.3g}")
    coef, *_ = np.linalg.lstsq(X, lam, rcond=None)
    resid = float(np.linalg.norm(X @ coef - lam))
    values = {m: c / scale ** m for m, c in zip(orders, coef)}
    return [XiEstimate(m, float(values.get(m, 0.0)), resid, cond) for m in M_list]
