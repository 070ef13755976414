"""Reduced resolvent series g(beta, lambda) and the scalar function G(beta, lambda).

The reduced resolvent Gamma_lambda is never formed as an operator.  Vectors
on Ran Q live on a square grid of lattice indices; Gamma_lambda divides by
F(n) - lambda and V-hat sums the four diagonal neighbours with the origin
removed.  Iterating

    v_1 = Gamma QVf,   v_{k+1} = Gamma V-hat v_k

produces exactly the open-path sums: v_M(n) is the sum over paths in P(M)
ending at n of prod_j 1/(F(path_j) - lambda).  The path form is also kept,
as an independent cross-check.
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from .combinatorics import (
    RestrictedCriticalSet,
    closed_path_array,
    open_path_array,
    restricted_critical_set,
)
from .diophantine import in_lambda_set
from .errors import DivergenceWarning, PreconditionViolated, ZeroDenominator
from .lattice import ORIGIN, LatticeIndex, ModelParams

# ---------------------------------------------------------------------------
# vectors on Ran Q


@dataclass
class CoefficientVector:
    """Finite map lattice index -> coefficient, with the origin excluded."""

    entries: dict = field(default_factory=dict)

    def __post_init__(self):
        self.entries = {LatticeIndex(*k): float(v) for k, v in self.entries.items()}
        if self.entries.get(ORIGIN, 0.0) != 0.0:
            raise ValueError("a vector on Ran Q has no component at the origin")
        self.entries.pop(ORIGIN, None)

    def __getitem__(self, n) -> float:
        return self.entries.get(LatticeIndex(*n), 0.0)

    def __len__(self) -> int:
        return len(self.entries)

    def norm(self) -> float:
        return math.sqrt(math.fsum(v * v for v in self.entries.values()))

    def dot(self, other: "CoefficientVector") -> float:
        return math.fsum(v * other[k] for k, v in self.entries.items())

    def support(self) -> list[LatticeIndex]:
        return sorted(k for k, v in self.entries.items() if v != 0.0)

    def to_json(self) -> str:
        items = sorted(self.entries.items(), key=lambda kv: (kv[0].n2, kv[0].n1))
        return json.dumps({f"[{k.n1},{k.n2}]": v for k, v in items})

    @classmethod
    def from_json(cls, text: str) -> "CoefficientVector":
        raw = json.loads(text)
        return cls({tuple(json.loads(k)): v for k, v in raw.items()})


class _Grid:
    """Square window |n1|, |n2| <= R holding vectors as dense arrays indexed [n1+R, n2+R]."""

    def __init__(self, radius: int, omega: float):
        self.R = radius
        ax = np.arange(-radius, radius + 1)
        n1, n2 = np.meshgrid(ax, ax, indexing="ij")
        self.n1, self.n2 = n1, n2
        self.F = omega * n1 + (n2.astype(float)) ** 2
        self.origin = (radius, radius)

    def zeros(self) -> np.ndarray:
        return np.zeros(self.F.shape)

    def qvf(self) -> np.ndarray:
        x = self.zeros()
        R = self.R
        for s1, s2 in ((1, 1), (1, -1), (-1, 1), (-1, -1)):
            x[R + s1, R + s2] = 1.0
        return x

    def apply_V(self, x: np.ndarray) -> np.ndarray:
        """V x, dropping anything pushed off the window (callers size R to avoid that)."""
        p = np.pad(x, 1)
        return p[:-2, :-2] + p[:-2, 2:] + p[2:, :-2] + p[2:, 2:]

    def apply_Vhat(self, x: np.ndarray) -> np.ndarray:
        y = self.apply_V(x)
        y[self.origin] = 0.0
        return y

    def resolvent_factors(self, lam: float) -> np.ndarray:
        """1/(F(n) - lambda) off the origin, 0 at the origin."""
        d = self.F - lam
        d[self.origin] = 1.0
        reach = np.maximum(np.abs(self.n1), np.abs(self.n2)) < self.R
        if np.any((d == 0.0) & reach):
            i, j = np.argwhere((d == 0.0) & reach)[0]
            raise ZeroDenominator(f"F({i - self.R}, {j - self.R}) equals lambda = {lam!r}")
        d[d == 0.0] = np.inf  # rim entries no path of the requested length can reach
        out = 1.0 / d
        out[self.origin] = 0.0
        return out

    def to_vector(self, x: np.ndarray) -> CoefficientVector:
        idx = np.argwhere(x != 0.0)
        return CoefficientVector(
            {LatticeIndex(int(i - self.R), int(j - self.R)): float(x[i, j]) for i, j in idx}
        )


def transfer_terms(lam: float, M: int, params: ModelParams, radius: int | None = None):
    """Return (grid, [v_1, ..., v_M]) with v_k = (Gamma V-hat)^(k-1) Gamma QVf."""
    grid = _Grid(radius if radius is not None else M + 1, params.omega)
    gam = grid.resolvent_factors(lam)
    v = gam * grid.qvf()
    out = [v]
    for _ in range(M - 1):
        v = gam * grid.apply_Vhat(v)
        out.append(v)
    return grid, out


# ---------------------------------------------------------------------------
# g(beta, lambda)


def g_series(beta: float, lam: float, M_max: int, params: ModelParams) -> CoefficientVector:
    """Partial sum sum_{k=0}^{M_max-1} (-beta)^(k+1) (Gamma V-hat)^k Gamma QVf."""
    grid, terms = transfer_terms(lam, M_max, params)
    return grid.to_vector(_combine(beta, terms))


def _combine(beta: float, terms) -> np.ndarray:
    g = np.zeros_like(terms[0])
    # highest order first so small terms are added before large ones
    for k in range(len(terms) - 1, -1, -1):
        g += (-beta) ** (k + 1) * terms[k]
    return g


def g_series_paths(beta: float, lam: float, M_max: int, params: ModelParams) -> CoefficientVector:
    """Same partial sum assembled path by path from P(1), ..., P(M_max)."""
    acc: dict[LatticeIndex, list[float]] = {}
    for M in range(1, M_max + 1):
        sums = open_path_endpoint_sums(lam, M, params)
        coeff = (-beta) ** M
        for n, s in sums.items():
            acc.setdefault(n, []).append(coeff * s)
    return CoefficientVector({n: math.fsum(v) for n, v in acc.items()})


def _path_products(paths: np.ndarray, lam: float, params: ModelParams) -> np.ndarray:
    verts = paths[:, 1:, :]
    denom = params.omega * verts[..., 0] + verts[..., 1].astype(float) ** 2 - lam
    if np.any(denom == 0.0):
        raise ZeroDenominator(f"a path meets F(n) = lambda = {lam!r}")
    return np.prod(1.0 / denom, axis=1)


def _endpoint_keys(paths: np.ndarray, M: int) -> np.ndarray:
    end = paths[:, -1, :] + M
    return end[:, 0] * (2 * M + 1) + end[:, 1]


def open_path_endpoint_sums(lam: float, M: int, params: ModelParams) -> dict[LatticeIndex, float]:
    """Sum over P(M) of the resolvent products, grouped by final vertex."""
    paths = open_path_array(M)
    prods = _path_products(paths, lam, params)
    keys = _endpoint_keys(paths, M)
    sums = np.bincount(keys, weights=prods, minlength=(2 * M + 1) ** 2)
    out = {}
    for key in np.flatnonzero(np.bincount(keys, minlength=(2 * M + 1) ** 2)):
        n1, n2 = divmod(int(key), 2 * M + 1)
        out[LatticeIndex(n1 - M, n2 - M)] = float(sums[key])
    return out


def basic_residual(beta: float, lam: float, M_max: int, params: ModelParams) -> float:
    """|| (K-hat + beta V-hat - lambda) g + beta QVf || for the order-M_max partial sum.

    The window is one step wider than the support of g, so every component of
    the residual, boundary included, is counted.
    """
    grid, terms = transfer_terms(lam, M_max, params, radius=M_max + 2)
    g = _combine(beta, terms)
    k_hat = grid.F.copy()
    k_hat[grid.origin] = 0.0
    r = (k_hat - lam) * g + beta * grid.apply_Vhat(g) + beta * grid.qvf()
    return float(np.linalg.norm(r))


# ---------------------------------------------------------------------------
# G(beta, lambda)


@dataclass(frozen=True)
class GSeries:
    """G_2, G_4, ..., G_{2 k_max} at one lambda; ``odd`` holds G_3, G_5, ... as computed."""

    coefficients: tuple[float, ...]
    lam: float
    truncation: int
    odd: tuple[float, ...] = ()

    def __getitem__(self, order: int) -> float:
        if order < 2:
            raise IndexError("G coefficients start at order 2")
        if order % 2:
            return self.odd[(order - 3) // 2] if (order - 3) // 2 < len(self.odd) else 0.0
        return self.coefficients[order // 2 - 1]

    def evaluate(self, beta: float) -> float:
        b2 = beta * beta
        return math.fsum(c * b2 ** (k + 1) for k, c in enumerate(self.coefficients))

    def d_beta(self, beta: float) -> float:
        b2 = beta * beta
        return math.fsum(
            2 * (k + 1) * c * beta * b2 ** k for k, c in enumerate(self.coefficients)
        )


def G_coefficients(
    lam: float, k_max: int, params: ModelParams, method: str = "transfer"
) -> GSeries:
    """G_{2k}(lambda) = -<QVf, (Gamma V-hat)^(2k-2) Gamma QVf> for k = 1..k_max."""
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if method == "transfer":
        return _G_transfer(float(lam), int(k_max), params.omega)
    if method == "paths":
        even = []
        for k in range(1, k_max + 1):
            paths = closed_path_array(2 * k)
            inner = paths[:, :-1, :]  # drop the final return to the origin
            even.append(-math.fsum(_path_products(inner, lam, params)))
        return GSeries(tuple(even), lam, k_max, odd=tuple(0.0 for _ in range(k_max - 1)))
    raise ValueError(f"unknown method {method!r}")


@lru_cache(maxsize=4096)
def _G_transfer(lam: float, k_max: int, omega: float) -> GSeries:
    params = ModelParams(omega=omega)
    grid, terms = transfer_terms(lam, 2 * k_max - 1, params)
    f = grid.qvf()
    inner = [0.0 - float(np.sum(f * v)) for v in terms]  # inner[j] = -<QVf, v_{j+1}>
    return GSeries(tuple(inner[0::2]), lam, k_max, odd=tuple(inner[1::2]))


def G2_closed_form(lam: float, omega: float) -> float:
    e = 1.0 - lam
    return 4 * e / (omega * omega - e * e)


def domain_radius(lam: float, C_hat: float, params: ModelParams) -> float:
    """Largest |beta| of the convergence domain, (2|lambda|/omega)^(rho/2) / (2 C_hat)."""
    return (2 * abs(lam) / params.omega) ** (params.rho / 2) / (2 * C_hat)


def G_eval(
    beta: float, lam: float, k_max: int, params: ModelParams, C_hat: float | None = None
) -> float:
    """sum_{k=1}^{k_max} beta^(2k) G_{2k}(lambda)."""
    if C_hat is not None and abs(beta) > domain_radius(lam, C_hat, params):
        warnings.warn(
            f"|beta| = {abs(beta):.3g} exceeds the convergence radius "
            f"{domain_radius(lam, C_hat, params):.3g} for C_hat = {C_hat:.3g}",
            DivergenceWarning,
            stacklevel=2,
        )
    return G_coefficients(lam, k_max, params).evaluate(beta)


def G_tail_bound(
    beta: float, lam: float, k_max: int, C_hat: float, params: ModelParams,
    v_norm: float | None = None,
) -> float:
    """Bound on sum_{k > k_max} beta^(2k) |G_{2k}| from the per-coefficient estimate.

    |G_{2k}| <= ||V|| x^rho (x^(-rho/2) C_hat)^(2k-1), x = 2|lambda|/omega.
    Returns inf outside the geometric convergence region.
    """
    if lam == 0.0:
        return math.inf
    vn = operator_norm_V() if v_norm is None else v_norm
    x = 2 * abs(lam) / params.omega
    a = x ** (-params.rho / 2) * C_hat
    q = (beta * a) ** 2
    if q >= 1.0:
        return math.inf
    first = vn * x ** params.rho * a ** (2 * k_max + 1) * beta ** (2 * k_max + 2)
    return first / (1 - q)


@lru_cache(maxsize=8)
def operator_norm_V(radius: int = 150) -> float:
    """Largest eigenvalue of the nearest-diagonal-neighbour sum on a (2R+1)^2 window.

    On the full lattice this is sup |4 cos t cos x| = 4; the window value
    approaches it from below like 4 cos^2(pi / (2R + 2)).
    """
    side = 2 * radius + 1
    shift = sp.diags([np.ones(side - 1), np.ones(side - 1)], [-1, 1], format="csr")
    V = sp.kron(shift, shift, format="csr")
    return float(eigsh(V, k=1, which="LA", return_eigenvectors=False, tol=1e-12)[0])


# ---------------------------------------------------------------------------
# vector estimate with short-loop compensation


@dataclass(frozen=True)
class NormCheck:
    M: int
    lam: float
    norm_naive: float
    norm_compensated: float
    norm_transfer: float
    max_abs_diff: float
    bound: float
    C_hat_estimate: float
    short_loop_paths: int
    classes_with_loops: int
    C3: float


def _sprime_mask(paths: np.ndarray, sprime: RestrictedCriticalSet) -> np.ndarray:
    mask = np.zeros(paths.shape[:2], dtype=bool)
    reach = paths.shape[1] - 1
    for n in sprime.members:
        if max(abs(n.n1), abs(n.n2)) > reach:
            continue
        mask |= (paths[..., 0] == n.n1) & (paths[..., 1] == n.n2)
    mask[:, 0] = False
    return mask


def _short_loops(path: np.ndarray, visits: np.ndarray, sprime) -> list[tuple[int, int]]:
    """(start, end) of each short loop; a segment ending at v is short iff shorter than L(v)."""
    loops = []
    prev = 0
    for j in visits:
        v = LatticeIndex(int(path[j, 0]), int(path[j, 1]))
        if prev != 0 and j - prev < sprime.L[v]:
            if tuple(path[prev]) != tuple(v):
                raise AssertionError("short segment does not close on its base vertex")
            loops.append((prev, int(j)))
        prev = int(j)
    return loops


def _class_sum(path: np.ndarray, loops, lam: float, omega: float) -> float:
    """Sum over the 2^s paths obtained by flipping the short loops of ``path``.

    Non-loop vertices contribute their plain factor.  For each loop the pair of
    orientations contributes u_base (prod u - prod v) with u_s = 1/(F(m_s)-lam)
    and v_s = 1/(lam - F(m'_s)), the difference written as the telescoping sum
    sum_s u_1..u_{s-1} (u_s - v_s) v_{s+1}..v_r.
    """
    M = path.shape[0] - 1
    inside = np.zeros(M + 1, dtype=bool)
    total = 1.0
    for start, end in loops:
        base = path[start]
        interior = path[start + 1 : end]
        mirror = 2 * base - interior
        fu = omega * interior[:, 0] + interior[:, 1].astype(float) ** 2 - lam
        fv = omega * mirror[:, 0] + mirror[:, 1].astype(float) ** 2 - lam
        u, v = 1.0 / fu, -1.0 / fv
        diff = math.fsum(
            float(np.prod(u[:s]) * (u[s] - v[s]) * np.prod(v[s + 1 :])) for s in range(len(u))
        )
        total *= diff / (omega * base[0] + float(base[1]) ** 2 - lam)
        inside[start + 1 : end + 1] = True
    for j in range(1, M + 1):
        if not inside[j]:
            total /= omega * path[j, 0] + float(path[j, 1]) ** 2 - lam
    return total


def _canonical_key(path: np.ndarray, loops) -> bytes:
    """Class label: each short loop put in the orientation whose first step has index <= 1."""
    p = path.copy()
    for start, end in loops:
        step = p[start + 1] - p[start]
        if step[0] < 0:  # steps (-1, +-1) have index 2 and 3
            p[start + 1 : end] = 2 * p[start] - p[start + 1 : end]
    return p.tobytes()


def compensated_endpoint_sums(
    lam: float, M: int, params: ModelParams, sprime: RestrictedCriticalSet
) -> tuple[dict[LatticeIndex, float], dict[LatticeIndex, float], int, int]:
    """Endpoint sums over P(M) computed naively and class by class.

    Returns (naive, compensated, number of paths carrying short loops, number
    of classes with at least one short loop).
    """
    paths = open_path_array(M)
    prods = _path_products(paths, lam, params)
    keys = _endpoint_keys(paths, M)
    size = (2 * M + 1) ** 2
    naive = np.bincount(keys, weights=prods, minlength=size)

    mask = _sprime_mask(paths, sprime)
    candidates = np.flatnonzero(mask.sum(axis=1) >= 2)
    loop_rows, loop_lists = [], []
    for r in candidates:
        loops = _short_loops(paths[r], np.flatnonzero(mask[r]), sprime)
        if loops:
            loop_rows.append(r)
            loop_lists.append(loops)
    plain = np.ones(len(paths), dtype=bool)
    plain[loop_rows] = False
    comp = np.bincount(keys[plain], weights=prods[plain], minlength=size)

    seen: dict[bytes, tuple[int, float]] = {}
    class_sizes: dict[bytes, int] = {}
    for r, loops in zip(loop_rows, loop_lists):
        label = _canonical_key(paths[r], loops)
        class_sizes[label] = class_sizes.get(label, 0) + 1
        if label not in seen:
            seen[label] = (int(keys[r]), _class_sum(paths[r], loops, lam, params.omega))
        expected = 2 ** len(loops)
        if class_sizes[label] > expected:
            raise AssertionError("equivalence class larger than 2^s")
    extra: dict[int, list[float]] = {}
    for key, value in seen.values():
        extra.setdefault(key, []).append(value)
    for key, vals in extra.items():
        comp[key] = math.fsum([comp[key]] + vals)

    counts = np.bincount(keys, minlength=size)

    def to_dict(arr):
        out = {}
        for key in np.flatnonzero(counts):
            n1, n2 = divmod(int(key), 2 * M + 1)
            out[LatticeIndex(n1 - M, n2 - M)] = float(arr[key])
        return out

    return to_dict(naive), to_dict(comp), len(loop_rows), len(seen)


def path_norm_bound(M: int, lam: float, C_hat: float, params: ModelParams) -> float:
    x = 2 * abs(lam) / params.omega
    if M == 1:
        return C_hat
    return x ** params.rho * (x ** (-params.rho / 2) * C_hat) ** M


def c_hat_from_norm(M: int, norm: float, lam: float, params: ModelParams) -> float:
    """Smallest C_hat with ``norm`` <= the vector estimate at order M."""
    if M == 1:
        return norm
    x = 2 * abs(lam) / params.omega
    return x ** (params.rho / 2) * (norm / x ** params.rho) ** (1.0 / M)


def _check_lambda(lam: float, params: ModelParams) -> None:
    if lam == 0.0 or abs(lam) > params.omega / 3:
        raise PreconditionViolated(f"need 0 < |lambda| <= omega/3, got {lam}")
    if not in_lambda_set(lam, params):
        raise PreconditionViolated(f"lambda = {lam} is not in Lambda (cutoff {params.n2_cutoff})")


def path_norm_check(
    M: int,
    lam: float,
    params: ModelParams,
    b: int | None = None,
    C_hat: float | None = None,
) -> NormCheck:
    """||(Gamma V-hat)^(M-1) Gamma QVf|| by plain path sums and by loop-compensated classes.

    ``b`` selects the restricted critical set; the default is the smallest
    admissible bound.  Smaller values make short loops reachable at lower M.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    _check_lambda(lam, params)
    sprime = restricted_critical_set(params, b)
    naive, comp, n_loop_paths, n_classes = compensated_endpoint_sums(lam, M, params, sprime)
    vec_naive = np.array([naive[k] for k in sorted(naive)])
    vec_comp = np.array([comp[k] for k in sorted(naive)])
    grid, terms = transfer_terms(lam, M, params)
    norm_t = float(np.linalg.norm(terms[-1]))
    norm_n = float(np.linalg.norm(vec_naive))
    c_est = c_hat_from_norm(M, norm_n, lam, params)
    bound = path_norm_bound(M, lam, C_hat if C_hat is not None else c_est, params)
    # C3: smallest |F(n) - lambda| over visited n outside S'
    reach = np.maximum(np.abs(grid.n1), np.abs(grid.n2)) <= M
    off = reach.copy()
    off[grid.origin] = False
    for n in sprime.members:
        if abs(n.n1) <= grid.R and abs(n.n2) <= grid.R:
            off[n.n1 + grid.R, n.n2 + grid.R] = False
    c3 = float(np.min(np.abs(grid.F[off] - lam)))
    return NormCheck(
        M, lam, norm_n, float(np.linalg.norm(vec_comp)), norm_t,
        float(np.max(np.abs(vec_naive - vec_comp))), bound, c_est, n_loop_paths, n_classes, c3,
    )


def estimate_C_hat(lambdas, M_max: int, params: ModelParams) -> float:
    """Largest C_hat needed over lambda in ``lambdas`` and orders 1..M_max (transfer form)."""
    best = 0.0
    for lam in lambdas:
        _, terms = transfer_terms(lam, M_max, params)
        for M, v in enumerate(terms, start=1):
            best = max(best, c_hat_from_norm(M, float(np.linalg.norm(v)), lam, params))
    return best


# ---------------------------------------------------------------------------
# the two-parameter identity for G


@dataclass(frozen=True)
class IdentityCheck:
    residual: float
    overlap: float
    G1: float
    G2: float


def two_point_identity_check(
    beta: float, lam1: float, lam2: float, params: ModelParams, M_max: int = 12
) -> IdentityCheck:
    """|G(beta,lam2) - G(beta,lam1) + (lam2-lam1) <g(beta,lam2), g(beta,lam1)>|.

    G is taken as beta <QVf, g> with the same truncated g, so the residual
    measures the truncation of g only.
    """
    R = M_max + 1
    grid1, t1 = transfer_terms(lam1, M_max, params, radius=R)
    _, t2 = transfer_terms(lam2, M_max, params, radius=R)
    g1, g2 = _combine(beta, t1), _combine(beta, t2)
    f = grid1.qvf()
    G1 = beta * float(np.sum(f * g1))
    G2 = beta * float(np.sum(f * g2))
    overlap = float(np.sum(g1 * g2))
    return IdentityCheck(abs(G2 - G1 + (lam2 - lam1) * overlap), overlap, G1, G2)
