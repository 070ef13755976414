"""Index set, quasi-energies and critical indices of the model.

The unperturbed Floquet operator K = -i omega d/dt - d^2/dx^2 on the
two-torus is diagonal in the Fourier basis e^{i n1 t} e^{i n2 x} with
quasi-energy F(n) = omega*n1 + n2**2.  The perturbation 4 cos t cos x couples
each index to its four diagonal neighbours.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import CutoffTooSmall, DegenerateFrequency


class LatticeIndex(NamedTuple):
    n1: int
    n2: int


def shift(n: Sequence[int], step: Sequence[int]) -> LatticeIndex:
    return LatticeIndex(n[0] + step[0], n[1] + step[1])


ORIGIN = LatticeIndex(0, 0)

# Generator steps of the sublattice Z(1,1) + Z(1,-1), in enumeration order.
STEPS: tuple[LatticeIndex, ...] = (
    LatticeIndex(1, 1),
    LatticeIndex(1, -1),
    LatticeIndex(-1, 1),
    LatticeIndex(-1, -1),
)
_STEP_SET = frozenset(STEPS)


def on_sublattice(n: Sequence[int]) -> bool:
    return (n[0] + n[1]) % 2 == 0


@dataclass(frozen=True)
class ModelParams:
    """All model constants and cutoffs for one computation run."""

    omega: float = math.sqrt(2.0)
    gamma: float = 0.05
    sigma: float = 1.5
    tau: float = 2.0
    rho: float | None = field(default=None)
    n2_cutoff: int = 200
    path_cutoff: int = 12

    def __post_init__(self):
        if self.rho is None:
            object.__setattr__(self, "rho", 1.0 / self.sigma)
        if not (self.omega > 0 and math.isfinite(self.omega)):
            raise ValueError(f"omega must be positive and finite, got {self.omega}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not 1 < self.sigma < 2:
            raise ValueError(f"sigma must lie in (1, 2), got {self.sigma}")
        if self.tau != 2.0:
            raise ValueError(f"tau is fixed to 2 for this model, got {self.tau}")
        if abs(self.rho - 1.0 / self.sigma) > 1e-12:
            raise ValueError(f"rho must equal 1/sigma = {1 / self.sigma}, got {self.rho}")
        for name in ("n2_cutoff", "path_cutoff"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise ValueError(f"{name} must be a positive integer, got {value}")
            object.__setattr__(self, name, int(value))

    def with_(self, **changes) -> "ModelParams":
        if "sigma" in changes and "rho" not in changes:
            changes["rho"] = None
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping) -> "ModelParams":
        known = {k: data[k] for k in cls.__dataclass_fields__ if k in data}
        unknown = set(data) - set(known)
        if unknown:
            raise ValueError(f"unknown ModelParams keys: {sorted(unknown)}")
        return cls(**known)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "ModelParams":
        return cls.from_dict(json.loads(text))


def eigenvalue(n: Sequence[int], params: ModelParams) -> float:
    """Quasi-energy F(n) = omega*n1 + n2**2."""
    return params.omega * n[0] + n[1] * n[1]


def potential_element(m: Sequence[int], n: Sequence[int]) -> int:
    """Matrix element V(m, n) of 4 cos t cos x in the eigenbasis of K."""
    return 1 if (m[0] - n[0], m[1] - n[1]) in _STEP_SET else 0


def is_critical(n: Sequence[int], params: ModelParams) -> bool:
    """True iff F(n) lies in ]-omega/2, omega/2] and is nonzero (n2 of either sign)."""
    if n[0] == 0 and n[1] == 0:
        return False
    f = eigenvalue(n, params)
    half = params.omega / 2
    return -half < f <= half and f != 0.0


def _critical_n1(n2: int, params: ModelParams) -> int:
    omega = params.omega
    half = omega / 2
    centre = -(n2 * n2) / omega
    hits = []
    for n1 in range(math.floor(centre) - 1, math.ceil(centre) + 2):
        f = omega * n1 + n2 * n2
        if f == 0.0:
            raise DegenerateFrequency(
                f"F({n1}, {n2}) = 0 for omega = {omega!r}; choose an irrational frequency"
            )
        if -half < f <= half:
            hits.append(n1)
    # the window has width omega, so exactly one integer lands in it
    assert len(hits) == 1, (n2, hits)
    return hits[0]


def critical_set(params: ModelParams, n2_max: int | None = None) -> list[LatticeIndex]:
    """Critical indices with 1 <= n2 <= cutoff, sorted by n2.

    Negative n2 are not listed; they mirror the positive ones since
    F(n1, n2) = F(n1, -n2).
    """
    top = params.n2_cutoff if n2_max is None else n2_max
    return [LatticeIndex(_critical_n1(n2, params), n2) for n2 in range(1, top + 1)]


@lru_cache(maxsize=32)
def critical_rows(params: ModelParams) -> dict[int, int]:
    """Cached ``{n2: n1}`` view of the critical set up to ``n2_cutoff``."""
    return {n.n2: n.n1 for n in critical_set(params)}


def _critical_lookup(S: Iterable[Sequence[int]] | Mapping[int, int]) -> dict[int, int]:
    if isinstance(S, Mapping):
        return dict(S)
    return {abs(n[1]): n[0] for n in S}


def locality_gap(
    n: Sequence[int], S: Iterable[Sequence[int]] | Mapping[int, int]
) -> tuple[int, int]:
    """Return (d(n), L(n)) for a critical index n.

    d(n) is the smallest horizontal distance from n to a critical index one
    row above or below; L(n) = min(|n2|, d(n)).  ``S`` is the critical set
    (list of indices or an ``{n2: n1}`` map); rows with negative n2 use the
    mirror image.
    """
    lookup = _critical_lookup(S)
    row = abs(n[1])
    if lookup.get(row) != n[0]:
        raise ValueError(f"{tuple(n)} is not in the supplied critical set")
    if row + 1 not in lookup:
        raise CutoffTooSmall(f"row {row + 1} is beyond the critical-set cutoff")
    gaps = [abs(lookup[row + 1] - n[0])]
    if row - 1 in lookup:
        gaps.append(abs(lookup[row - 1] - n[0]))
    d = min(gaps)
    return d, min(row, d)


def locality_map(S: Sequence[Sequence[int]]) -> dict[LatticeIndex, tuple[int, int]]:
    """(d, L) for every member of S whose upper neighbour row is available."""
    lookup = _critical_lookup(S)
    out = {}
    for n2, n1 in sorted(lookup.items()):
        if n2 + 1 in lookup:
            out[LatticeIndex(n1, n2)] = locality_gap((n1, n2), lookup)
    return out


def level(k: int) -> int:
    """E(k) = k**2."""
    return k * k


def gap_constant(alpha: float, k_max: int) -> float:
    """min over 0 <= k <= k_max of (E(k+1) - E(k)) / (k+1)**alpha."""
    return min((level(k + 1) - level(k)) / (k + 1) ** alpha for k in range(k_max + 1))


def gap2_holds(c_e: float, alpha: float, j_max: int) -> bool:
    """Exhaustively test |E(j)-E(k)| >= c_e/(alpha+1) |j-k| max(j,k)**alpha."""
    for j in range(j_max + 1):
        for k in range(j_max + 1):
            lhs = abs(level(j) - level(k))
            rhs = c_e / (alpha + 1) * abs(j - k) * max(j, k) ** alpha
            if lhs < rhs:
                return False
    return True
