"""Small numerical helpers shared by several modules."""
from __future__ import annotations

from typing import Callable

from .errors import NoSignChange


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    xtol: float = 0.0,
    max_iter: int = 200,
) -> float:
    """Root of a continuous f on [lo, hi] with f(lo), f(hi) of opposite sign.

    Halves until the bracket is narrower than ``xtol`` or cannot shrink in
    floating point; returns the endpoint with the smaller |f|.
    """
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if (flo > 0) == (fhi > 0):
        raise NoSignChange(f"f({lo!r}) = {flo!r} and f({hi!r}) = {fhi!r} share a sign")
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi or hi - lo <= xtol:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi, fhi = mid, fm
    return lo if abs(flo) <= abs(fhi) else hi
