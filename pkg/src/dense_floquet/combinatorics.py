"""Tree compositions, lattice paths and short-loop bookkeeping.

Paths live on the sublattice spanned by (1, 1) and (1, -1) and start at the
origin.  Closed paths return to the origin only at their last vertex; open
paths never come back.  Enumeration order is lexicographic in the step
sequence, with steps ordered as in :data:`lattice.STEPS`.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Iterator, Mapping, Sequence

import numpy as np

from .errors import CutoffTooSmall, InvalidComposition, NotAPath
from .lattice import ORIGIN, STEPS, LatticeIndex, critical_set, locality_map

LatticePath = tuple[LatticeIndex, ...]

_STEP_INDEX = {s: i for i, s in enumerate(STEPS)}
STEP_ARRAY = np.array(STEPS, dtype=np.int64)


# ---------------------------------------------------------------------------
# rooted tree compositions


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """All tuples of ``parts`` nonnegative integers summing to ``total`` (lex order)."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    for first in range(total + 1):
        for rest in compositions(total - first, parts - 1):
            yield (first,) + rest


def is_tree(nu: Sequence[int]) -> bool:
    n = len(nu)
    if n == 0 or any(v < 0 for v in nu) or sum(nu) != n - 1:
        return False
    suffix = 0
    for k in range(n, 1, -1):  # k = N .. 2, 1-based
        suffix += nu[k - 1]
        if suffix > n - k:
            return False
    return True


def enumerate_trees(N: int) -> list[tuple[int, ...]]:
    """The set T(N) of rooted N-tree compositions, lexicographically sorted.

    Built by prefix extension: the suffix constraint is equivalent to
    nu_1 + ... + nu_{k-1} >= k - 1 for 2 <= k <= N.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    out: list[tuple[int, ...]] = []

    def extend(prefix: list[int], s: int) -> None:
        i = len(prefix)
        if i == N - 1:
            out.append(tuple(prefix) + (N - 1 - s,))
            return
        for v in range(0, N - 1 - s + 1):
            if s + v >= i + 1:
                prefix.append(v)
                extend(prefix, s + v)
                prefix.pop()

    extend([], 0)
    return out


def rotate(sigma: Sequence[int], m: int) -> tuple[int, ...]:
    """(sigma_{N-m+1}, ..., sigma_N, sigma_1, ..., sigma_{N-m})."""
    n = len(sigma)
    m %= n
    return tuple(sigma[n - m :]) + tuple(sigma[: n - m])


def tree_rotation(sigma: Sequence[int]) -> int:
    """The unique shift m in {0..N-1} with ``rotate(sigma, m)`` in T(N)."""
    n = len(sigma)
    if n == 0 or any(v < 0 for v in sigma) or sum(sigma) != n - 1:
        raise InvalidComposition(f"need N nonnegative entries summing to N-1, got {tuple(sigma)}")
    hits = [m for m in range(n) if is_tree(rotate(sigma, m))]
    if len(hits) != 1:
        raise AssertionError(f"{tuple(sigma)} has {len(hits)} tree rotations")
    return hits[0]


# ---------------------------------------------------------------------------
# paths


def check_path(path: Sequence[Sequence[int]], closed: bool = False) -> None:
    """Raise NotAPath unless ``path`` is a valid open (or closed) path from the origin."""
    if len(path) < 2:
        raise NotAPath("a path needs at least one step")
    if tuple(path[0]) != ORIGIN:
        raise NotAPath(f"path must start at the origin, starts at {tuple(path[0])}")
    for a, b in zip(path, path[1:]):
        if (b[0] - a[0], b[1] - a[1]) not in _STEP_INDEX:
            raise NotAPath(f"illegal step {tuple(a)} -> {tuple(b)}")
    interior = path[1:-1] if closed else path[1:]
    if any(tuple(v) == ORIGIN for v in interior):
        raise NotAPath("path revisits the origin")
    if closed and tuple(path[-1]) != ORIGIN:
        raise NotAPath("closed path must end at the origin")


def _dfs_paths(length: int, closed: bool) -> list[LatticePath]:
    out: list[LatticePath] = []
    verts = [ORIGIN]

    def extend(n1: int, n2: int, remaining: int) -> None:
        if remaining == 0:
            out.append(tuple(verts))
            return
        for s1, s2 in STEPS:
            a, b = n1 + s1, n2 + s2
            if a == 0 and b == 0:
                if closed and remaining == 1:
                    verts.append(ORIGIN)
                    out.append(tuple(verts))
                    verts.pop()
                continue
            if closed and max(abs(a), abs(b)) > remaining - 1:
                continue
            verts.append(LatticeIndex(a, b))
            extend(a, b, remaining - 1)
            verts.pop()

    extend(0, 0, length)
    return out


def enumerate_closed_paths(N: int) -> list[LatticePath]:
    """P_0(N): closed paths of length N at the origin avoiding it in between."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if N % 2:
        return []
    return _dfs_paths(N, closed=True)


def enumerate_open_paths(M: int) -> list[LatticePath]:
    """P(M): paths of length M from the origin that never return to it."""
    if M < 1:
        raise ValueError("M must be >= 1")
    return _dfs_paths(M, closed=False)


def open_path_array(M: int) -> np.ndarray:
    """Vertices of every path in P(M) as an int array of shape (|P(M)|, M+1, 2).

    Same order as :func:`enumerate_open_paths`; intended for M up to ~11 where
    tuple-of-tuples storage becomes too heavy.
    """
    if M < 1:
        raise ValueError("M must be >= 1")
    verts = np.zeros((1, 1, 2), dtype=np.int64)
    for _ in range(M):
        last = verts[:, -1, :]
        nxt = (last[:, None, :] + STEP_ARRAY[None, :, :]).reshape(-1, 2)
        keep = (nxt[:, 0] != 0) | (nxt[:, 1] != 0)
        verts = np.repeat(verts, len(STEPS), axis=0)[keep]
        verts = np.concatenate([verts, nxt[keep][:, None, :]], axis=1)
    return verts


def closed_path_array(N: int) -> np.ndarray:
    """Vertices of P_0(N) as an int array of shape (|P_0(N)|, N+1, 2)."""
    paths = enumerate_closed_paths(N)
    if not paths:
        return np.zeros((0, N + 1, 2), dtype=np.int64)
    return np.array(paths, dtype=np.int64)


def to_json_paths(paths: Sequence[Sequence[Sequence[int]]]) -> list[list[list[int]]]:
    return [[[int(v[0]), int(v[1])] for v in p] for p in paths]


# ---------------------------------------------------------------------------
# segments and short loops


@dataclass(frozen=True)
class Segment:
    """Path slice path[start..end]; the vertex at ``start`` is not attributed to it."""

    start: int
    end: int
    short_loop: bool

    @property
    def length(self) -> int:
        return self.end - self.start


def split_segments(
    path: Sequence[Sequence[int]],
    sprime: frozenset | set,
    L: Mapping[LatticeIndex, int],
) -> list[Segment]:
    """Cut a path at its vertices in ``sprime`` and flag the short loops.

    ``sprime`` holds the restricted critical indices (both signs of n2) and
    ``L`` their locality gaps.  A segment ending at v in ``sprime`` is a short
    loop iff its length is below L(v); it then starts at v as well.
    """
    check_path(path)
    cuts = [j for j in range(1, len(path)) if LatticeIndex(*path[j]) in sprime]
    segments = []
    prev = 0
    for j in cuts:
        v = LatticeIndex(*path[j])
        short = prev != 0 and (j - prev) < L[v]
        if short and LatticeIndex(*path[prev]) != v:
            raise AssertionError(f"short segment {prev}..{j} does not close; L map inconsistent")
        segments.append(Segment(prev, j, short))
        prev = j
    if prev < len(path) - 1:
        segments.append(Segment(prev, len(path) - 1, False))
    return segments


def opposite_loop(path: Sequence[Sequence[int]], seg: Segment) -> LatticePath:
    """Replace path[seg.start..seg.end] by its point reflection through the base vertex."""
    base = path[seg.start]
    out = [LatticeIndex(*v) for v in path]
    for s in range(seg.start + 1, seg.end):
        v = path[s]
        out[s] = LatticeIndex(2 * base[0] - v[0], 2 * base[1] - v[1])
    return tuple(out)


def canonical_member(
    path: Sequence[Sequence[int]], sprime, L: Mapping[LatticeIndex, int]
) -> LatticePath:
    """Class representative: every short loop takes the orientation whose first step is lex smaller."""
    current = tuple(LatticeIndex(*v) for v in path)
    for seg in split_segments(current, sprime, L):
        if not seg.short_loop:
            continue
        a, b = current[seg.start], current[seg.start + 1]
        if _STEP_INDEX[(b[0] - a[0], b[1] - a[1])] >= 2:
            current = opposite_loop(current, seg)
    return current


def short_loop_count(path, sprime, L) -> int:
    return sum(seg.short_loop for seg in split_segments(path, sprime, L))


def equivalence_classes(
    paths: Sequence[Sequence[Sequence[int]]], sprime, L: Mapping[LatticeIndex, int]
) -> list[list[LatticePath]]:
    """Partition paths by short-loop reflection; classes ordered by first appearance."""
    classes: dict[LatticePath, list[LatticePath]] = {}
    for p in paths:
        p = tuple(LatticeIndex(*v) for v in p)
        classes.setdefault(canonical_member(p, sprime, L), []).append(p)
    return list(classes.values())


def count_sprime_vertices(path: Sequence[Sequence[int]], sprime) -> int:
    """N(path): number of vertices (after the origin) lying in ``sprime``."""
    return sum(LatticeIndex(*v) in sprime for v in path[1:])


def all_step_words(M: int) -> Iterator[tuple[int, ...]]:
    """Every word of M step indices; a brute-force source for enumeration tests."""
    return itertools.product(range(len(STEPS)), repeat=M)


# ---------------------------------------------------------------------------
# restricted critical set S'


@dataclass(frozen=True)
class RestrictedCriticalSet:
    """S' = {n in S : |n2| > b} with both signs of n2, plus L on S'."""

    b: int
    members: frozenset
    L: dict

    def __contains__(self, n) -> bool:
        return LatticeIndex(*n) in self.members


def restriction_bound(params) -> int:
    """Smallest b >= 3 with 4*omega <= min(dE(k), dE(k-1)) for k > b and L >= 2 beyond b.

    dE(k) = 2k + 1, so the gap condition reads 2b + 1 >= 4*omega.  The L
    condition is only checked on rows whose neighbours are inside the cutoff.
    """
    b = max(3, int(np.ceil((4 * params.omega - 1) / 2)))
    while 2 * b + 1 < 4 * params.omega:
        b += 1
    lmap = locality_map(critical_set(params))
    bad_rows = [n.n2 for n, (_, ell) in lmap.items() if ell < 2]
    if bad_rows:
        b = max(b, max(bad_rows))
    if b >= params.n2_cutoff - 1:
        raise CutoffTooSmall(
            f"restriction bound b={b} leaves no checked rows below n2_cutoff={params.n2_cutoff}"
        )
    return b


def restricted_critical_set(params, b: int | None = None) -> RestrictedCriticalSet:
    """Build S' for bound ``b`` (default: :func:`restriction_bound`).

    Passing a smaller ``b`` is allowed for experiments on the compensation
    bookkeeping; the regrouping stays exact for any b because L is the true
    locality gap.
    """
    if b is None:
        b = restriction_bound(params)
    lmap = locality_map(critical_set(params))
    members = set()
    L = {}
    for n, (_, ell) in lmap.items():
        if n.n2 > b:
            for sign in (1, -1):
                m = LatticeIndex(n.n1, sign * n.n2)
                members.add(m)
                L[m] = ell
    return RestrictedCriticalSet(b, frozenset(members), L)
