"""Maximum-similarity linear assignment.

``solve_assignment`` runs a minimizing Kuhn-Munkres solver on the negated
scores, then walks the equality subgraph of the optimal dual to return the
lexicographically smallest optimal permutation. ``brute_force_assignment``
enumerates every permutation and is kept as a test oracle.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

BRUTE_FORCE_MAX_N = 9


@dataclass(frozen=True)
class AssignmentResult:
    permutation: tuple[int, ...]  # permutation[row] = column
    total_score: float

    def inverse(self) -> tuple[int, ...]:
        """Column-to-row view: ``inverse()[col]`` is the row assigned to ``col``."""
        inv = [0] * len(self.permutation)
        for row, col in enumerate(self.permutation):
            inv[col] = row
        return tuple(inv)


def _as_score_matrix(s) -> np.ndarray:
    arr = np.asarray(s, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise ValueError(f"score matrix must be square, got shape {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError("score matrix must be at least 1x1")
    if not np.all(np.isfinite(arr)):
        raise ValueError("score matrix contains non-finite entries")
    return arr


def _tie_tolerance(arr: np.ndarray) -> float:
    return 1e-9 * max(1.0, float(np.max(np.abs(arr))))


def _total(rows: list[list[float]], perm) -> float:
    total = 0.0
    for i, j in enumerate(perm):
        total += rows[i][j]
    return total


def _hungarian_min(cost: list[list[float]]) -> tuple[list[int], list[float], list[float]]:
    """Shortest-augmenting-path Hungarian method, O(n^3).

    Returns (row_to_col, u, v) with reduced costs ``cost[i][j] - u[i] - v[j] >= 0``
    and equality on the returned matching.
    """
    n = len(cost)
    inf = math.inf
    # 1-indexed potentials; column 0 is the virtual source
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    owner = [0] * (n + 1)
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = owner[j0]
            row = cost[i0 - 1]
            delta = inf
            j1 = 0
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[owner[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    row_to_col = [0] * n
    for j in range(1, n + 1):
        row_to_col[owner[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _lexicographic_tight_matching(
    tight: list[list[int]], match: list[int]
) -> list[int]:
    """Smallest perfect matching (row-major lexicographic) inside the tight graph.

    ``match`` must already be a perfect matching using only tight edges.
    """
    n = len(match)
    owner = [0] * n
    for r, c in enumerate(match):
        owner[c] = r
    col_fixed = [False] * n

    for i in range(n):
        for j in tight[i]:
            if col_fixed[j]:
                continue
            if match[i] == j:
                break
            # re-route: the row holding j must reach match[i] by an alternating
            # path over unfixed rows/columns that avoids row i and column j
            target = match[i]
            start = owner[j]
            visited = [False] * n
            visited[j] = True
            parent: dict[int, tuple[int, int]] = {}
            stack = [start]
            found = False
            while stack and not found:
                r = stack.pop()
                for c in tight[r]:
                    if visited[c] or col_fixed[c]:
                        continue
                    visited[c] = True
                    parent[c] = (r, -1)
                    if c == target:
                        found = True
                        break
                    nxt = owner[c]
                    if nxt == i:
                        continue
                    stack.append(nxt)
            if not found:
                continue
            # walk back from target, shifting each row onto the column it reached
            c = target
            while True:
                r = parent[c][0]
                prev = match[r]
                match[r] = c
                owner[c] = r
                if r == start:
                    break
                c = prev
            match[i] = j
            owner[j] = i
            break
        col_fixed[match[i]] = True
    return match


def solve_assignment(s) -> AssignmentResult:
    """Maximize the total score of a one-to-one row/column matching.

    Among co-optimal permutations the lexicographically smallest is returned.

    >>> solve_assignment([[0.9, 0.2], [0.3, 0.8]]).permutation
    (0, 1)
    """
    arr = _as_score_matrix(s)
    n = arr.shape[0]
    rows = arr.tolist()
    cost = [[-x for x in r] for r in rows]
    match, u, v = _hungarian_min(cost)
    tol = _tie_tolerance(arr)
    tight = [
        [j for j in range(n) if cost[i][j] - u[i] - v[j] <= tol]
        for i in range(n)
    ]
    perm = _lexicographic_tight_matching(tight, match)
    return AssignmentResult(tuple(perm), _total(rows, perm))


def brute_force_assignment(s) -> AssignmentResult:
    """Exhaustive oracle over all N! permutations (N <= 9)."""
    arr = _as_score_matrix(s)
    n = arr.shape[0]
    if n > BRUTE_FORCE_MAX_N:
        raise ValueError(f"brute force refused for N={n} > {BRUTE_FORCE_MAX_N}")
    rows = arr.tolist()
    totals = [(perm, _total(rows, perm)) for perm in itertools.permutations(range(n))]
    best = max(t for _, t in totals)
    # an optimal permutation of the solver has every edge within tol of tight
    slack = n * _tie_tolerance(arr)
    for perm, total in totals:  # itertools yields lexicographic order
        if total >= best - slack:
            return AssignmentResult(tuple(perm), total)
    raise AssertionError("unreachable")
