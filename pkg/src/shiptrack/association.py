"""Track-to-detection association: similarity matrices, optimal and greedy assignment, gating."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .geometry import BBox, boxes_to_array, pairwise

DEFAULT_GATE = 0.1


class SimilarityMetricKind(str, enum.Enum):
    IOU = "iou"
    GIOU = "giou"
    DIOU = "diou"
    TIOU = "tiou"

    @classmethod
    def parse(cls, value: "str | SimilarityMetricKind") -> "SimilarityMetricKind":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            choices = ", ".join(m.value for m in cls)
            raise ValueError(f"unknown metric {value!r}; valid choices: {choices}") from None


@dataclass
class AssignmentResult:
    matches: List[Tuple[int, int]] = field(default_factory=list)
    unmatched_tracks: List[int] = field(default_factory=list)
    unmatched_detections: List[int] = field(default_factory=list)


def similarity_matrix(preds: Sequence[BBox], dets: Sequence[BBox], kind) -> np.ndarray:
    kind = SimilarityMetricKind.parse(kind)
    return pairwise(kind.value, boxes_to_array(preds), boxes_to_array(dets))


# --------------------------------------------------------------------------
# Optimal assignment
# --------------------------------------------------------------------------


def _hungarian(cost: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimum-cost assignment of every row of an ``n x m`` matrix, ``n <= m``.

    Shortest augmenting path form of the Kuhn-Munkres algorithm. Returns the
    column assigned to each row and the dual potentials ``(u, v)`` with
    ``u[i] + v[j] <= cost[i, j]`` everywhere and equality on assigned pairs.
    """
    n, m = cost.shape
    assert n <= m
    inf = math.inf
    u = np.zeros(n + 1)
    v = np.zeros(m + 1)
    # owner[j] is the 1-based row holding column j (column 0 is a sentinel)
    owner = np.zeros(m + 1, dtype=np.int64)
    way = np.zeros(m + 1, dtype=np.int64)
    padded = np.zeros((n + 1, m + 1))
    padded[1:, 1:] = cost
    for i in range(1, n + 1):
        owner[0] = i
        j0 = 0
        minv = np.full(m + 1, inf)
        used = np.zeros(m + 1, dtype=bool)
        while True:
            used[j0] = True
            i0 = owner[j0]
            free = ~used
            free[0] = False
            cur = padded[i0] - u[i0] - v
            better = free & (cur < minv)
            minv[better] = cur[better]
            way[better] = j0
            masked = np.where(free, minv, inf)
            j1 = int(np.argmin(masked))
            delta = masked[j1]
            u[owner[used]] += delta
            v[used] -= delta
            minv[free] -= delta
            j0 = j1
            if owner[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            owner[j0] = owner[j1]
            j0 = j1
    row_to_col = np.full(n, -1, dtype=np.int64)
    for j in range(1, m + 1):
        if owner[j]:
            row_to_col[owner[j] - 1] = j - 1
    return row_to_col, u[1:], v[1:]


def _solve_max(sim: np.ndarray) -> List[Tuple[int, int]]:
    """Pairs of a maximum-total assignment of size ``min(n, m)``, unordered ties."""
    n, m = sim.shape
    if n == 0 or m == 0:
        return []
    cost = sim.max() - sim
    if n <= m:
        cols, _, _ = _hungarian(cost)
        return [(i, int(c)) for i, c in enumerate(cols)]
    rows, _, _ = _hungarian(cost.T)
    return sorted((int(r), j) for j, r in enumerate(rows))


def _total(sim: np.ndarray, pairs: Iterable[Tuple[int, int]]) -> float:
    return math.fsum(sim[i, j] for i, j in pairs)


def _forced_total(sim: np.ndarray, fixed: List[Tuple[int, int]], dropped_rows: set,
                  n_pairs: int) -> Tuple[Optional[float], List[Tuple[int, int]]]:
    """Best total with ``fixed`` pairs forced and ``dropped_rows`` left unmatched."""
    used_rows = {i for i, _ in fixed} | dropped_rows
    used_cols = {j for _, j in fixed}
    rows = [i for i in range(sim.shape[0]) if i not in used_rows]
    cols = [j for j in range(sim.shape[1]) if j not in used_cols]
    need = n_pairs - len(fixed)
    if need > min(len(rows), len(cols)):
        return None, []
    sub = sim[np.ix_(rows, cols)]
    sub_pairs = [(rows[i], cols[j]) for i, j in _solve_max(sub)]
    pairs = sorted(fixed + sub_pairs)
    return _total(sim, pairs), pairs


def _lexicographic_optimum(sim: np.ndarray) -> List[Tuple[int, int]]:
    """Maximum-total assignment, ties broken toward the smallest sorted pair list."""
    n, m = sim.shape
    if n == 0 or m == 0:
        return []
    cost = sim.max() - sim
    if n <= m:
        cols, u, v = _hungarian(cost)
        pairs = [(i, int(c)) for i, c in enumerate(cols)]
        reduced = cost - u[:, None] - v[None, :]
    else:
        rows, u, v = _hungarian(cost.T)
        pairs = sorted((int(r), j) for j, r in enumerate(rows))
        reduced = cost - v[:, None] - u[None, :]
    best = _total(sim, pairs)
    n_pairs = min(n, m)
    # any optimal pair has zero reduced cost under optimal duals
    tol = 1e-9 * max(1.0, float(np.abs(cost).max()))
    tight = reduced <= tol

    fixed: List[Tuple[int, int]] = []
    dropped: set = set()
    for i in range(n):
        current = dict(pairs)
        cur_col = current.get(i)
        limit = m if cur_col is None else cur_col
        chosen = False
        for j in range(limit):
            if not tight[i, j] or any(j == c for _, c in fixed):
                continue
            total, cand = _forced_total(sim, fixed + [(i, j)], dropped, n_pairs)
            if total is not None and total >= best:
                best, pairs = total, cand
                fixed.append((i, j))
                chosen = True
                break
        if chosen:
            continue
        if cur_col is None:
            dropped.add(i)
        else:
            fixed.append((i, cur_col))
    return sorted(pairs)


def _result_from_pairs(pairs, sim: np.ndarray, gate: float) -> AssignmentResult:
    n, m = sim.shape
    matches = [(i, j) for i, j in pairs if sim[i, j] >= gate]
    matched_rows = {i for i, _ in matches}
    matched_cols = {j for _, j in matches}
    return AssignmentResult(
        matches=matches,
        unmatched_tracks=[i for i in range(n) if i not in matched_rows],
        unmatched_detections=[j for j in range(m) if j not in matched_cols],
    )


def _as_matrix(sim) -> np.ndarray:
    sim = np.asarray(sim, dtype=np.float64)
    if sim.ndim != 2:
        raise ValueError(f"similarity matrix must be 2-D, got shape {sim.shape}")
    if not np.all(np.isfinite(sim)):
        raise ValueError("similarity matrix contains non-finite entries")
    return sim


def solve_assignment(sim, gate: float = DEFAULT_GATE, mask_before_solve: bool = False) -> AssignmentResult:
    """Optimal one-to-one assignment maximizing total similarity, then gated.

    By default the full matrix is solved and pairs scoring below ``gate`` are
    struck afterwards. With ``mask_before_solve`` sub-gate pairs are excluded
    up front, so the solver maximizes the number of admissible pairs first and
    their total similarity second.

    Ties in total similarity resolve to the lexicographically smallest sorted
    list of ``(track, detection)`` pairs.
    """
    sim = _as_matrix(sim)
    if mask_before_solve and sim.size:
        # each admissible pair outweighs any total over sub-gate pairs
        span = float(sim.max() - sim.min()) + 1.0
        penalty = span * (min(sim.shape) + 1)
        work = np.where(sim >= gate, sim, sim - penalty)
        pairs = _lexicographic_optimum(work)
    else:
        pairs = _lexicographic_optimum(sim)
    return _result_from_pairs(pairs, sim, gate)


def greedy_assignment(sim, gate: float = DEFAULT_GATE) -> AssignmentResult:
    """Repeatedly take the largest remaining entry at or above ``gate``.

    Equal entries resolve to the lowest ``(track, detection)`` index.
    """
    sim = _as_matrix(sim)
    n, m = sim.shape
    work = sim.copy()
    pairs = []
    while work.size:
        flat = int(np.argmax(work))
        i, j = divmod(flat, m)
        if not work[i, j] >= gate:
            break
        pairs.append((i, j))
        work[i, :] = -np.inf
        work[:, j] = -np.inf
    return _result_from_pairs(sorted(pairs), sim, gate)
