"""CLEAR-MOT and identity metrics for tracker output against ground truth.

Per frame, ground truth objects are matched to hypotheses with IoU at or above
a threshold (0.5 by default). A pairing that held in the previous frame is kept
as long as it still clears the threshold; the remaining objects and hypotheses
are matched to maximize first the number of pairs and then their total IoU.

Ground-truth entries flagged ``considered=False`` (MOT17 distractors) do not
count toward the totals. Any hypothesis they overlap is dropped before the
frame is scored, so it is neither a true nor a false positive.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import BBox, boxes_to_array, pairwise
from .tracker import FrameResult

MOSTLY_TRACKED = 0.8
MOSTLY_LOST = 0.2


class FrameMisalignmentError(ValueError):
    """Result frames do not line up with the ground-truth frame range."""


@dataclass(frozen=True)
class GtEntry:
    frame: int
    object_id: int
    bbox: BBox
    visibility: float = 1.0
    class_id: int = 1
    considered: bool = True


@dataclass
class FrameCorrespondence:
    matches: List[Tuple[int, int, float]] = field(default_factory=list)  # (gt id, track id, iou)
    missed: List[int] = field(default_factory=list)  # gt ids
    false_positives: List[int] = field(default_factory=list)  # track ids
    ignored: List[int] = field(default_factory=list)  # track ids absorbed by distractors


@dataclass
class MetricsReport:
    MOTA: float
    MOTP: float
    IDF1: float
    Recall: float
    FP: int
    FN: int
    IDS: int
    FM: int
    MT: int
    ML: int
    GT_count: int
    TP: int = 0
    IDTP: int = 0
    IDFP: int = 0
    IDFN: int = 0

    def to_dict(self) -> dict:
        return {k: (None if isinstance(v, float) and math.isnan(v) else v) for k, v in asdict(self).items()}


def _max_matching(score: np.ndarray, valid: np.ndarray) -> List[Tuple[int, int]]:
    """Pairs maximizing the number of valid matches, then their total score."""
    if score.size == 0 or not valid.any():
        return []
    bonus = float(min(score.shape) + 1)
    cost = np.where(valid, -(bonus + score), 0.0)
    rows, cols = linear_sum_assignment(cost)
    return [(int(r), int(c)) for r, c in zip(rows, cols) if valid[r, c]]


def match_frame(
    gt_boxes: Sequence[GtEntry],
    hyp_boxes: Sequence[Tuple[int, BBox]],
    iou_threshold: float = 0.5,
    previous: Optional[Mapping[int, int]] = None,
) -> FrameCorrespondence:
    """Match one frame's ground truth to hypotheses.

    Args:
        gt_boxes: ground-truth entries of a single frame.
        hyp_boxes: ``(track_id, bbox)`` pairs of the same frame.
        iou_threshold: minimum IoU for a pair to count as a match.
        previous: ``gt id -> track id`` pairs matched in the prior frame.

    Returns:
        The frame's correspondence, FN and FP lists.
    """
    previous = previous or {}
    hyp_ids = [h for h, _ in hyp_boxes]
    if len(set(hyp_ids)) != len(hyp_ids):
        raise ValueError("duplicate track id within a frame")

    out = FrameCorrespondence()
    hyps = list(hyp_boxes)

    distractors = [g for g in gt_boxes if not g.considered]
    if distractors and hyps:
        all_gt = list(gt_boxes)
        ious = pairwise("iou", boxes_to_array([g.bbox for g in all_gt]), boxes_to_array([b for _, b in hyps]))
        pairs = _max_matching(ious, ious >= iou_threshold)
        absorbed = {j for i, j in pairs if not all_gt[i].considered}
        out.ignored = sorted(hyps[j][0] for j in absorbed)
        hyps = [h for j, h in enumerate(hyps) if j not in absorbed]

    gts = [g for g in gt_boxes if g.considered]
    ious = pairwise("iou", boxes_to_array([g.bbox for g in gts]), boxes_to_array([b for _, b in hyps]))
    valid = ious >= iou_threshold

    gt_pos = {g.object_id: i for i, g in enumerate(gts)}
    hyp_pos = {h: j for j, (h, _) in enumerate(hyps)}
    taken_rows, taken_cols = set(), set()
    for gid, hid in previous.items():
        i, j = gt_pos.get(gid), hyp_pos.get(hid)
        if i is not None and j is not None and valid[i, j]:
            out.matches.append((gid, hid, float(ious[i, j])))
            taken_rows.add(i)
            taken_cols.add(j)

    rows = [i for i in range(len(gts)) if i not in taken_rows]
    cols = [j for j in range(len(hyps)) if j not in taken_cols]
    sub = ious[np.ix_(rows, cols)]
    for r, c in _max_matching(sub, valid[np.ix_(rows, cols)]):
        i, j = rows[r], cols[c]
        out.matches.append((gts[i].object_id, hyps[j][0], float(ious[i, j])))
        taken_rows.add(i)
        taken_cols.add(j)

    out.matches.sort()
    out.missed = sorted(gts[i].object_id for i in range(len(gts)) if i not in taken_rows)
    out.false_positives = sorted(hyps[j][0] for j in range(len(hyps)) if j not in taken_cols)
    return out


def _check_alignment(gt_frames: Iterable[int], results: Sequence[FrameResult],
                     num_frames: Optional[int] = None) -> None:
    seen = set()
    last_gt = num_frames if num_frames is not None else max(gt_frames, default=None)
    for r in results:
        if r.frame_index < 1:
            raise FrameMisalignmentError(f"result frame index {r.frame_index} is not positive")
        if r.frame_index in seen:
            raise FrameMisalignmentError(f"result frame {r.frame_index} appears more than once")
        if last_gt is not None and r.frame_index > last_gt:
            raise FrameMisalignmentError(
                f"result frame {r.frame_index} lies beyond the last ground-truth frame {last_gt}")
        seen.add(r.frame_index)


def _id_scores(pairs_per_frame, gt_total: int, hyp_total: int) -> Tuple[int, int, int]:
    """Global gt-id to track-id matching maximizing identity true positives."""
    counts: Dict[Tuple[int, int], int] = defaultdict(int)
    for frame_pairs in pairs_per_frame:
        for gid, hid in frame_pairs:
            counts[gid, hid] += 1
    if not counts:
        return 0, hyp_total, gt_total
    gids = sorted({g for g, _ in counts})
    hids = sorted({h for _, h in counts})
    gi = {g: i for i, g in enumerate(gids)}
    hi = {h: j for j, h in enumerate(hids)}
    mat = np.zeros((len(gids), len(hids)))
    for (g, h), c in counts.items():
        mat[gi[g], hi[h]] = c
    rows, cols = linear_sum_assignment(mat, maximize=True)
    idtp = int(mat[rows, cols].sum())
    return idtp, hyp_total - idtp, gt_total - idtp


def evaluate(gt: Sequence[GtEntry], results: Sequence[FrameResult], iou_threshold: float = 0.5,
             num_frames: Optional[int] = None) -> MetricsReport:
    """Score a tracker's frame results against ground truth.

    Result frames must be positive, unique, and no later than ``num_frames``
    (the last ground-truth frame when not given); otherwise
    :class:`FrameMisalignmentError` is raised.
    """
    gt_by_frame: Dict[int, List[GtEntry]] = defaultdict(list)
    keys = set()
    for g in gt:
        if (g.frame, g.object_id) in keys:
            raise ValueError(f"duplicate ground truth entry for frame {g.frame}, object {g.object_id}")
        keys.add((g.frame, g.object_id))
        gt_by_frame[g.frame].append(g)
    _check_alignment(gt_by_frame, results, num_frames)
    hyp_by_frame = {r.frame_index: [(o.track_id, o.bbox) for o in r.outputs] for r in results}

    frames = sorted(set(gt_by_frame) | set(hyp_by_frame))
    tp = fp = fn = ids = 0
    iou_sum = 0.0
    last_match: Dict[int, int] = {}
    previous: Dict[int, int] = {}
    prev_frame: Optional[int] = None
    # per gt object: frames present, frames matched, fragment count, matched last time present
    present: Dict[int, int] = defaultdict(int)
    covered: Dict[int, int] = defaultdict(int)
    frags: Dict[int, int] = defaultdict(int)
    was_matched: Dict[int, bool] = {}
    id_pairs = []
    gt_total = hyp_total = 0

    for f in frames:
        gts = gt_by_frame.get(f, [])
        hyps = hyp_by_frame.get(f, [])
        carry = previous if prev_frame is not None and f == prev_frame + 1 else {}
        corr = match_frame(gts, hyps, iou_threshold, carry)

        for gid, hid, ov in corr.matches:
            tp += 1
            iou_sum += ov
            if gid in last_match and last_match[gid] != hid:
                ids += 1
            last_match[gid] = hid
        fp += len(corr.false_positives)
        fn += len(corr.missed)

        matched_now = {gid for gid, _, _ in corr.matches}
        for g in gts:
            if not g.considered:
                continue
            gid = g.object_id
            present[gid] += 1
            hit = gid in matched_now
            if hit:
                covered[gid] += 1
                if was_matched.get(gid) is False and covered[gid] > 1:
                    frags[gid] += 1
            was_matched[gid] = hit

        # identity scoring uses every pair above threshold, not the CLEAR matching
        ignored = set(corr.ignored)
        kept_hyps = [(h, b) for h, b in hyps if h not in ignored]
        considered = [g for g in gts if g.considered]
        gt_total += len(considered)
        hyp_total += len(kept_hyps)
        if considered and kept_hyps:
            ious = pairwise("iou", boxes_to_array([g.bbox for g in considered]),
                            boxes_to_array([b for _, b in kept_hyps]))
            rr, cc = np.nonzero(ious >= iou_threshold)
            id_pairs.append([(considered[r].object_id, kept_hyps[c][0]) for r, c in zip(rr, cc)])

        previous = {gid: hid for gid, hid, _ in corr.matches}
        prev_frame = f

    idtp, idfp, idfn = _id_scores(id_pairs, gt_total, hyp_total)
    mota = 1.0 - (fp + fn + ids) / gt_total if gt_total else math.nan
    motp = iou_sum / tp if tp else math.nan
    recall = tp / gt_total if gt_total else math.nan
    denom = 2 * idtp + idfp + idfn
    idf1 = 2 * idtp / denom if denom else math.nan
    mt = sum(1 for gid, n in present.items() if covered[gid] / n >= MOSTLY_TRACKED)
    ml = sum(1 for gid, n in present.items() if covered[gid] / n <= MOSTLY_LOST)
    return MetricsReport(
        MOTA=mota, MOTP=motp, IDF1=idf1, Recall=recall,
        FP=fp, FN=fn, IDS=ids, FM=sum(frags.values()), MT=mt, ML=ml,
        GT_count=gt_total, TP=tp, IDTP=idtp, IDFP=idfp, IDFN=idfn,
    )
