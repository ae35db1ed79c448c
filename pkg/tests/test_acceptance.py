"""Acceptance criteria, each checked at its stated tolerance.

Every criterion prints one ``PASS`` or ``FAIL`` line. Run under pytest
(``pytest tests/test_acceptance.py -s``) or directly as a script
(``python tests/test_acceptance.py``).
"""

import itertools
import math
import random
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from clear_oracle import gt, oracle_clear, random_micro_scenario, results, to_inputs  # noqa: E402
from shiptrack.association import solve_assignment  # noqa: E402
from shiptrack.cli import ablation_summary, run_ablation  # noqa: E402
from shiptrack.evaluation import evaluate  # noqa: E402
from shiptrack.geometry import METRICS, BBox, iou, tiou  # noqa: E402
from shiptrack.motion import (  # noqa: E402
    SHAKE_NOISE, KalmanError, initiate, predict, to_bbox, to_measurement, update,
)
from shiptrack.mot_io import (  # noqa: E402
    MotParseError, RecordKind, detections_from_records, gt_from_records, parse_file, results_from_records,
    write_results,
)
from shiptrack.synth import high_jitter_config  # noqa: E402
from shiptrack.tracker import Detection, Tracker, TrackerConfig, TrackerError  # noqa: E402

FUZZ_SECONDS = 60.0


# ---------------------------------------------------------------- criteria
# each returns (passed, detail)

def metric_axioms():
    rnd = random.Random(1)
    n_pairs = 10_000
    start = time.perf_counter()
    failures = []

    def rand_box():
        return BBox(rnd.uniform(-1e3, 1e3), rnd.uniform(-1e3, 1e3), rnd.uniform(1, 500), rnd.uniform(1, 500))

    for i in range(n_pairs):
        b1 = rand_box()
        kind = i % 4
        if kind == 1:  # near neighbour, so overlapping pairs are well represented
            b2 = BBox(b1.x + rnd.uniform(-b1.w, b1.w), b1.y + rnd.uniform(-b1.h, b1.h),
                      b1.w * rnd.uniform(0.5, 2), b1.h * rnd.uniform(0.5, 2))
        elif kind == 2:  # identical
            b2 = BBox(b1.x, b1.y, b1.w, b1.h)
        elif kind == 3:  # on a quarter-pixel grid, sharing some coordinates
            b1 = BBox(rnd.randint(-80, 80) / 4, rnd.randint(-80, 80) / 4, rnd.randint(1, 80) / 4, rnd.randint(1, 80) / 4)
            b2 = BBox(rnd.choice([b1.x, rnd.randint(-80, 80) / 4]), rnd.choice([b1.y, rnd.randint(-80, 80) / 4]),
                      rnd.choice([b1.w, rnd.randint(1, 80) / 4]), rnd.choice([b1.h, rnd.randint(1, 80) / 4]))
        else:
            b2 = rand_box()
        k = 10 ** rnd.uniform(-3, 3)
        values = {}
        for name, m in METRICS.items():
            v = m(b1, b2)
            values[name] = v
            if v != m(b2, b1) and not math.isclose(v, m(b2, b1), rel_tol=1e-12, abs_tol=1e-15):
                failures.append(f"{name} asymmetric on {b1}, {b2}")
            scaled = m(b1.scaled(k), b2.scaled(k))
            if not math.isclose(scaled, v, rel_tol=1e-9, abs_tol=1e-12):
                failures.append(f"{name} not scale invariant on {b1}, {b2}, k={k}")
            if m(b1, b1) != 1.0 and not math.isclose(m(b1, b1), 1.0, rel_tol=1e-12):
                failures.append(f"{name}(b, b) != 1 for {b1}")
        if not 0.0 <= values["iou"] <= 1.0:
            failures.append(f"iou out of range: {values['iou']}")
        if not 0.0 < values["tiou"] <= 1.0:
            failures.append(f"tiou out of range: {values['tiou']}")
        if values["tiou"] == 1.0 and b1 != b2:
            failures.append(f"tiou == 1 for distinct boxes {b1}, {b2}")
    elapsed = time.perf_counter() - start
    ok = not failures and elapsed < 5.0
    detail = f"{n_pairs} pairs, {len(failures)} violations, {elapsed:.2f}s (limit 5s)"
    if failures:
        detail += f"; first: {failures[0]}"
    return ok, detail


def shape_sensitivity():
    a, b, c = BBox(0, 0, 2, 2), BBox(1, 1, 2, 2), BBox(1, 1, 4, 1)
    got = (iou(a, b), tiou(a, b), iou(a, c), tiou(a, c))
    want = (0.1429, 0.4444, 0.1429, 0.4000)
    ok = all(abs(g - w) <= 5e-4 for g, w in zip(got, want))
    return ok, "IoU/TIoU square pair {:.4f}/{:.4f}, elongated pair {:.4f}/{:.4f} (tol 5e-4)".format(*got)


def regime_taxonomy():
    representatives = {
        "large": [(BBox(0, 0, 10, 10), BBox(1, 1, 10, 10)), (BBox(0, 0, 20, 8), BBox(2, 0, 20, 8)),
                  (BBox(0, 0, 10, 10), BBox(0, 1, 11, 9))],
        "small": [(BBox(0, 0, 2, 2), BBox(1, 1, 2, 2)), (BBox(0, 0, 10, 10), BBox(7, 7, 10, 10)),
                  (BBox(0, 0, 30, 6), BBox(25, 4, 30, 6))],
        "none": [(BBox(0, 0, 10, 10), BBox(12, 0, 10, 10)), (BBox(0, 0, 10, 10), BBox(40, 30, 10, 10)),
                 (BBox(0, 0, 30, 6), BBox(0, 7, 30, 6))],
    }
    bad = []
    for regime, pairs in representatives.items():
        for b1, b2 in pairs:
            i, t = iou(b1, b2), tiou(b1, b2)
            in_regime = {"large": i >= 0.5, "small": 0 < i < 0.5, "none": i == 0}[regime]
            holds = t > 0 == i if regime == "none" else t > i
            if not (in_regime and holds):
                bad.append(f"{regime}: iou {i:.4f} tiou {t:.4f}")
    return not bad, f"{sum(map(len, representatives.values()))} representatives, TIoU > IoU in each regime" + (
        f"; violations: {bad}" if bad else "")


def _brute_force_best(sim):
    n, m = sim.shape
    if n <= m:
        return max(math.fsum(sim[i, p[i]] for i in range(n)) for p in itertools.permutations(range(m), n))
    return max(math.fsum(sim[p[j], j] for j in range(m)) for p in itertools.permutations(range(n), m))


def assignment_optimality():
    rng = np.random.default_rng(4)
    start = time.perf_counter()
    mismatches = 0
    for k in range(1000):
        n, m = (7, 7) if k < 50 else tuple(rng.integers(1, 8, size=2))
        sim = rng.random((n, m)) if k % 3 else rng.integers(0, 4, size=(n, m)) / 4.0  # coarse values force ties
        res = solve_assignment(sim, gate=-math.inf)
        total = math.fsum(sim[i, j] for i, j in res.matches)
        if len(res.matches) != min(n, m) or total != _brute_force_best(sim):
            mismatches += 1
    elapsed = time.perf_counter() - start
    return mismatches == 0 and elapsed < 10.0, f"1000 matrices up to 7x7, {mismatches} mismatches, {elapsed:.2f}s (limit 10s)"


def kalman_numerics():
    rnd = random.Random(5)
    min_eig = math.inf
    n_ops = 0
    for _ in range(10_000):
        base = BBox(rnd.uniform(-500, 500), rnd.uniform(-500, 500), rnd.uniform(2, 300), rnd.uniform(2, 300))
        s = initiate(base)
        for _ in range(rnd.randint(1, 6)):
            if rnd.random() < 0.5:
                s = predict(s)
            else:
                try:
                    cur = to_bbox(s)
                except KalmanError:
                    cur = base
                det = BBox(cur.x + rnd.uniform(-20, 20), cur.y + rnd.uniform(-20, 20),
                           cur.w * rnd.uniform(0.7, 1.4), cur.h * rnd.uniform(0.7, 1.4))
                s = update(s, det)
            n_ops += 1
            min_eig = min(min_eig, float(np.linalg.eigvalsh(s.covariance).min()))

    worst_rt = 0.0
    for _ in range(10_000):
        b = BBox(rnd.uniform(-1e4, 1e4), rnd.uniform(-1e4, 1e4), rnd.uniform(0.5, 2e3), rnd.uniform(0.5, 2e3))
        out = to_bbox(initiate(b))
        worst_rt = max(worst_rt, *(abs(p - q) for p, q in zip(out.as_tuple(), b.as_tuple())))

    worst_conv = 0.0
    det = BBox(100, 100, 40, 20)
    for _ in range(100):
        s = initiate(det.translated(rnd.uniform(-10, 10), rnd.uniform(-10, 10)))
        for _ in range(50):
            s = update(predict(s), det)
        worst_conv = max(worst_conv, float(np.max(np.abs(s.mean[:4] - to_measurement(det)))))
    ok = min_eig >= -1e-6 and worst_rt <= 1e-9 and worst_conv <= 1e-3
    return ok, (f"10000 interleavings ({n_ops} ops) min eigenvalue {min_eig:.3g} (floor -1e-6); "
                f"roundtrip error {worst_rt:.2g} (limit 1e-9); convergence error {worst_conv:.2g} (limit 1e-3)")


def clear_oracle_equivalence():
    rnd = random.Random(2024)
    mismatches = 0
    for _ in range(500):
        gt_frames, hyp_frames, n = random_micro_scenario(rnd)
        g, r = to_inputs(gt_frames, hyp_frames)
        rep = evaluate(g, r, num_frames=n)
        tp, fp, fn, ids = oracle_clear(gt_frames, hyp_frames, n)
        mota = 1 - (fp + fn + ids) / (tp + fn) if tp + fn else math.nan
        same_mota = (math.isnan(mota) and math.isnan(rep.MOTA)) or rep.MOTA == mota
        if (rep.FP, rep.FN, rep.IDS) != (fp, fn, ids) or not same_mota:
            mismatches += 1

    box, other = BBox(0, 0, 10, 10), BBox(50, 0, 10, 10)
    switch = evaluate([gt(f, 1) for f in (1, 2, 3, 4)], results({1: [(1, box)], 2: [(1, box)], 3: [(2, box)], 4: [(2, box)]}))
    miss = evaluate([gt(f, 1, box) for f in (1, 2)] + [gt(f, 2, other) for f in (1, 2)],
                    results({1: [(1, box), (2, other)], 2: [(1, box)]}))
    toys_ok = (switch.MOTA, switch.IDS, miss.MOTA, miss.FN) == (0.75, 1, 0.75, 1)
    return mismatches == 0 and toys_ok, (f"500 micro-scenarios, {mismatches} mismatches; toys MOTA "
                                         f"{switch.MOTA} (id switch) and {miss.MOTA} (one miss)")


def ablation_direction():
    start = time.perf_counter()
    rows = run_ablation(high_jitter_config(), TrackerConfig(noise=SHAKE_NOISE), ["sort", "byte"], ["iou", "tiou"], range(5))
    elapsed = time.perf_counter() - start
    zero = min(r["zero_iou_fraction"] for r in rows)
    summary = ablation_summary(rows)
    ok = zero > 0.5 and elapsed < 60.0
    parts = []
    for p, entry in summary["pipelines"].items():
        med_i, med_t = entry["medians"]["iou"], entry["medians"]["tiou"]
        direction = med_t["IDS"] < med_i["IDS"] and med_t["MOTA"] > med_i["MOTA"]
        ok = ok and direction
        parts.append(f"{p} MOTA {med_i['MOTA']:.3f}->{med_t['MOTA']:.3f} IDS {med_i['IDS']:g}->{med_t['IDS']:g}")
    return ok, "; ".join(parts) + f"; min zero-IoU fraction {zero:.2f}; {elapsed:.1f}s (limit 60s)"


def disjoint_hop():
    ids = {}
    for metric in ("iou", "tiou"):
        tracker = Tracker(TrackerConfig(metric=metric))
        for f, x in enumerate((0, 12, 24), start=1):
            tracker.step(f, [Detection(BBox(x, 0, 10, 10), 0.9, 0)])
        ids[metric] = len(tracker.flush())
    return ids["iou"] >= 2 and ids["tiou"] == 1, f"IoU {ids['iou']} ids, TIoU {ids['tiou']} id"


def _mutate(rnd, line: bytes) -> bytes:
    data = bytearray(line)
    for _ in range(rnd.randint(1, 4)):
        op = rnd.random()
        pos = rnd.randint(0, len(data))
        if op < 0.3 and data:
            data[min(pos, len(data) - 1)] = rnd.randrange(256)
        elif op < 0.55:
            data[pos:pos] = rnd.choice([b",", b"-", b".", b"e", b"nan", b"inf", b"1e400", b"\r", b"\n", b" ", b"\x00",
                                        b"\xff", b"0", b"-1", b"9" * 30])
        elif op < 0.8 and data:
            del data[pos:pos + rnd.randint(1, 5)]
        else:
            data += b"," + str(rnd.uniform(-1e6, 1e6)).encode()
    return bytes(data)


def io_fidelity(fuzz_seconds: float = FUZZ_SECONDS):
    rnd = random.Random(9)
    records = []
    for i in range(1000):
        box = BBox(round(rnd.uniform(-100, 3000), 2), round(rnd.uniform(-100, 2000), 2),
                   round(rnd.uniform(0.01, 500), 2), round(rnd.uniform(0.01, 500), 2))
        records.append((i // 7 + 1, rnd.randint(1, 10_000), box, round(rnd.random(), 4)))
    records.sort(key=lambda r: (r[0], r[1]))
    import io as _io
    buf = _io.BytesIO()
    write_results(records, buf)
    parsed = parse_file(buf.getvalue(), "results")
    roundtrip_ok = [(r.frame, r.id, r.bbox, r.conf) for r in parsed] == records
    again = _io.BytesIO()
    write_results([(r.frame, r.id, r.bbox, r.conf) for r in parsed], again)
    roundtrip_ok = roundtrip_ok and again.getvalue() == buf.getvalue()

    seeds = [b"1,2,10.5,20.25,30,40,0.9,-1,-1,-1", b"1,-1,0,0,5,5,0.3,2,0.5", b"3,7,1,1,2,2,0,1,1"]
    crashes, n_inputs = [], 0
    deadline = time.perf_counter() + fuzz_seconds
    while time.perf_counter() < deadline:
        if rnd.random() < 0.2:
            data = bytes(rnd.randrange(256) for _ in range(rnd.randint(0, 80)))
        else:
            data = b"\n".join(_mutate(rnd, rnd.choice(seeds)) for _ in range(rnd.randint(1, 5)))
        for kind in RecordKind:
            n_inputs += 1
            try:
                recs = parse_file(data, kind)
                gt_from_records(recs)
                results_from_records(recs)
                detections_from_records(recs)
            except MotParseError:
                pass
            except Exception as exc:  # any other exception is a crash
                crashes.append((data, kind, repr(exc)))
    ok = roundtrip_ok and not crashes
    detail = (f"1000-record roundtrip {'exact' if roundtrip_ok else 'MISMATCH'}; "
              f"fuzz {n_inputs} inputs over {fuzz_seconds:.0f}s, {len(crashes)} crashes")
    if crashes:
        detail += f"; first: {crashes[0]}"
    return ok, detail


CRITERIA = [
    ("metric axioms", metric_axioms),
    ("shape sensitivity example", shape_sensitivity),
    ("overlap regime taxonomy", regime_taxonomy),
    ("assignment optimality", assignment_optimality),
    ("Kalman numerics", kalman_numerics),
    ("CLEAR oracle equivalence", clear_oracle_equivalence),
    ("ablation direction", ablation_direction),
    ("disjoint hop", disjoint_hop),
    ("I/O fidelity", io_fidelity),
]


def _report(name, ok, detail):
    return f"{'PASS' if ok else 'FAIL'} {name}: {detail}"


@pytest.mark.parametrize("name,check", CRITERIA, ids=[n for n, _ in CRITERIA])
def test_acceptance(name, check, capsys):
    try:
        ok, detail = check()
    except (KalmanError, TrackerError, ValueError) as exc:
        ok, detail = False, f"raised {exc!r}"
    with capsys.disabled():
        print("\n" + _report(name, ok, detail))
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for name, check in CRITERIA:
        ok, detail = check()
        failed += not ok
        print(_report(name, ok, detail), flush=True)
    print(f"{len(CRITERIA) - failed}/{len(CRITERIA)} criteria passed")
    sys.exit(1 if failed else 0)
