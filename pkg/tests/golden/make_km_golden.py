"""Regenerate the Kaplan-Meier golden files.

The expected values come from an exact rational-arithmetic transliteration
of survRM2's ``rmst1`` (R is not available here).  It walks every distinct
follow-up time the way ``survfit`` reports them, censorings included, so it
shares no code path with ``rmstsim.kaplan_meier``.

    python tests/golden/make_km_golden.py
"""

import json
from fractions import Fraction
from pathlib import Path

import numpy as np

HERE = Path(__file__).parent


def survfit(time, status):
    """Rows (time, n.risk, n.event, surv) at every distinct time."""
    rows, surv = [], Fraction(1)
    for t in sorted(set(time)):
        n = sum(1 for u in time if u >= t)
        d = sum(1 for u, s in zip(time, status) if u == t and s)
        surv *= Fraction(n - d, n)
        rows.append((t, n, d, surv))
    return rows


def rmst1(time, status, tau):
    rows = [r for r in survfit(time, status) if r[0] <= tau]
    wk_time = sorted([r[0] for r in rows] + [tau])
    diffs = [b - a for a, b in zip([Fraction(0)] + wk_time[:-1], wk_time)]
    heights = [Fraction(1)] + [r[3] for r in rows]
    areas = [dt * h for dt, h in zip(diffs, heights)]
    wk_var = [Fraction(0) if n == d else Fraction(d, n * (n - d)) for _, n, d, _ in rows]
    tail = areas[1:]
    var = Fraction(0)
    acc = Fraction(0)
    for a, w in zip(reversed(tail), reversed(wk_var)):
        acc += a
        var += acc * acc * w
    return sum(areas), var


def make(name, n, seed, taus):
    rng = np.random.default_rng(seed)
    # Integer times force ties between events and censorings.
    time = np.ceil(rng.exponential(30.0, n)).astype(int)
    status = (rng.random(n) < 0.7).astype(int)
    lines = ["time,event"] + [f"{t},{s}" for t, s in zip(time, status)]
    (HERE / f"{name}.csv").write_text("\n".join(lines) + "\n")
    tf = [Fraction(int(t)) for t in time]
    expected = []
    for tau in taus:
        mu, var = rmst1(tf, list(status), Fraction(tau))
        expected.append({"tau": tau, "rmst": float(mu), "rmst_var": float(var)})
    (HERE / f"{name}.json").write_text(json.dumps(expected, indent=2) + "\n")


if __name__ == "__main__":
    make("km20", 20, 20, [10, 25, 40])
    make("km50", 50, 50, [15, 30, 45.5])
