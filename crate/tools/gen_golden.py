#!/usr/bin/env python3
"""Generates the golden statistics fixtures used by the acceptance tests.

Writes crates/cli/tests/golden/stats_golden.json with 100 one-tailed
one-sample t-test cases and 100 Spearman rank-correlation cases, each with
the scipy result at full float precision. Rerunning the script reproduces
the file bit for bit (fixed RNG seed, sorted keys).
"""

import json
import pathlib

import numpy as np
from scipy import stats

rng = np.random.default_rng(20260823)

OUT = pathlib.Path(__file__).resolve().parent.parent / "crates/cli/tests/golden/stats_golden.json"


def t_cases(count: int) -> list:
    cases = []
    while len(cases) < count:
        n = int(rng.integers(2, 40))
        loc = float(rng.uniform(-5.0, 5.0))
        scale = float(rng.uniform(0.05, 3.0))
        values = rng.normal(loc, scale, size=n)
        threshold = float(loc + rng.uniform(-2.0, 2.0))
        if np.std(values, ddof=1) == 0.0:
            continue
        res = stats.ttest_1samp(values, popmean=threshold, alternative="greater")
        cases.append(
            {
                "values": [float(v) for v in values],
                "threshold": threshold,
                "t": float(res.statistic),
                "p": float(res.pvalue),
                "df": n - 1,
            }
        )
    return cases


def spearman_cases(count: int) -> list:
    cases = []
    while len(cases) < count:
        n = int(rng.integers(5, 40))
        x = rng.normal(0.0, 1.0, size=n)
        y = 0.6 * x + rng.normal(0.0, 1.0, size=n)
        # A few tied values exercise average-rank handling.
        if rng.random() < 0.3:
            ties = rng.integers(0, n, size=2)
            x[ties[0]] = x[ties[1]]
        res = stats.spearmanr(x, y)
        rho = float(res.statistic)
        if not np.isfinite(rho) or abs(rho) == 1.0:
            continue
        cases.append(
            {
                "x": [float(v) for v in x],
                "y": [float(v) for v in y],
                "rho": rho,
                "p": float(res.pvalue),
            }
        )
    return cases


def main() -> None:
    doc = {"t_tests": t_cases(100), "spearman": spearman_cases(100)}
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")
    print(f"wrote {OUT} ({len(doc['t_tests'])} t-test, {len(doc['spearman'])} spearman cases)")


if __name__ == "__main__":
    main()
