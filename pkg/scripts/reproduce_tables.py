#!/usr/bin/env python3
"""Recompute the convergence tables and print them beside reference values.

Usage: python3 scripts/reproduce_tables.py [--out DIR] [--max-N 64]
Writes one CSV per table into DIR (default: ./tables).
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from masolve.harness import convergence_sweep

# (label, case, phi, scheme, reference errors for N = 4, 8, 16, 32, 64)
TABLES = [
    ("sqrt1pp-test1", "test1", "sqrt1pp", "standard", [3.9093e-3, 1.0340e-3, 2.6643e-4, 6.6964e-5, 1.6781e-5]),
    ("sqrt1pp-test2", "test2", "sqrt1pp", "standard", [2.5104e-2, 2.6475e-2, 2.2113e-2, 1.6920e-2, 1.2440e-2]),
    ("sqrt1pp-test3", "test3", "sqrt1pp", "standard", [2.9143e-16, 1.1102e-16, 5.5511e-17, 3.0531e-16, 1.6098e-15]),
    ("sqrt1pp-test4", "test4", "sqrt1pp", "standard", [1.7233e-5, 3.8580e-15, 1.0963e-14, 1.5155e-14, 2.3870e-15]),
    ("l1-test1", "test1", "l1", "standard", [2.2524e-2, 4.1574e-3, 1.1233e-3, 3.1368e-4, 1.3201e-4]),
    ("l1-test2", "test2", "l1", "standard", [2.7012e-2, 2.6801e-2, 2.2223e-2, 1.6967e-2, 1.2500e-2]),
    ("l1-test3", "test3", "l1", "standard", [6.3363e-11, 1.6653e-16, 5.5511e-17, 4.7184e-16, 2.1649e-15]),
    ("l1-test4", "test4", "l1", "standard", [7.3175e-5, 1.0270e-15, 3.1919e-15, 6.5781e-15, 1.0464e-14]),
    ("dirac2-standard", "dirac2", "euclid", "standard", [1.40e-2, 1.44e-2, 1.31e-2, 1.25e-2, 1.17e-2]),
    ("dirac2-monotone", "dirac2", "squared", "monotone", [4.31e-3, 1.08e-3, 2.70e-4, 6.74e-5, 1.68e-5]),
]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("tables"))
    ap.add_argument("--max-N", type=int, default=64)
    args = ap.parse_args()
    args.out.mkdir(parents=True, exist_ok=True)
    Ns = [N for N in (4, 8, 16, 32, 64) if N <= args.max_N]
    for label, case, phi, scheme, reference in TABLES:
        t0 = time.perf_counter()
        report = convergence_sweep(case, Ns, phi, scheme)
        (args.out / f"{label}.csv").write_text(report.to_csv())
        print(f"\n{label}  ({time.perf_counter() - t0:.1f}s)")
        print(f"{'h':>9} {'error':>11} {'reference':>11} {'order':>6}  status")
        for row, ref in zip(report.rows, reference):
            order = "" if row.order is None else f"{row.order:6.2f}"
            print(f"{row.h:9.6f} {row.error:11.4e} {ref:11.4e} {order:>6}  {row.status}")


if __name__ == "__main__":
    main()
