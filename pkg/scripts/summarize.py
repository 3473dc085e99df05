"""Print a summary CSV written by ``risfa run`` as an aligned table, one row per curve.

    python3 scripts/summarize.py out/architectures_summary.csv
"""

import csv
import sys
from collections import defaultdict


def main(path: str) -> None:
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        print(f"{path}: empty")
        return
    sweep = rows[0]["sweep_name"]
    points = sorted({float(r["sweep_value"]) for r in rows}, reverse=sweep == "kappa_db")
    curves = defaultdict(dict)
    for r in rows:
        name = f'{r["scheme"]}/{r["arch"]}/{r["ris_count"]}RIS/{r["phase_mode"]}'
        curves[name][float(r["sweep_value"])] = (float(r["mean_rate"]), int(r["n_failed"]))
    width = max(len(c) for c in curves)
    print(f"{path}  (mean sum rate, bit/s/Hz; * marks failed trials)")
    print(" " * width + "".join(f"{sweep}={p:g}".rjust(18) for p in points))
    for name, vals in curves.items():
        cells = []
        for p in points:
            m, bad = vals.get(p, (float("nan"), 0))
            cells.append((f"{m:.3f}" + ("*" if bad else "")).rjust(18))
        print(name.ljust(width) + "".join(cells))


if __name__ == "__main__":
    if len(sys.argv) != 2:
        sys.exit(__doc__)
    main(sys.argv[1])
