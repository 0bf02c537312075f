#!/usr/bin/env python3
"""Extract per-cycle discharge capacity from a NASA PCoE battery .mat file.

The archive stores one struct per cell (e.g. B0005) whose ``cycle`` array mixes
charge, discharge and impedance records. Only discharge records carry a
``Capacity`` value; they are numbered 1..N in file order.

    python3 tools/extract_nasa.py B0005.mat -o data/nasa/B0005.csv
"""

import argparse
import csv
import math
import sys
from pathlib import Path

import numpy as np
import scipy.io


def _records(mat_path, battery):
    mat = scipy.io.loadmat(mat_path, squeeze_me=True, struct_as_record=False)
    if battery is None:
        names = [k for k in mat if not k.startswith("__")]
        if len(names) != 1:
            raise ValueError(f"{mat_path}: expected one battery struct, found {names}; pass --battery")
        battery = names[0]
    if battery not in mat:
        raise ValueError(f"{mat_path}: no struct named {battery}")
    return battery, np.atleast_1d(mat[battery].cycle)


def discharge_capacities(mat_path, battery=None):
    """Returns (battery_id, [capacity_ah, ...]) in discharge order."""
    battery, cycles = _records(mat_path, battery)
    out = []
    for rec in cycles:
        if str(rec.type).strip().lower() != "discharge":
            continue
        cap = float(np.asarray(rec.data.Capacity).ravel()[0])
        if not math.isfinite(cap) or cap <= 0:
            raise ValueError(f"{mat_path}: discharge record {len(out) + 1} has capacity {cap}")
        out.append(cap)
    if len(out) < 2:
        raise ValueError(f"{mat_path}: fewer than two discharge records")
    return battery, out


def write_csv(path, capacities):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["cycle", "capacity_ah"])
        for i, c in enumerate(capacities, start=1):
            w.writerow([i, repr(c)])


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("mat", help="NASA .mat file, e.g. B0005.mat")
    p.add_argument("-o", "--out", required=True, help="output CSV")
    p.add_argument("--battery", help="struct name inside the file (default: the only one)")
    args = p.parse_args(argv)
    try:
        battery, caps = discharge_capacities(args.mat, args.battery)
    except (OSError, ValueError, AttributeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    write_csv(args.out, caps)
    print(f"{battery}: {len(caps)} discharge cycles, first {caps[0]:.4f} Ah, last {caps[-1]:.4f} Ah -> {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
