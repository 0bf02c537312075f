#!/usr/bin/env python3
"""Convert CALCE CS2 cycling workbooks into a per-cycle capacity CSV.

A CALCE cell (e.g. CS2_35) ships as a folder of Arbin exports, one per test
session, each restarting Cycle_Index at 1. This script

  * reads every .xlsx/.xls/.csv export in the folder (data sheets are those
    whose name starts with "Channel"),
  * orders sessions by their first Date_Time (file name as a fallback),
  * takes each cycle's capacity as the maximum cumulative
    Discharge_Capacity(Ah) within that cycle,
  * drops cycles below --min-capacity (aborted or rest-only cycles) and
    renumbers the rest 1..N.

No smoothing is applied.

    python3 tools/convert_calce.py CS2_35/ -o data/calce/CS2_35.csv
"""

import argparse
import sys
from pathlib import Path

import pandas as pd

CYCLE = "Cycle_Index"
DISCHARGE = "Discharge_Capacity(Ah)"
STAMP = "Date_Time"


def _frames(path):
    if path.suffix.lower() == ".csv":
        yield pd.read_csv(path)
        return
    sheets = pd.read_excel(path, sheet_name=None)
    data = [df for name, df in sheets.items() if name.lower().startswith("channel")]
    if not data:
        raise ValueError(f"{path}: no Channel_* sheet (found {list(sheets)})")
    yield from data


def session_capacities(path):
    """Returns (sort_key, [capacity per cycle in order]) for one export."""
    caps, first_stamp = [], None
    for df in _frames(path):
        missing = [c for c in (CYCLE, DISCHARGE) if c not in df.columns]
        if missing:
            raise ValueError(f"{path}: missing columns {missing} (found {list(df.columns)})")
        if STAMP in df.columns and first_stamp is None and len(df):
            first_stamp = pd.to_datetime(df[STAMP].iloc[0], errors="coerce")
        per_cycle = df.groupby(CYCLE, sort=True)[DISCHARGE].max()
        caps.extend(float(v) for v in per_cycle.to_numpy())
    key = (0, first_stamp, path.name) if first_stamp is not None and not pd.isna(first_stamp) else (1, None, path.name)
    return key, caps


def convert(folder, min_capacity=0.1):
    folder = Path(folder)
    files = sorted(p for p in folder.iterdir() if p.suffix.lower() in (".xlsx", ".xls", ".csv"))
    if not files:
        raise ValueError(f"{folder}: no .xlsx, .xls or .csv exports")
    sessions = [session_capacities(p) for p in files]
    sessions.sort(key=lambda s: (s[0][0], s[0][1] or pd.Timestamp.min, s[0][2]))
    caps = [c for _, cs in sessions for c in cs if c >= min_capacity]
    if len(caps) < 2:
        raise ValueError(f"{folder}: fewer than two cycles above {min_capacity} Ah")
    return caps


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("folder", help="folder of CALCE exports for one cell")
    p.add_argument("-o", "--out", required=True, help="output CSV")
    p.add_argument("--min-capacity", type=float, default=0.1, help="drop cycles below this (Ah, default 0.1)")
    args = p.parse_args(argv)
    try:
        caps = convert(args.folder, args.min_capacity)
    except (OSError, ValueError, ImportError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 3
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"cycle": range(1, len(caps) + 1), "capacity_ah": caps}).to_csv(out, index=False)
    print(f"{len(caps)} cycles, first {caps[0]:.4f} Ah, last {caps[-1]:.4f} Ah -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
