#!/usr/bin/env python3
"""Writes the synthetic 75-district dataset under data/.

Districts sit on a 15 x 5 grid (id = 5 * row + col + 1). Everything is drawn
from a fixed seed, so rerunning reproduces the committed files byte for byte.
"""

import argparse
import json
import math
import random
from pathlib import Path

ROWS, COLS = 15, 5
SEED = 20190401

STATE_TOTALS = {
    "rural_aay_households": 3_600_000,
    "urban_aay_households": 490_000,
    "rural_priority_persons": 95_000_000,
    "urban_priority_persons": 24_000_000,
}
STATE_PRODUCTION_TONNES = 32_600_000
FLOOD_WEEK = 22
FLOODED = 21

# districts with a blank fraction: (id, column)
MISSING = [
    (7, "rural_aay"), (12, "urban_priority"), (23, "rural_priority"), (23, "urban_aay"),
    (38, "rural_aay"), (41, "urban_aay"), (56, "rural_priority"), (69, "urban_priority"),
]
# pushed over their population cap once scaled to the state totals
OVER_CAP = [5, 33, 61]


def coords(i):
    return divmod(i - 1, COLS)


def write_csv(path, header, rows):
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join("" if v is None else str(v) for v in row) + "\n")


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    out = Path(ap.parse_args().out)
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    rng = random.Random(SEED)
    ids = list(range(1, ROWS * COLS + 1))

    districts = []
    for i in ids:
        total = rng.randint(1_600_000, 4_600_000)
        urban = int(total * rng.uniform(0.08, 0.38))
        family = round(rng.uniform(4.6, 6.4), 2)
        districts.append((i, f"District {i:02d}", total, total - urban, urban, family))
    write_csv(out / "districts.csv",
              ["id", "name", "total_pop", "rural_pop", "urban_pop", "avg_family_size"], districts)

    missing = set(MISSING)
    fractions = []
    for i in ids:
        row = {
            "rural_aay": round(rng.uniform(0.006, 0.012), 5),
            "urban_aay": round(rng.uniform(0.002, 0.006), 5),
            "rural_priority": round(rng.uniform(0.42, 0.58), 5),
            "urban_priority": round(rng.uniform(0.25, 0.40), 5),
        }
        if i in OVER_CAP:
            row["rural_priority"] = 0.97
            row["rural_aay"] = 0.02
        for col in row:
            if (i, col) in missing:
                row[col] = None
        fractions.append([i] + [row[c] for c in ("rural_aay", "urban_aay", "rural_priority",
                                                 "urban_priority")])
    write_csv(out / "fractions.csv",
              ["id", "rural_aay", "urban_aay", "rural_priority", "urban_priority"], fractions)

    edges = []
    for i in ids:
        r, c = coords(i)
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            rr, cc = r + dr, c + dc
            if 0 <= rr < ROWS and 0 <= cc < COLS:
                edges.append((i, rr * COLS + cc + 1))
    write_csv(out / "adjacency.csv", ["id", "neighbor_id"], edges)

    # straight-line distance on a 40 km lattice, driven at ~40 km/h plus road wiggle
    wiggle = {}
    for a in ids:
        for b in ids:
            if a < b:
                wiggle[(a, b)] = rng.randint(0, 25)
    rows = []
    for a in ids:
        ra, ca = coords(a)
        row = [a]
        for b in ids:
            rb, cb = coords(b)
            if a == b:
                row.append(0)
                continue
            km = 40 * math.hypot(ra - rb, ca - cb)
            row.append(int(round(km * 1.5)) + wiggle[(min(a, b), max(a, b))])
        rows.append(row)
    write_csv(out / "drivetimes.csv", ["id"] + [str(i) for i in ids], rows)

    with open(out / "state_totals.json", "w") as f:
        json.dump(STATE_TOTALS, f, indent=2)
        f.write("\n")

    weights = [rng.uniform(0.5, 1.5) for _ in ids]
    total_w = sum(weights)
    write_csv(out / "yields.csv", ["id", "produced_tonnes"],
              [(i, round(STATE_PRODUCTION_TONNES * w / total_w, 3)) for i, w in zip(ids, weights)])

    states = []
    for k in range(17):
        ratio = round(rng.uniform(0.01, 0.25), 4)
        pct = round(2.5 + 83.67 * ratio + rng.gauss(0, 1.5), 2)
        states.append((f"State {chr(ord('A') + k)}", ratio, pct))
    write_csv(out / "undernourishment_states.csv", ["state", "ratio", "pct"], states)

    # stock peaks after the April procurement and drains through the year
    truth = []
    for year, peak in ((2018, 8_700_000), (2019, 9_300_000)):
        for month in range(1, 13):
            months_since_peak = (month - 4) % 12
            level = peak * (1 - 0.075 * months_since_peak) + rng.uniform(-150_000, 150_000)
            truth.append((f"{year}-{month:02d}", round(level, 1)))
    write_csv(out / "storage_truth.csv", ["month", "tonnes"], truth)

    config = {
        "dataset": {
            "districts": "districts.csv",
            "fractions": "fractions.csv",
            "adjacency": "adjacency.csv",
            "drive_times": "drivetimes.csv",
            "state_totals": "state_totals.json",
            "undernourishment_states": "undernourishment_states.csv",
            "storage_truth": "storage_truth.csv",
            "yields": "yields.csv",
        },
        "engine": {
            "waste_fraction": 0.05,
            "reserve_weeks": 4,
            "harvest_window": [0, 1, 2, 3, 4],
            "transport_latency": 1,
            "eq2_convention": "as_stated_text",
            "allocation": "pair_sorted",
        },
        "entitlements": {"aay_kg_per_household_per_month": 35,
                         "priority_kg_per_person_per_month": 5},
        "undernourishment": {"slope": 83.67, "fit": "intercept", "spike_gain": 1.0},
        "scenario": "scenarios/baseline.json",
        "output_dir": "../out",
    }
    with open(out / "config.json", "w") as f:
        json.dump(config, f, indent=2)
        f.write("\n")

    prices = {"msp": 1840, "msp_last_year": 1735, "market_price": 1910,
              "market_price_last_year": 1820}
    base = {
        "name": "baseline",
        "horizon_weeks": 52,
        "calendar_anchor": "2019-04-01",
        "prices": prices,
        "state_production_tonnes": STATE_PRODUCTION_TONNES,
        "events": [],
    }
    flooded = sorted(rng.sample(ids, FLOODED))
    scenarios = {
        "baseline": base,
        "flood": dict(base, name="flood", events=[
            {"type": "flood", "week": FLOOD_WEEK, "district_ids": flooded,
             "destroyed_fraction": 0.75}]),
        "msp_up": dict(base, name="msp_up", events=[
            {"type": "msp_change", "effective_week": 0, "new_msp": round(1840 * 1.1, 2)}]),
    }
    for name, doc in scenarios.items():
        with open(out / "scenarios" / f"{name}.json", "w") as f:
            json.dump(doc, f, indent=2)
            f.write("\n")


if __name__ == "__main__":
    main()
