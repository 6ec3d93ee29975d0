"""Print an episode table from a harness aggregate CSV.

    python scripts/regret_summary.py results/alg1/alg1_aggregate.csv [--column regret]
"""
import argparse
import csv

p = argparse.ArgumentParser()
p.add_argument("aggregate")
p.add_argument("--column", default="regret")
p.add_argument("--every", type=int, default=5)
a = p.parse_args()

with open(a.aggregate) as fh:
    rows = list(csv.DictReader(fh))
print(f"{'episode':>8} {a.column + '_mean':>16} {a.column + '_se':>14}")
for row in rows:
    if int(row["episode"]) % a.every == 0 or row is rows[0]:
        print(f"{row['episode']:>8} {float(row[a.column + '_mean']):16.6f} {float(row[a.column + '_se']):14.6f}")
