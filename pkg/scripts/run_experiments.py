"""Run the desk-scale experiment suite through the harness.

    python scripts/run_experiments.py [--only alg1,planners] [--out results]
"""
import argparse
import sys
from pathlib import Path

from coopirl.harness import main

CONFIGS = Path(__file__).parent / "configs"
RUNS = {
    "alg1": ("alg1", "alg1_random10.json", []),
    "alg2": ("alg2", "alg2_random5.json", []),
    "alg2-frozen": ("alg2", "alg2_random5.json", ["--non-interactive"]),
    "planners": ("planners-eval", "planners_maze4.json", []),
    "planners-full": ("planners-eval", "planners_maze7.json", []),
    "verify": ("verify-ideal", "verify_ideal5.json", []),
}


def run(names, out):
    status = 0
    for name in names:
        command, config, extra = RUNS[name]
        args = [command, "--config", str(CONFIGS / config), *extra]
        if out:
            args += ["--out", str(Path(out) / name)]
        print(f"== {name}", flush=True)
        status = max(status, main(args))
    return status


if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--only", help=f"comma separated subset of {','.join(RUNS)}")
    p.add_argument("--out", help="root output directory")
    a = p.parse_args()
    sys.exit(run(a.only.split(",") if a.only else list(RUNS), a.out))
