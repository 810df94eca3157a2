"""Desk-scale test-error curves: every loss, Cases 1/3/4, synthetic mixture and MNIST subset.

Writes one CSV per run plus summary.json into --out and prints the three
qualitative checks (robust losses stay flat, CCE overfits, bounded >= unbounded).
"""
import argparse
import json
import os

os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

from pathlib import Path  # noqa: E402

from pl_lab.experiments import DESK_CASES, DESK_DATASETS, desk_grid, curve_checks, run_grid, summary_table  # noqa: E402


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="runs/desk_curves")
    ap.add_argument("--epochs", type=int, default=100)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--datasets", nargs="+", default=list(DESK_DATASETS))
    ap.add_argument("--cases", nargs="+", type=int, default=list(DESK_CASES))
    args = ap.parse_args(argv)

    results = run_grid(desk_grid(args.datasets, args.cases, epochs=args.epochs, seed=args.seed))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for r in results:
        (out / f"{r['run_id']}.csv").write_text(r["report_csv"])
    checks = curve_checks(results)
    slim = [{k: v for k, v in r.items() if k != "report_csv"} for r in results]
    (out / "summary.json").write_text(json.dumps({"runs": slim, "checks": checks}, indent=1) + "\n")
    print(summary_table(results))
    for name, c in checks.items():
        print(f"({name}) {'PASS' if c['pass'] else 'FAIL'}: {c['items']}")


if __name__ == "__main__":
    main()
