"""Regenerate the stored problems used by the condition-sharpness probe."""
import argparse
import json
from pathlib import Path

import numpy as np

from pl_lab.oracle import DiscreteProblem, sharpness_probe

OUT = Path(__file__).resolve().parents[1] / "src" / "pl_lab" / "fixtures" / "sharpness_problems.json"


def draw(rng, k, m, min_gap=0.05):
    rows = []
    while len(rows) < m:
        p = rng.dirichlet(np.ones(k))
        srt = np.sort(p)
        # distinct extremes so both argmax and argmin are unambiguous
        if srt[-1] - srt[-2] >= min_gap and srt[1] - srt[0] >= min_gap:
            rows.append(p)
    P = np.array(rows)
    w = rng.dirichlet(np.ones(m))
    return DiscreteProblem(k, w / w.sum(), P / P.sum(axis=1, keepdims=True))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=20240101)
    ap.add_argument("--count", type=int, default=8)
    ap.add_argument("--out", type=Path, default=OUT)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(args.seed)
    problems = [draw(rng, k=3 + i % 2, m=5) for i in range(args.count)]
    hits = sharpness_probe(0.51, problems)
    clean = sharpness_probe(0.49, problems)
    print(f"violations at 0.51: {len(hits)}, at 0.49: {len(clean)}")
    payload = {"seed": args.seed, "problems": [p.to_dict() for p in problems]}
    args.out.write_text(json.dumps(payload, indent=1) + "\n")
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
