"""Command-line entry point: ``pl-lab <command> [options]``.

Exit codes: 0 ok, 2 bad configuration or input, 3 numerical failure,
4 theorem conditions not met (with --strict), 5 a certified bound was violated.
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .data_io import LabeledDataset, load_idx, read_pl_dataset, synth_gaussian_mixture, write_pl_dataset
from .errors import ConfigError, DomainError, NumericalError, ParseError
from .experiments import mnist_split, threads
from .generation import CASE_DESCRIPTIONS, GenerationConfig, Process, audit, case_preset, corrupt_dataset
from .labelsets import LabelSet
from .losses import LossKind, LossSpec, bounds, class_losses
from .oracle import COROLLARIES, THEOREMS, check_theorem, random_config, random_problem
from .pl_losses import AVERAGE, PL_FORMS, PLExample
from .training import ModelSpec, OptimizerConfig, PLArrays, TrainReport, params_to_bytes, train

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_CONDITIONS, EXIT_VIOLATION = 0, 2, 3, 4, 5
METRICS = TrainReport.METRICS


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def _echo(args) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "from_config")}


def _floats(text):
    return None if text is None else tuple(float(v) for v in str(text).split(",") if v)


# -- gen -----------------------------------------------------------------------------------


def _source(args) -> tuple[LabeledDataset, LabeledDataset]:
    ds = args.dataset
    if ds == "synthetic":
        tr = synth_gaussian_mixture(args.k, args.n_per_class, args.dim, args.separation, args.seed * 2 + 1, args.scenario)
        te = synth_gaussian_mixture(args.k, max(1, args.n_per_class // 5), args.dim, args.separation,
                                    args.seed * 2 + 2, args.scenario)
        return tr, te
    if ds == "mnist":
        return mnist_split()
    d = Path(ds)
    if d.is_dir():
        def find(pat):
            hits = sorted(d.glob(pat))
            if not hits:
                raise ConfigError(f"no file matching {pat} in {d}")
            return hits[0]
        tr = load_idx(find("train-images*"), find("train-labels*"))
        te = load_idx(find("t10k-images*"), find("t10k-labels*"), k=tr.k)
        return tr, te
    raise ConfigError(f"--dataset must be 'synthetic', 'mnist' or an IDX directory, got {ds!r}")


def generation_config(args, k: int) -> GenerationConfig:
    if args.case is not None:
        return case_preset(args.case, k)
    if args.process is None:
        raise ConfigError("give either --case or --process")
    p = Process(args.process)
    if p is Process.SAMPLING:
        return GenerationConfig(p, k)
    if p is Process.FLIPPING:
        return GenerationConfig(p, k, uniform_eta=args.eta)
    if p is Process.ARBITRARY_SAMPLING:
        return GenerationConfig(p, k, gamma_pl=args.gamma_pl)
    base = Process(args.base)
    return GenerationConfig(p, k, base=base, uniform_eta=args.eta if base is Process.FLIPPING else None,
                            uniform_gamma=args.gamma)


def cmd_gen(args) -> int:
    tr, te = _source(args)
    cfg = generation_config(args, tr.k)
    examples = corrupt_dataset(cfg, tr.features, tr.labels, args.seed)
    test = [PLExample(x, LabelSet(1 << (int(y) - 1), te.k), int(y)) for x, y in zip(te.features, te.labels)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_pl_dataset(out / "train.jsonl", examples, cfg, args.seed)
    write_pl_dataset(out / "test.jsonl", test, None, args.seed)
    rep = audit(cfg, examples)
    _write_json(out / "meta.json", {"command": "gen", "version": __version__, "args": _echo(args),
                                    "generation": cfg.to_dict(), "source": tr.provenance, "audit": rep})
    print(json.dumps(rep, sort_keys=True))
    return EXIT_OK


# -- train ------------------------------------------------------------------------------------


def _train_objects(args, k: int, d: int):
    loss = LossSpec.parse(args.loss, q=args.q, tau=args.tau)
    hidden = tuple(int(h) for h in str(args.hidden).split(",") if h)
    model = ModelSpec(args.model, d, k, hidden, args.seed)
    decay = _floats(args.lr_decay)
    opt = OptimizerConfig(args.lr, args.momentum, args.wd, args.batch, args.epochs, decay)
    return loss, model, opt


def _load_pl_dir(path: Path):
    train_file = read_pl_dataset(path / "train.jsonl")
    test_file = read_pl_dataset(path / "test.jsonl")
    data = PLArrays.from_examples(train_file.examples)
    Xt = np.stack([ex.features for ex in test_file.examples])
    yt = np.array([ex.true_label for ex in test_file.examples])
    return train_file, data, (Xt, yt)


def cmd_train(args) -> int:
    if args.desk:
        args.epochs, args.batch = 50, 64
        args.desk = False
    train_file, data, test = _load_pl_dir(Path(args.dataset))
    loss, model, opt = _train_objects(args, train_file.k, data.X.shape[1])
    rep = train(model, opt, loss, args.form, data, test, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.csv").write_text(rep.to_csv())
    (out / "params.bin").write_bytes(params_to_bytes(model, rep.params))
    _write_json(out / "meta.json", {
        "command": "train", "version": __version__, "args": _echo(args), "loss": loss.to_dict(),
        "model": model.to_dict(), "optimizer": opt.to_dict(), "form": args.form,
        "generation": train_file.header.get("config"), "digest": rep.digest,
        "final": {m: getattr(rep, m)[-1] for m in METRICS},
    })
    print(f"final test error {rep.test_error[-1]:.4f}, digest {rep.digest[:16]}")
    return EXIT_OK


def _sweep_job(job):
    args, lr = job
    train_file, data, test = _load_pl_dir(Path(args["dataset"]))
    ns = argparse.Namespace(**args)
    ns.lr = lr
    loss, model, opt = _train_objects(ns, train_file.k, data.X.shape[1])
    rep = train(model, opt, loss, ns.form, data, test, seed=ns.seed)
    return {"lr": lr, "final_test_error": rep.test_error[-1], "min_test_error": min(rep.test_error),
            "final_pl_risk": rep.pl_risk[-1], "digest": rep.digest}


def cmd_sweep(args) -> int:
    lrs = _floats(args.lrs)
    base = _echo(args)
    jobs = [(base, lr) for lr in lrs]
    n = min(threads(), len(jobs))
    if n > 1:
        with ProcessPoolExecutor(max_workers=n) as ex:
            rows = list(ex.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(j) for j in jobs]
    _write_json(Path(args.out) / "sweep.json", {"command": "sweep", "args": base, "results": rows})
    for r in rows:
        print(f"lr={r['lr']:<8g} final={r['final_test_error']:.4f} min={r['min_test_error']:.4f}")
    return EXIT_OK


# -- verify-bounds --------------------------------------------------------------------------------


def _theorem_config(args, theorem: str, k: int, rng) -> GenerationConfig:
    if theorem == "cor1":
        return GenerationConfig(Process.SAMPLING, k)
    if theorem == "cor2" and args.eta is not None:
        return GenerationConfig(Process.FLIPPING, k, uniform_eta=args.eta)
    if theorem == "cor3" and args.gamma_pl is not None:
        return GenerationConfig(Process.ARBITRARY_SAMPLING, k, gamma_pl=args.gamma_pl)
    if theorem in ("thm7", "thm8", "thm4") and args.gamma is not None:
        base = Process.FLIPPING if theorem == "thm8" else Process.SAMPLING
        eta = (args.eta if args.eta is not None else 0.1) if base is Process.FLIPPING else None
        return GenerationConfig(Process.NOISY_AMBIGUITY, k, base=base, uniform_eta=eta, uniform_gamma=args.gamma)
    return random_config(theorem, k, rng)


def cmd_verify_bounds(args) -> int:
    if args.k > 12:
        raise ConfigError("verify-bounds enumerates the PL space; use k <= 12")
    theorems = THEOREMS if args.theorem == ["all"] else args.theorem
    rng = np.random.default_rng(args.seed)
    reports, any_fail, any_unmet = [], False, False
    for th in theorems:
        for name in args.loss:
            spec = LossSpec.parse(name)
            for i in range(args.problems):
                cfg = _theorem_config(args, th, args.k, rng)
                prob = random_problem(args.k, args.instances, rng, deterministic=th not in COROLLARIES)
                rep = check_theorem(prob, cfg, spec, th, tol=args.tol)
                d = rep.to_dict()
                d["config"] = cfg.to_dict()
                d["problem_index"] = i
                reports.append(d)
                any_unmet |= not rep.conditions_met
                any_fail |= rep.conditions_met and not rep.passed
                print(f"{th} {spec.kind.value} #{i}: {rep.status}")
    payload = {"command": "verify-bounds", "version": __version__, "args": _echo(args), "reports": reports}
    if args.out:
        _write_json(Path(args.out), payload)
    if any_fail:
        return EXIT_VIOLATION
    if any_unmet and args.strict:
        return EXIT_CONDITIONS
    return EXIT_OK


# -- verify-losses -------------------------------------------------------------------------------


def loss_audit(k_values, points: int, seed: int, tol: float = 1e-9) -> dict:
    """Observed per-class and class-sum ranges against the tabulated bounds."""
    rng = np.random.default_rng(seed)
    out = {}
    for kind in LossKind:
        spec = LossSpec(kind)
        rows = []
        for k in k_values:
            F = rng.dirichlet(np.ones(k), size=points)
            # add vertices and the centroid, where the bounds are attained
            F = np.vstack([F, np.eye(k), np.full((1, k), 1.0 / k)])
            L = np.maximum(class_losses(spec, F), 0.0)
            S = L.sum(axis=1)
            b = bounds(spec, k)
            row = {"k": k, "sum_min": float(S.min()), "sum_max": float(S.max()), "loss_max": float(L.max()),
                   **{key: v for key, v in b.to_dict().items()}}
            if b.bounded:
                row["ok"] = bool(S.min() >= b.C1 - tol and S.max() <= b.C2 + tol and L.max() <= b.U + tol
                                 and L.min() >= -tol)
            else:
                row["ok"] = bool(L.min() >= -tol)
            rows.append(row)
        out[kind.value] = rows
    return out


def cmd_verify_losses(args) -> int:
    ks = range(args.k_min, args.k_max + 1)
    res = loss_audit(ks, args.points, args.seed)
    bad = [(kind, r["k"]) for kind, rows in res.items() for r in rows if not r["ok"]]
    payload = {"command": "verify-losses", "version": __version__, "args": _echo(args), "results": res,
               "violations": bad}
    if args.out:
        _write_json(Path(args.out), payload)
    for kind, rows in res.items():
        last = rows[-1]
        rng = "unbounded" if last["C2"] is None else f"[{last['C1']:.6g}, {last['C2']:.6g}]"
        print(f"{kind:4s} k={last['k']}: observed sum [{last['sum_min']:.6g}, {last['sum_max']:.6g}] vs {rng}")
    return EXIT_VIOLATION if bad else EXIT_OK


# -- report ----------------------------------------------------------------------------------------


def collect_reports(run_dirs) -> tuple[list[tuple], list[str]]:
    rows, warnings = [], []
    for rd in run_dirs:
        rd = Path(rd)
        files = [rd / "report.csv"] if (rd / "report.csv").exists() else sorted(rd.glob("*/report.csv"))
        if not files:
            warnings.append(f"no report.csv under {rd}")
            continue
        for f in files:
            run_id = f.parent.name
            rep = TrainReport.from_csv(f.read_text())
            for epoch, *vals in rep.rows():
                for m, v in zip(METRICS, vals):
                    rows.append((run_id, epoch, m, v))
    return rows, warnings


def cmd_report(args) -> int:
    rows, warnings = collect_reports(args.runs)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("run_id", "epoch", "metric", "value"))
        for r in rows:
            w.writerow((r[0], r[1], r[2], repr(r[3])))
    print(f"wrote {len(rows)} rows to {out}")
    return EXIT_OK


# -- parser -----------------------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pl-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--from-config", help="rerun with the arguments echoed in a meta.json")

    g = sub.add_parser("gen", help="corrupt a labelled dataset into partial labels")
    common(g)
    g.add_argument("--dataset", default="synthetic", help="'synthetic', 'mnist' or a directory of IDX files")
    g.add_argument("--case", type=int, choices=sorted(CASE_DESCRIPTIONS))
    g.add_argument("--process", choices=[p.value for p in Process])
    g.add_argument("--base", choices=["sampling", "flipping"], default="sampling")
    g.add_argument("--eta", type=float, help="uniform flipping probability")
    g.add_argument("--gamma", type=float, help="label-noise rate or set flipping rate")
    g.add_argument("--gamma-pl", type=float, help="noise rate of uniform arbitrary sampling")
    g.add_argument("--k", type=int, default=5, help="classes of the synthetic mixture")
    g.add_argument("--n-per-class", type=int, default=1000)
    g.add_argument("--dim", type=int, default=50)
    g.add_argument("--separation", type=float, default=6.0)
    g.add_argument("--scenario", choices=["deterministic", "stochastic"], default="deterministic")
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    def train_opts(p):
        p.add_argument("--dataset", help="directory written by 'gen'")
        p.add_argument("--loss", default="MAE", choices=[k.value for k in LossKind])
        p.add_argument("--q", type=float)
        p.add_argument("--tau", type=float)
        p.add_argument("--form", choices=PL_FORMS, default=AVERAGE)
        p.add_argument("--model", choices=["linear", "mlp"], default="mlp")
        p.add_argument("--hidden", default="300,300,300,300", help="comma-separated MLP widths")
        p.add_argument("--epochs", type=int, default=250)
        p.add_argument("--batch", type=int, default=256)
        p.add_argument("--lr", type=float, default=0.01)
        p.add_argument("--momentum", type=float, default=0.9)
        p.add_argument("--wd", type=float, default=0.0)
        p.add_argument("--lr-decay", help="'every,factor' step schedule")
        p.add_argument("--out")

    t = sub.add_parser("train", help="train a model on a PL dataset")
    common(t)
    train_opts(t)
    t.add_argument("--desk", action="store_true", help="desk preset: 50 epochs, batch 64 (laptop budget, overrides --epochs and --batch)")
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("sweep", help="train over a learning-rate grid")
    common(s)
    train_opts(s)
    s.add_argument("--lrs", default="0.1,0.01,0.001")
    s.set_defaults(func=cmd_sweep)

    v = sub.add_parser("verify-bounds", help="certify theorem inequalities on random finite problems")
    common(v)
    v.add_argument("--theorem", nargs="+", default=["all"], choices=["all", *THEOREMS])
    v.add_argument("--loss", nargs="+", default=["MSE"], choices=[k.value for k in LossKind])
    v.add_argument("--k", type=int, default=3)
    v.add_argument("--problems", type=int, default=5)
    v.add_argument("--instances", type=int, default=10)
    v.add_argument("--eta", type=float)
    v.add_argument("--gamma", type=float, help="uniform set flipping rate (thm4, thm7, thm8)")
    v.add_argument("--gamma-pl", type=float)
    v.add_argument("--tol", type=float, default=1e-4)
    v.add_argument("--strict", action="store_true", help="exit 4 when a theorem's conditions fail")
    v.add_argument("--out")
    v.set_defaults(func=cmd_verify_bounds)

    lo = sub.add_parser("verify-losses", help="audit class-sum bounds of every loss")
    common(lo)
    lo.add_argument("--k-min", type=int, default=2)
    lo.add_argument("--k-max", type=int, default=10)
    lo.add_argument("--points", type=int, default=10000)
    lo.add_argument("--out")
    lo.set_defaults(func=cmd_verify_losses)

    r = sub.add_parser("report", help="merge TrainReports into a long table")
    r.add_argument("runs", nargs="*")
    r.add_argument("--out", required=True)
    r.add_argument("--from-config")
    r.set_defaults(func=cmd_report)
    return ap


def _apply_echo(parser, args):
    meta = json.loads(Path(args.from_config).read_text())
    if meta.get("command") != args.command:
        raise ConfigError(f"{args.from_config} echoes a {meta.get('command')!r} run, not {args.command!r}")
    out = args.out
    merged = vars(args).copy()
    merged.update(meta["args"])
    if out is not None:
        merged["out"] = out
    return argparse.Namespace(**merged)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if getattr(args, "from_config", None):
            args = _apply_echo(parser, args)
        if args.command in ("gen", "train", "sweep") and not args.out:
            raise ConfigError("--out is required")
        if args.command in ("train", "sweep") and not args.dataset:
            raise ConfigError("--dataset is required")
        return args.func(args)
    except (ConfigError, DomainError, ParseError, FileNotFoundError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
