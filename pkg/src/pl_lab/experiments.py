"""Desk-scale benchmark: train every loss on a synthetic mixture and an MNIST subset.

The hyperparameters here are desk presets chosen for a laptop budget, not
settings taken from any published protocol.
"""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data_io import LabeledDataset, load_idx, synth_gaussian_mixture, write_idx
from .generation import case_preset, sample_label_sets
from .labelsets import masks_to_indicator
from .losses import BOUNDED_KINDS, LossKind, LossSpec
from .pl_losses import AVERAGE
from .training import ModelSpec, OptimizerConfig, PLArrays, TrainReport, train

REPO_ROOT = Path(__file__).resolve().parents[2]
MNIST_DIR = Path(os.environ.get("PL_LAB_MNIST", REPO_ROOT / "data" / "mnist5k"))
MNIST_FILES = {
    "train": ("train-images-idx3-ubyte.gz", "train-labels-idx1-ubyte.gz"),
    "test": ("t10k-images-idx3-ubyte.gz", "t10k-labels-idx1-ubyte.gz"),
}

# pilot runs showed the symmetric losses need a larger step to leave the uniform start
DESK_LR = {
    LossKind.MAE: 0.05,
    LossKind.RCE: 0.05,
    LossKind.MSE: 0.01,
    LossKind.GCE: 0.01,
    LossKind.PCE: 0.01,
    LossKind.CCE: 0.01,
    LossKind.FL: 0.01,
}
DESK_KINDS = tuple(DESK_LR)
DESK_CASES = (1, 3, 4)
DESK_DATASETS = ("synthetic", "mnist")


@dataclass(frozen=True)
class DeskRun:
    dataset: str
    case: int
    kind: str
    epochs: int = 100
    batch_size: int = 64
    hidden: tuple = (64, 64)
    seed: int = 0

    @property
    def run_id(self) -> str:
        return f"{self.dataset}-case{self.case}-{self.kind}-s{self.seed}"


def synthetic_split(seed: int = 0) -> tuple[LabeledDataset, LabeledDataset]:
    """k=5 mixture: 1000 training and 200 test points per class in 50 dimensions."""
    train_ds = synth_gaussian_mixture(5, 1000, 50, 6.0, seed * 2 + 1, "deterministic")
    test_ds = synth_gaussian_mixture(5, 200, 50, 6.0, seed * 2 + 2, "deterministic")
    return train_ds, test_ds


def prepare_mnist_subset(out_dir=MNIST_DIR, seed: int = 0, per_class_train: int = 400) -> Path:
    """Write a stratified 4000/1000 split of the 5000-image MNIST sample bundled with mlxtend."""
    from mlxtend.data import mnist_data

    X, y = mnist_data()
    X = X.astype(np.uint8).reshape(-1, 28, 28)
    y = y.astype(np.int64)
    rng = np.random.default_rng(seed)
    tr, te = [], []
    for c in np.unique(y):
        idx = rng.permutation(np.flatnonzero(y == c))
        tr.extend(idx[:per_class_train])
        te.extend(idx[per_class_train:])
    tr, te = np.sort(tr), np.sort(te)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for split, idx in (("train", tr), ("test", te)):
        img, lab = MNIST_FILES[split]
        write_idx(out / img, out / lab, X[idx], y[idx])
    return out


def mnist_split(data_dir=MNIST_DIR) -> tuple[LabeledDataset, LabeledDataset]:
    data_dir = Path(data_dir)
    img, lab = MNIST_FILES["train"]
    if not (data_dir / img).exists():
        raise FileNotFoundError(f"{data_dir / img} missing; run scripts/fetch_mnist_subset.py first")
    train_ds = load_idx(data_dir / img, data_dir / lab, k=10)
    img, lab = MNIST_FILES["test"]
    return train_ds, load_idx(data_dir / img, data_dir / lab, k=10)


def load_split(name: str, seed: int = 0):
    if name == "synthetic":
        return synthetic_split(seed)
    if name == "mnist":
        return mnist_split()
    raise ValueError(f"unknown desk dataset {name!r}")


def run_desk(run: DeskRun) -> dict:
    train_ds, test_ds = load_split(run.dataset)
    k = train_ds.k
    cfg = case_preset(run.case, k)
    masks = sample_label_sets(cfg, train_ds.labels, np.random.default_rng([run.seed, 7]))
    data = PLArrays(train_ds.features, masks_to_indicator(masks, k), train_ds.labels)
    kind = LossKind(run.kind)
    model = ModelSpec("mlp", train_ds.features.shape[1], k, run.hidden, run.seed)
    opt = OptimizerConfig(lr=DESK_LR[kind], momentum=0.9, batch_size=run.batch_size, epochs=run.epochs)
    rep = train(model, opt, LossSpec(kind), AVERAGE, data, (test_ds.features, test_ds.labels), seed=run.seed)
    err = np.array(rep.test_error)
    return {
        "run": asdict(run),
        "run_id": run.run_id,
        "lr": opt.lr,
        "final_error": float(err[-1]),
        "min_error": float(err.min()),
        "final_acc": 1.0 - float(err[-1]),
        "report_csv": rep.to_csv(),
        "digest": rep.digest,
    }


def threads() -> int:
    return max(1, int(os.environ.get("PL_LAB_THREADS", "1")))


def run_grid(runs, workers: int | None = None) -> list[dict]:
    """Run jobs, in parallel when allowed; results come back in input order."""
    workers = threads() if workers is None else workers
    runs = list(runs)
    if workers <= 1:
        return [run_desk(r) for r in runs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(run_desk, runs))


def desk_grid(datasets=DESK_DATASETS, cases=DESK_CASES, kinds=DESK_KINDS, epochs: int = 100, seed: int = 0):
    return [DeskRun(d, c, LossKind(k).value, epochs=epochs, seed=seed) for d in datasets for c in cases for k in kinds]


def curve_checks(results: list[dict], gap: float = 0.05) -> dict[str, dict]:
    """Evaluate the three qualitative claims on a finished grid.

    (a) MAE and GCE end within ``gap`` of their best epoch under Cases 1 and 4;
    (b) CCE ends more than ``gap`` above its best epoch on some dataset under Case 4;
    (c) per dataset under Cases 3 and 4, the mean final accuracy of the bounded
        losses is at least that of the unbounded ones.
    """
    by = {(r["run"]["dataset"], r["run"]["case"], r["run"]["kind"]): r for r in results}
    datasets = sorted({key[0] for key in by})
    a_items = {
        f"{d}/case{c}/{kind}": by[d, c, kind]["final_error"] - by[d, c, kind]["min_error"]
        for d in datasets for c in (1, 4) for kind in ("MAE", "GCE") if (d, c, kind) in by
    }
    b_items = {
        f"{d}/case4/CCE": by[d, 4, "CCE"]["final_error"] - by[d, 4, "CCE"]["min_error"]
        for d in datasets if (d, 4, "CCE") in by
    }
    bounded = {k.value for k in BOUNDED_KINDS}
    c_items = {}
    for d in datasets:
        for c in (3, 4):
            rows = [r for key, r in by.items() if key[0] == d and key[1] == c]
            if not rows:
                continue
            bnd = [r["final_acc"] for r in rows if r["run"]["kind"] in bounded]
            unb = [r["final_acc"] for r in rows if r["run"]["kind"] not in bounded]
            c_items[f"{d}/case{c}"] = (float(np.mean(bnd)), float(np.mean(unb)))
    return {
        "a": {"items": a_items, "pass": bool(a_items) and all(v <= gap for v in a_items.values())},
        "b": {"items": b_items, "pass": any(v > gap for v in b_items.values())},
        "c": {"items": c_items, "pass": bool(c_items) and all(b >= u for b, u in c_items.values())},
    }


def summary_table(results: list[dict]) -> str:
    lines = [f"{'run':32s} {'lr':>6s} {'min_err':>8s} {'final_err':>9s}"]
    for r in results:
        lines.append(f"{r['run_id']:32s} {r['lr']:6.3g} {r['min_error']:8.4f} {r['final_error']:9.4f}")
    return "\n".join(lines)


def load_report(r: dict) -> TrainReport:
    return TrainReport.from_csv(r["report_csv"])
