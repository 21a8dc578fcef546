"""Command-line experiment harness.

Subcommands cover the full pipeline: ``gen-data`` writes train/cal/test
splits, ``train`` fits an ensemble, ``calibrate`` computes the conformal
quantile, ``evaluate`` appends metric rows, ``noise-sweep`` walks the noise
grid, and ``compare`` produces hybrid / shared-circuit side-by-side rows plus
resource reports.  All randomness is seeded from the config, so repeated runs
reproduce the same artifacts (wall-time columns excepted).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .config import (
    EXIT_CONFIG,
    EXIT_MISSING,
    EXIT_OK,
    EXIT_RUNTIME,
    ConfigError,
    ExperimentConfig,
    MissingInputError,
    apply_overrides,
    builtin_preset,
    config_from_dict,
    config_to_dict,
    load_config,
    preset_names,
    save_config,
)
from .conformal import calibrate, interval_metrics, nonconformity, predict_interval
from .datagen import (
    OperatorDataset,
    build_advection_dataset,
    build_antiderivative_dataset,
    build_window_dataset,
    damped_multitone,
    load_dataset,
    save_dataset,
    split_dataset,
)
from .ensemble import (
    ensemble_predict,
    ensemble_predict_noisy,
    hybrid_cost,
    load_ensemble,
    save_ensemble,
    spqc_predict,
    spqc_resource_report,
    train_ensemble,
)
from .circuits import tomography_circuit, uniform_probe
from .noise import EstimationError, basis_gate_tally
from .operator_net import FourierFeatureSpec, dominant_frequencies, rel_l2
from .simulate import EstimationError as SimEstimationError

OUT_DIR_ENV = "QONNLAB_OUT"

HYBRIDS = ("quantum", "classical-branch", "classical-trunk")


# ----------------------------------------------------------------- workspace


class Workspace:
    """Standard artifact locations under one experiment output directory."""

    def __init__(self, root: Path):
        self.root = Path(root)

    def data_dir(self, split: str) -> Path:
        return self.root / "data" / split

    @property
    def config_path(self) -> Path:
        return self.root / "config.json"

    @property
    def ensemble_path(self) -> Path:
        return self.root / "ensemble.json"

    @property
    def losses_path(self) -> Path:
        return self.root / "losses.csv"

    @property
    def calibration_path(self) -> Path:
        return self.root / "calibration.json"

    @property
    def metrics_path(self) -> Path:
        return self.root / "metrics.csv"

    @property
    def resources_path(self) -> Path:
        return self.root / "resources.json"


def resolve_out_dir(cfg: ExperimentConfig, cli_value: str | None) -> Path:
    if cli_value:
        return Path(cli_value)
    if cfg.out_dir:
        return Path(cfg.out_dir)
    base = os.environ.get(OUT_DIR_ENV)
    if base:
        return Path(base) / cfg.name
    return Path("runs") / cfg.name


# --------------------------------------------------------------- metric rows


METRICS_COLUMNS = (
    "experiment",
    "variant",
    "lam",
    "shots",
    "readout",
    "rel_l2_percent",
    "coverage_percent",
    "avg_width",
    "peak_uncertainty",
    "retained_fraction",
    "wall_time_s",
)


@dataclasses.dataclass(frozen=True)
class MetricsRow:
    """One evaluation outcome in plot-ready long format.

    ``variant`` names the execution route: "exact", "oracle", one of the
    hybrid modes ("quantum", "classical-branch", "classical-trunk"), or
    "spqc".  ``lam``/``shots`` are empty for exact rows; ``shots`` empty means
    the infinite-shot limit.
    """

    experiment: str
    variant: str
    lam: float | None
    shots: int | None
    readout: float | None
    rel_l2_percent: float
    coverage_percent: float
    avg_width: float
    peak_uncertainty: float
    retained_fraction: float
    wall_time_s: float

    def __post_init__(self):
        if not 0.0 <= self.coverage_percent <= 100.0:
            raise ValueError("coverage_percent must lie in [0, 100]")
        if self.avg_width < 0.0 or self.peak_uncertainty < 0.0:
            raise ValueError("interval widths must be nonnegative")

    def as_csv(self) -> list[str]:
        def fmt(v):
            if v is None:
                return ""
            if isinstance(v, float):
                return "" if math.isnan(v) else repr(v)
            return str(v)

        return [fmt(getattr(self, c)) for c in (
            "experiment", "variant", "lam", "shots", "readout",
            "rel_l2_percent", "coverage_percent", "avg_width",
            "peak_uncertainty", "retained_fraction", "wall_time_s",
        )]


def append_metrics(path: Path, rows: list[MetricsRow]) -> None:
    """Append rows to the long-format CSV, writing the header once."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not path.exists() or path.stat().st_size == 0
    with open(path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(METRICS_COLUMNS)
        for row in rows:
            writer.writerow(row.as_csv())


# ------------------------------------------------------------ data pipeline


def build_split_datasets(cfg: ExperimentConfig):
    """Generate the task dataset and return (train, cal, test) splits."""
    d = cfg.data
    params = cfg.data_params()
    if cfg.task == "antiderivative":
        total = d.n_train + d.n_cal + d.n_test
        ds = build_antiderivative_dataset(total, seed=d.seed, **params)
    elif cfg.task == "advection":
        total = d.n_train + d.n_cal + d.n_test
        ds = build_advection_dataset(total, seed=d.seed, **params)
    else:  # window
        series = damped_multitone(
            params["n_steps"], damp=params["damp"], noise=params["noise"], seed=d.seed
        )
        ds = build_window_dataset(series, params["window"], params["horizon"])
        if cfg.architecture.fourier_k > 0:
            freqs = dominant_frequencies(
                series[None, :],
                np.arange(params["n_steps"], dtype=float),
                cfg.architecture.fourier_k,
            )
            ds.meta["fourier_freqs"] = [float(f) for f in freqs]
    splits = split_dataset(ds, d.n_train, d.n_cal, d.n_test, seed=d.seed)
    return splits


def resolve_features(cfg: ExperimentConfig, train_ds: OperatorDataset):
    """Fourier feature spec from the config or, failing that, the data."""
    arch = cfg.architecture
    if arch.fourier_freqs is not None:
        return FourierFeatureSpec(freqs=arch.fourier_freqs)
    if arch.fourier_k == 0:
        return None
    stored = train_ds.meta.get("fourier_freqs")
    if stored:
        return FourierFeatureSpec(freqs=tuple(float(f) for f in stored))
    queries = np.asarray(train_ds.queries)
    if queries.ndim != 1:
        raise ConfigError(
            "architecture.fourier_k needs scalar query coordinates; "
            "give architecture.fourier_freqs explicitly for this task"
        )
    freqs = dominant_frequencies(train_ds.S, queries, arch.fourier_k)
    return FourierFeatureSpec(freqs=freqs)


def _require_dataset(ws: Workspace, split: str) -> OperatorDataset:
    path = ws.data_dir(split)
    try:
        return load_dataset(path)
    except FileNotFoundError as exc:
        raise MissingInputError(
            f"no {split} dataset at {path} (run gen-data first)"
        ) from exc


def _require_ensemble(path: Path):
    if not path.exists():
        raise MissingInputError(f"no ensemble checkpoint at {path} (run train first)")
    return load_ensemble(path)


def _require_calibration(path: Path) -> dict:
    if not path.exists():
        raise MissingInputError(f"no calibration artifact at {path} (run calibrate first)")
    return json.loads(path.read_text())


# ----------------------------------------------------------- prediction core


def _predict(cfg, ens, U, t, profile=None, rng=None, hybrid="quantum"):
    """Dispatch exact / noisy / shared-circuit prediction.

    Returns (mu, sigma, retained_fraction).
    """
    if cfg.ensemble.mode == "spqc":
        mu, sigma, _ = spqc_predict(ens, U, t, profile=profile, rng=rng)
        return mu, sigma, float("nan") if profile is not None else 1.0
    if profile is None:
        mu, sigma, _ = ensemble_predict(ens, U, t)
        return mu, sigma, 1.0
    mu, sigma, _, info = ensemble_predict_noisy(
        ens, U, t, profile, rng=rng, hybrid=hybrid, return_info=True
    )
    return mu, sigma, info["retained"]


def _evaluate_rows(cfg, ens, cal_art, ds, variant, profile, rng) -> MetricsRow:
    start = time.perf_counter()
    hybrid = variant if variant in HYBRIDS else "quantum"
    mu, sigma, retained = _predict(
        cfg, ens, ds.U, ds.queries, profile=profile, rng=rng, hybrid=hybrid
    )
    lo, hi = predict_interval(mu, sigma, cal_art["q_hat"], eps=cfg.conformal.eps)
    im = interval_metrics(ds.S, lo, hi)
    err = float(rel_l2(mu, ds.S)) * 100.0
    return MetricsRow(
        experiment=cfg.name,
        variant=variant,
        lam=None if profile is None else profile.lam,
        shots=None if profile is None else profile.shots,
        readout=None if profile is None else profile.readout_flip,
        rel_l2_percent=err,
        coverage_percent=im.coverage * 100.0,
        avg_width=im.avg_width,
        peak_uncertainty=im.peak_width,
        retained_fraction=retained,
        wall_time_s=round(time.perf_counter() - start, 3),
    )


def _calibration_artifact(cfg, ens, cal_ds, variant, profile, rng) -> dict:
    mu, sigma, _ = _predict(
        cfg, ens, cal_ds.U, cal_ds.queries, profile=profile, rng=rng,
        hybrid=variant if variant in HYBRIDS else "quantum",
    )
    scores = nonconformity(cal_ds.S, mu, sigma, eps=cfg.conformal.eps)
    q_hat = calibrate(scores, cfg.conformal.alpha)
    return {
        "alpha": cfg.conformal.alpha,
        "eps": cfg.conformal.eps,
        "q_hat": q_hat,
        "n_cal": int(cal_ds.n_functions),
        "n_scores": int(scores.size),
        "variant": variant,
        "lam": None if profile is None else profile.lam,
        "shots": None if profile is None else profile.shots,
        "readout": None if profile is None else profile.readout_flip,
    }


def _cell_rng(seed: int, lam: float, shots: int | None) -> np.random.Generator:
    """Deterministic per-cell stream independent of sweep order and workers."""
    key = np.random.SeedSequence(
        [seed, hash((float(lam), -1 if shots is None else int(shots))) & 0x7FFFFFFF]
    )
    return np.random.default_rng(key)


# ------------------------------------------------------------------ commands


def cmd_gen_data(cfg: ExperimentConfig, ws: Workspace, args) -> int:
    train, cal, test = build_split_datasets(cfg)
    for split, ds in (("train", train), ("cal", cal), ("test", test)):
        save_dataset(ds, ws.data_dir(split))
    save_config(cfg, ws.config_path)
    print(
        f"gen-data: wrote {train.n_functions}/{cal.n_functions}/{test.n_functions} "
        f"train/cal/test functions ({train.S.shape[1]} queries) under {ws.root / 'data'}"
    )
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig, ws: Workspace, args) -> int:
    train_ds = _require_dataset(ws, "train")
    features = resolve_features(cfg, train_ds)
    arch = cfg.architecture
    tc = cfg.training.to_train_config()
    ens, result = train_ensemble(
        train_ds.U,
        train_ds.queries,
        train_ds.S,
        n_members=cfg.ensemble.size,
        width=arch.width,
        depth=arch.layers,
        config=tc,
        base_seed=cfg.training.seed,
        latent=arch.latent,
        residual=arch.residual,
        features=features,
        trunk_width=arch.trunk_width,
        trunk_depth=arch.trunk_depth,
    )
    ens.meta.update({"experiment": cfg.name, "task": cfg.task, "mode": cfg.ensemble.mode})
    save_ensemble(ens, ws.ensemble_path)
    with open(ws.losses_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "member", "loss"])
        for i, it in enumerate(result.trace_iters):
            for m in range(result.loss_trace.shape[1]):
                writer.writerow([int(it), m, repr(float(result.loss_trace[i, m]))])
    print(
        f"train: {cfg.ensemble.size} members x {tc.iters} iters in "
        f"{result.wall_time:.1f}s; final loss "
        f"{np.min(result.final_loss):.3e}..{np.max(result.final_loss):.3e}; "
        f"checkpoint {ws.ensemble_path}"
    )
    return EXIT_OK


def _single_cell_profile(cfg, args):
    """Noise profile for calibrate/evaluate; --lam/--shots override the grid head."""
    lam = cfg.noise.lambdas[0] if args.lam is None else args.lam
    if args.shots is None:
        shots = cfg.noise.shots[0]
    elif args.shots in ("inf", "exact"):
        shots = None
    else:
        shots = int(args.shots)
    return cfg.noise.profile(lam, shots)


def cmd_calibrate(cfg: ExperimentConfig, ws: Workspace, args) -> int:
    cal_ds = _require_dataset(ws, "cal")
    ens = _require_ensemble(ws.ensemble_path)
    if args.variant == "exact":
        profile, rng = None, None
        variant = "exact"
    else:
        profile = _single_cell_profile(cfg, args)
        rng = _cell_rng(cfg.noise.seed, profile.lam, profile.shots)
        variant = args.hybrid if cfg.ensemble.mode != "spqc" else "spqc"
    art = _calibration_artifact(cfg, ens, cal_ds, variant, profile, rng)
    ws.calibration_path.parent.mkdir(parents=True, exist_ok=True)
    ws.calibration_path.write_text(json.dumps(art, indent=2, sort_keys=True) + "\n")
    print(
        f"calibrate: q_hat={art['q_hat']:.6g} from {art['n_scores']} scores "
        f"({variant}); wrote {ws.calibration_path}"
    )
    return EXIT_OK


def cmd_evaluate(cfg: ExperimentConfig, ws: Workspace, args) -> int:
    test_ds = _require_dataset(ws, "test")
    ens = _require_ensemble(ws.ensemble_path)
    cal_art = _require_calibration(ws.calibration_path)
    rows = []
    if args.variant == "exact":
        rows.append(_evaluate_rows(cfg, ens, cal_art, test_ds, "exact", None, None))
        if args.oracle:
            rows.append(_oracle_row(cfg, ens, cal_art, test_ds, args.oracle_max))
    else:
        profile = _single_cell_profile(cfg, args)
        variant = args.hybrid if cfg.ensemble.mode != "spqc" else "spqc"
        rng = _cell_rng(cfg.noise.seed, profile.lam, profile.shots)
        if profile.lam == 0.0 and profile.shots is None and profile.readout_flip == 0.0:
            # Degenerate noise: take the exact route so the row is identical
            # to an exact run's, not merely equal to float precision.
            profile, rng, variant = None, None, "exact"
        rows.append(_evaluate_rows(cfg, ens, cal_art, test_ds, variant, profile, rng))
    append_metrics(ws.metrics_path, rows)
    for row in rows:
        print(
            f"evaluate[{row.variant}]: rel_l2={row.rel_l2_percent:.3f}% "
            f"coverage={row.coverage_percent:.2f}% avg_width={row.avg_width:.4g} "
            f"peak={row.peak_uncertainty:.4g}"
        )
    print(f"evaluate: appended {len(rows)} row(s) to {ws.metrics_path}")
    return EXIT_OK


def _oracle_row(cfg, ens, cal_art, test_ds, max_functions: int) -> MetricsRow:
    """Exact evaluation re-derived through the dense full-Hilbert simulator."""
    from .fullsim import oracle_qonn_forward

    start = time.perf_counter()
    take = min(max_functions, test_ds.n_functions)
    sub = test_ds.take(np.arange(take))
    preds = []
    for member in ens.members:
        b = oracle_qonn_forward(member.branch, sub.U)
        tr = oracle_qonn_forward(member.trunk, member.trunk_inputs(sub.queries))
        preds.append(b @ tr.T)
    preds = np.stack(preds)
    mu = preds.mean(axis=0)
    sigma = preds.std(axis=0)
    fast_mu, _, _ = ensemble_predict(ens, sub.U, sub.queries)
    gap = float(np.max(np.abs(mu - fast_mu)))
    print(f"oracle: max |dense - fast| = {gap:.3e} over {take} functions")
    lo, hi = predict_interval(mu, sigma, cal_art["q_hat"], eps=cfg.conformal.eps)
    im = interval_metrics(sub.S, lo, hi)
    return MetricsRow(
        experiment=cfg.name,
        variant="oracle",
        lam=None,
        shots=None,
        readout=None,
        rel_l2_percent=float(rel_l2(mu, sub.S)) * 100.0,
        coverage_percent=im.coverage * 100.0,
        avg_width=im.avg_width,
        peak_uncertainty=im.peak_width,
        retained_fraction=1.0,
        wall_time_s=round(time.perf_counter() - start, 3),
    )


def _sweep_cell(payload: dict) -> list[str]:
    """One noise-grid cell; runs in a worker process, returns a CSV row."""
    cfg = config_from_dict(payload["config"])
    ws = Workspace(Path(payload["root"]))
    ens = _require_ensemble(ws.ensemble_path)
    test_ds = _require_dataset(ws, "test")
    lam, shots = payload["lam"], payload["shots"]
    profile = cfg.noise.profile(lam, shots)
    variant = payload["variant"]
    rng = _cell_rng(cfg.noise.seed, lam, shots)
    if payload["calibrate_per_cell"]:
        cal_ds = _require_dataset(ws, "cal")
        cal_art = _calibration_artifact(cfg, ens, cal_ds, variant, profile, rng)
    else:
        cal_art = payload["calibration"]
    row = _evaluate_rows(cfg, ens, cal_art, test_ds, variant, profile, rng)
    return row.as_csv()


def cmd_noise_sweep(cfg: ExperimentConfig, ws: Workspace, args) -> int:
    _require_dataset(ws, "test")
    _require_ensemble(ws.ensemble_path)
    if args.calibrate_per_cell:
        _require_dataset(ws, "cal")
        cal_art = None
    else:
        cal_art = _require_calibration(ws.calibration_path)
    variant = args.hybrid if cfg.ensemble.mode != "spqc" else "spqc"
    cells = [
        {
            "config": config_to_dict(cfg),
            "root": str(ws.root),
            "lam": lam,
            "shots": shots,
            "variant": variant,
            "calibrate_per_cell": args.calibrate_per_cell,
            "calibration": cal_art,
        }
        for lam in cfg.noise.lambdas
        for shots in cfg.noise.shots
    ]
    start = time.perf_counter()
    if args.workers > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            csv_rows = list(pool.map(_sweep_cell, cells))
    else:
        csv_rows = [_sweep_cell(c) for c in cells]
    ws.metrics_path.parent.mkdir(parents=True, exist_ok=True)
    fresh = not ws.metrics_path.exists() or ws.metrics_path.stat().st_size == 0
    with open(ws.metrics_path, "a", newline="") as fh:
        writer = csv.writer(fh)
        if fresh:
            writer.writerow(METRICS_COLUMNS)
        writer.writerows(csv_rows)
    print(
        f"noise-sweep: {len(cells)} cells "
        f"({len(cfg.noise.lambdas)} lambdas x {len(cfg.noise.shots)} shot counts) "
        f"in {time.perf_counter() - start:.1f}s -> {ws.metrics_path}"
    )
    return EXIT_OK


def cmd_compare(cfg: ExperimentConfig, ws: Workspace, args) -> int:
    what = set(args.what)
    wrote = []
    if what & {"hybrid", "spqc"}:
        test_ds = _require_dataset(ws, "test")
        ens = _require_ensemble(ws.ensemble_path)
        cal_art = _require_calibration(ws.calibration_path)
        grid = [(lam, shots) for lam in cfg.noise.lambdas for shots in cfg.noise.shots]
        if args.max_cells:
            grid = grid[: args.max_cells]
        rows = []
        for lam, shots in grid:
            profile = cfg.noise.profile(lam, shots)
            if "hybrid" in what:
                for hybrid in HYBRIDS:
                    rng = _cell_rng(cfg.noise.seed, lam, shots)
                    rows.append(
                        _evaluate_rows(cfg, ens, cal_art, test_ds, hybrid, profile, rng)
                    )
            if "spqc" in what:
                spqc_cfg = dataclasses.replace(
                    cfg, ensemble=dataclasses.replace(cfg.ensemble, mode="spqc")
                )
                indep_cfg = dataclasses.replace(
                    cfg, ensemble=dataclasses.replace(cfg.ensemble, mode="independent")
                )
                rng = _cell_rng(cfg.noise.seed, lam, shots)
                rows.append(
                    _evaluate_rows(indep_cfg, ens, cal_art, test_ds, "quantum", profile, rng)
                )
                rng = _cell_rng(cfg.noise.seed, lam, shots)
                rows.append(
                    _evaluate_rows(spqc_cfg, ens, cal_art, test_ds, "spqc", profile, rng)
                )
        append_metrics(ws.metrics_path, rows)
        wrote.append(f"{len(rows)} comparison rows -> {ws.metrics_path}")
    if "resources" in what:
        report = _resource_report(cfg, ws)
        ws.resources_path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
        wrote.append(f"resource report -> {ws.resources_path}")
    print("compare: " + "; ".join(wrote))
    return EXIT_OK


def _resource_report(cfg: ExperimentConfig, ws: Workspace) -> dict:
    """Gate tallies, depths and classical cost model for the configured nets."""
    ens = _require_ensemble(ws.ensemble_path)
    member = ens.members[0]
    report: dict = {"experiment": cfg.name, "ensemble_size": cfg.ensemble.size}
    per_layer = []
    widest = None
    for net_name, net in (("branch", member.branch), ("trunk", member.trunk)):
        for i, layer in enumerate(net.layers):
            circ = tomography_circuit(
                uniform_probe(layer.layout.n), layer.layout, layer.angles
            )
            tally = basis_gate_tally(circ)
            per_layer.append(
                {
                    "network": net_name,
                    "layer": i,
                    "in_dim": layer.layout.n,
                    "out_dim": layer.layout.m,
                    "angles": int(np.asarray(layer.angles).size),
                    "two_qubit": tally.two_qubit,
                    "single_rot": tally.single_rot,
                    "depth_estimate": tally.depth_estimate,
                }
            )
            if widest is None or layer.layout.q > widest.q:
                widest = layer.layout
    report["per_layer"] = per_layer
    spqc = spqc_resource_report(widest, cfg.ensemble.size)
    report["spqc"] = {
        "num_qubits": spqc.num_qubits,
        "independent_qubits": spqc.independent_qubits,
        "two_qubit": spqc.tally.two_qubit,
        "single_rot": spqc.tally.single_rot,
        "depth_estimate": spqc.tally.depth_estimate,
        "independent_depth": spqc.independent_tally.depth_estimate,
        "depth_ratio": spqc.depth_ratio,
    }
    test_meta_path = ws.data_dir("test") / "meta.json"
    n_funcs, n_queries = cfg.data.n_test, 100
    if test_meta_path.exists():
        test_ds = load_dataset(ws.data_dir("test"))
        n_funcs, n_queries = test_ds.n_functions, test_ds.S.shape[1]
    report["classical_cost"] = hybrid_cost(n_funcs, n_queries, cfg.architecture.width)
    return report


# --------------------------------------------------------------- entry point


def _add_common(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group(required=True)
    group.add_argument("--config", help="path to a JSON experiment config")
    group.add_argument(
        "--preset", help=f"built-in config name ({', '.join(preset_names())})"
    )
    sub.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config entry, e.g. --set training.iters=500",
    )
    sub.add_argument("--out-dir", help=f"output directory (default ${OUT_DIR_ENV}/<name>)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="qonnlab",
        description="Quantum-orthogonal DeepONet ensemble laboratory",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="generate and split the task dataset")
    _add_common(p)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="train the ensemble on the train split")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("calibrate", help="compute the conformal quantile")
    _add_common(p)
    p.add_argument("--variant", choices=("exact", "noisy"), default="exact")
    p.add_argument("--hybrid", choices=HYBRIDS, default="quantum")
    p.add_argument("--lam", type=float, default=None, help="noise strength override")
    p.add_argument("--shots", default=None, help="shot count override ('inf' = exact)")
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("evaluate", help="append metric rows for the test split")
    _add_common(p)
    p.add_argument("--variant", choices=("exact", "noisy"), default="exact")
    p.add_argument("--hybrid", choices=HYBRIDS, default="quantum")
    p.add_argument("--lam", type=float, default=None)
    p.add_argument("--shots", default=None)
    p.add_argument(
        "--oracle",
        action="store_true",
        help="cross-check exact rows against the dense full-Hilbert simulator",
    )
    p.add_argument("--oracle-max", type=int, default=8, metavar="N",
                   help="cap on test functions for the oracle pass")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("noise-sweep", help="evaluate over the full noise grid")
    _add_common(p)
    p.add_argument("--hybrid", choices=HYBRIDS, default="quantum")
    p.add_argument(
        "--calibrate-per-cell",
        action="store_true",
        help="recalibrate under each cell's own noise profile (stationary-noise protocol)",
    )
    p.add_argument("--workers", type=int, default=1, help="worker processes for grid cells")
    p.set_defaults(func=cmd_noise_sweep)

    p = sub.add_parser("compare", help="hybrid/shared-circuit comparisons and resources")
    _add_common(p)
    p.add_argument(
        "--what",
        nargs="+",
        choices=("hybrid", "spqc", "resources"),
        default=["hybrid", "spqc", "resources"],
    )
    p.add_argument("--max-cells", type=int, default=0,
                   help="limit the number of noise cells (0 = all)")
    p.set_defaults(func=cmd_compare)

    return parser


def load_cli_config(args) -> ExperimentConfig:
    if args.config:
        raw = config_to_dict(load_config(args.config))
    else:
        raw = builtin_preset(args.preset)
    if args.set:
        raw = apply_overrides(raw, args.set)
    return config_from_dict(raw)


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_cli_config(args)
        ws = Workspace(resolve_out_dir(cfg, args.out_dir))
        ws.root.mkdir(parents=True, exist_ok=True)
        return args.func(cfg, ws, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (EstimationError, SimEstimationError, RuntimeError, ValueError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
