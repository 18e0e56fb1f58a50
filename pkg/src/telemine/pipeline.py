"""Stage functions behind the command-line tool.

Every stage reads its inputs from and writes its outputs to the run
directory, so stages can be rerun independently. Layout::

    <out>/config.json                        effective configuration
    <out>/raw/                               synthetic raw logs (synth stage)
    <out>/aligned/<log>.csv, manifest.json   prepare
    <out>/features/<protocol>/<fold>/        featurize (fold = "fixed" or "seed<k>")
    <out>/models/<protocol>/seed<k>/         train
    <out>/reports/<protocol>/seed<k>/        evaluate (+ scores/ and pr/ CSVs)
    <out>/reports/aggregate.csv
    <out>/ablation/...                       ablate
    <out>/importance/...                     importance
"""
from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd

from . import gbdt
from .baselines import (LinearSgdDetector, PcaDetector, minmax_normalize, pca_fit, pca_score,
                        sgd_fit, sgd_score)
from .config import ExperimentConfig
from .core import DatasetManifest, LogEntry, read_aligned_csv, read_raw_csv, write_aligned_csv
from .descriptors import ABLATIONS, FeatureMatrix, featurize
from .errors import ConfigError, DataError, MissingArtifact
from .ingest import align_dataset, apply_standardizer, fit_standardizer
from .metrics import (aggregate_seeds, auprc, auroc, best_f1, count_events, event_scores,
                      family_breakdown, pr_curve)
from .splits import make_split
from .synth import channel_family_map, generate, write_dataset
from .windowing import make_window_set

log = logging.getLogger(__name__)

THRESHOLD_NOTE = "best-F1 threshold chosen on test labels: diagnostic upper bound, not deployable"


def _dump_json(doc, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _fold(protocol: str, seed: int) -> str:
    # only leave-log-out depends on the seed; the chronological folds are shared
    return f"seed{seed}" if protocol == "leave_log_out" else "fixed"


class RunLayout:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.root = cfg.out_dir

    @property
    def aligned(self) -> Path:
        return self.root / "aligned"

    def features(self, protocol, seed) -> Path:
        return self.root / "features" / protocol / _fold(protocol, seed)

    def models(self, protocol, seed) -> Path:
        return self.root / "models" / protocol / f"seed{seed}"

    def reports(self, protocol, seed) -> Path:
        return self.root / "reports" / protocol / f"seed{seed}"

    def ablation(self, protocol, seed) -> Path:
        return self.root / "ablation" / protocol / f"seed{seed}"

    def freeze_config(self) -> None:
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "config.json").write_text(self.cfg.dumps(), encoding="utf-8")


# synth / prepare

def run_synth(cfg: ExperimentConfig) -> list:
    if cfg.synth is None:
        raise ConfigError("a [synth] section is required for the synth command", "synth")
    RunLayout(cfg).freeze_config()
    logs = generate(cfg.synth)
    paths = write_dataset(logs, cfg.raw_dir)
    log.info("wrote %d synthetic logs to %s", len(paths), cfg.raw_dir)
    return paths


def run_prepare(cfg: ExperimentConfig) -> DatasetManifest:
    lay = RunLayout(cfg)
    lay.freeze_config()
    files = sorted(p for p in Path(cfg.raw_dir).glob("*.csv"))
    if not files:
        raise DataError(f"no raw CSV logs in {cfg.raw_dir}")
    raws, paths, failed = [], [], []
    for p in files:
        try:
            raws.append(read_raw_csv(p))
            paths.append(str(p))
        except (DataError, ValueError) as exc:
            failed.append(LogEntry(p.stem, str(p), 0, False, f"unparseable: {exc}"))
    spec = cfg.window.spec()
    manifest, aligned = align_dataset(raws, cfg.data.rate_hz, cfg.data.coverage,
                                      min_samples=spec.span, paths=paths)
    manifest.entries = sorted(manifest.entries + failed, key=lambda e: e.log_id)
    lay.aligned.mkdir(parents=True, exist_ok=True)
    for old in lay.aligned.glob("*.csv"):
        old.unlink()
    for g in aligned:
        write_aligned_csv(g, lay.aligned / f"{g.log_id}.csv")
    (lay.aligned / "manifest.json").write_text(manifest.to_json(), encoding="utf-8")
    log.info("prepared %d of %d logs, %d channels", len(aligned), len(manifest.entries),
             len(manifest.channels))
    return manifest


def load_aligned(cfg: ExperimentConfig) -> list:
    lay = RunLayout(cfg)
    path = lay.aligned / "manifest.json"
    if not path.exists():
        raise MissingArtifact(f"dataset manifest not found at {path}; run prepare first")
    manifest = DatasetManifest.from_json(path.read_text(encoding="utf-8"))
    logs = []
    for e in manifest.usable:
        path = lay.aligned / f"{e.log_id}.csv"
        if not path.exists():
            raise MissingArtifact(f"aligned log missing: {path}")
        logs.append(read_aligned_csv(path, e.log_id))
    if not logs:
        raise DataError("manifest lists no usable logs")
    return logs


# featurize

def training_sample_blocks(ws, partition) -> list:
    """Samples covered by training windows, one block per log in log order.

    A sample shared by several training windows is counted once.
    """
    L = ws.spec.length
    blocks = []
    train = partition == "train"
    for lid in sorted(ws.logs):
        sel = train & (ws.log_ids == lid)
        if not sel.any():
            continue
        data = np.asarray(ws.logs[lid].data)
        covered = np.zeros(len(data), dtype=bool)
        for a in ws.starts[sel]:
            covered[a:a + L] = True
        blocks.append(data[covered])
    return blocks


def featurize_fold(cfg: ExperimentConfig, logs: list, protocol: str, seed: int):
    """Split, fit the standardizer on training-window samples, featurize every window."""
    spec = cfg.window.spec()
    ws = make_window_set(logs, spec)
    split = make_split(ws, protocol, seed, tuple(cfg.split.fractions), cfg.split.embargo)
    blocks = training_sample_blocks(ws, split.partition)
    if not blocks:
        raise DataError(f"{protocol}: training partition is empty")
    stats = fit_standardizer(blocks, ws.channels)
    std_logs = {lid: apply_standardizer(g, stats) for lid, g in ws.logs.items()}
    fm = featurize(ws.with_logs(std_logs), cfg.features.groups)
    index = pd.DataFrame({
        "log_id": ws.log_ids.astype(str), "start": ws.starts, "label": ws.labels,
        "family": [f or "" for f in ws.families], "partition": split.partition.astype(str),
    })
    return fm, index, split, stats


def run_featurize(cfg: ExperimentConfig) -> list:
    lay = RunLayout(cfg)
    lay.freeze_config()
    logs = load_aligned(cfg)
    done = []
    for protocol in cfg.run.protocols:
        for seed in cfg.run.seeds:
            out = lay.features(protocol, seed)
            if out in done:
                continue
            fm, index, split, stats = featurize_fold(cfg, logs, protocol, seed)
            out.mkdir(parents=True, exist_ok=True)
            fm.save(out / "features")
            index.to_csv(out / "windows.csv", index=False, lineterminator="\n")
            _dump_json({"protocol": protocol, "seed": split.seed, "embargo": split.embargo,
                        "fractions": list(split.fractions), "counts": split.counts(),
                        "positives": {p: int(index.label[index.partition == p].sum())
                                      for p in ("train", "valid", "test")},
                        "standardizer": stats.to_dict()}, out / "split.json")
            log.info("%s/%s: %d windows x %d features", protocol, out.name, *fm.shape)
            done.append(out)
    return done


class Fold:
    """Saved features of one (protocol, fold) plus the window index."""

    def __init__(self, path: Path):
        if not (path / "features.npz").exists():
            raise MissingArtifact(f"features not found in {path}; run featurize first")
        self.path = path
        self.features = FeatureMatrix.load(path / "features")
        self.index = pd.read_csv(path / "windows.csv", keep_default_na=False,
                                 dtype={"log_id": str, "family": str, "partition": str})
        self.partition = self.index["partition"].to_numpy()
        self.labels = self.index["label"].to_numpy(np.int8)

    def rows(self, part: str) -> np.ndarray:
        return np.flatnonzero(self.partition == part)

    def xy(self, groups, part: str):
        fm = self.features.select_groups(groups)
        idx = self.rows(part)
        return fm.values[idx], self.labels[idx], fm.columns


# train / score

def _method_groups(cfg: ExperimentConfig, method: str):
    return ABLATIONS["moments_only"] if method == "moments_only" else tuple(cfg.features.groups)


def fit_gbdt(fold: Fold, groups, cfg: ExperimentConfig, seed: int) -> gbdt.BoostedModel:
    Xtr, ytr, cols = fold.xy(groups, "train")
    Xva, yva, _ = fold.xy(groups, "valid")
    bcfg = dataclasses.replace(cfg.gbdt, seed=seed)
    return gbdt.fit(Xtr, ytr, Xva, yva, bcfg, feature_names=cols, record_loss=False)


def fit_method(fold: Fold, method: str, cfg: ExperimentConfig, seed: int):
    groups = _method_groups(cfg, method)
    if method in ("tsboost", "moments_only"):
        return fit_gbdt(fold, groups, cfg, seed)
    Xtr, ytr, _ = fold.xy(groups, "train")
    if method == "pca":
        return pca_fit(Xtr, cfg.pca.variance_target)
    Xva, yva, _ = fold.xy(groups, "valid")
    return sgd_fit(Xtr, ytr, Xva, yva, dataclasses.replace(cfg.sgd, seed=seed))


def load_method(path: Path, method: str):
    if method in ("tsboost", "moments_only"):
        return gbdt.BoostedModel.load(path)
    if method == "pca":
        return PcaDetector.load(path)
    return LinearSgdDetector.load(path)


def score_method(model, method: str, X) -> np.ndarray:
    if method in ("tsboost", "moments_only"):
        return gbdt.predict_scores(model, X)
    if method == "pca":
        return minmax_normalize(pca_score(model, X))
    return sgd_score(model, X)


def run_train(cfg: ExperimentConfig) -> list:
    lay = RunLayout(cfg)
    lay.freeze_config()
    written = []
    for protocol in cfg.run.protocols:
        for seed in cfg.run.seeds:
            fold = Fold(lay.features(protocol, seed))
            out = lay.models(protocol, seed)
            out.mkdir(parents=True, exist_ok=True)
            for method in cfg.run.methods:
                model = fit_method(fold, method, cfg, seed)
                model.save(out / f"{method}.json")
                written.append(out / f"{method}.json")
                log.info("trained %s %s seed %d", method, protocol, seed)
    return written


# evaluate

def evaluate_scores(scores, index: pd.DataFrame, stride: int) -> dict:
    """Window and event metrics for one test partition."""
    y = index["label"].to_numpy(np.int8)
    ids = index["log_id"].to_numpy(object)
    ords = index["start"].to_numpy(np.int64) // stride
    f1, thr = best_f1(scores, y)
    ev = event_scores(y, scores >= thr, ids, ords)
    return {
        "n_windows": int(len(y)),
        "positive_windows": int(y.sum()),
        "events": count_events(y, ids, ords),
        "auroc": auroc(scores, y),
        "auprc": auprc(scores, y),
        "best_f1": f1,
        "best_threshold": thr,
        "threshold_note": THRESHOLD_NOTE,
        "event_f1": ev.f1,
        "event_precision": ev.precision,
        "event_recall": ev.recall,
        "predicted_events": ev.n_predicted,
        "event_degenerate": ev.degenerate,
        "families": family_breakdown(scores, y, [f or None for f in index["family"]],
                                     ids, ords, thr),
    }


def _write_scores(path: Path, index: pd.DataFrame, scores) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = index[["log_id", "start", "label", "family"]].copy()
    frame["score"] = scores
    frame.to_csv(path, index=False, lineterminator="\n", float_format="%.17g")


def _write_pr(path: Path, scores, labels) -> None:
    recall, precision, thr = pr_curve(scores, labels)
    path.parent.mkdir(parents=True, exist_ok=True)
    pd.DataFrame({"recall": recall, "precision": precision, "threshold": thr}).to_csv(
        path, index=False, lineterminator="\n", float_format="%.17g")


def evaluate_model(fold: Fold, model, method: str, groups, stride: int):
    fm = fold.features.select_groups(groups)
    idx = fold.rows("test")
    if len(idx) == 0:
        raise DataError(f"{fold.path}: test partition is empty")
    scores = score_method(model, method, fm.values[idx])
    index = fold.index.iloc[idx].reset_index(drop=True)
    return evaluate_scores(scores, index, stride), scores, index


def _report(metrics: dict, method: str, protocol: str, seed: int, model) -> dict:
    doc = {"method": method, "protocol": protocol, "seed": seed, **metrics}
    if isinstance(model, gbdt.BoostedModel):
        doc["best_iteration"] = model.best_iteration
    return doc


def run_evaluate(cfg: ExperimentConfig) -> list:
    lay = RunLayout(cfg)
    lay.freeze_config()
    stride = cfg.window.stride
    written = []
    for protocol in cfg.run.protocols:
        for seed in cfg.run.seeds:
            fold = Fold(lay.features(protocol, seed))
            rep_dir = lay.reports(protocol, seed)
            for method in cfg.run.methods:
                model = load_method(lay.models(protocol, seed) / f"{method}.json", method)
                metrics, scores, index = evaluate_model(fold, model, method,
                                                        _method_groups(cfg, method), stride)
                _dump_json(_report(metrics, method, protocol, seed, model),
                           rep_dir / f"{method}.json")
                _write_scores(rep_dir / "scores" / f"{method}.csv", index, scores)
                _write_pr(rep_dir / "pr" / f"{method}.csv", scores, index["label"].to_numpy())
                written.append(rep_dir / f"{method}.json")
    write_aggregate(lay.root / "reports", lay.root / "reports" / "aggregate.csv", "method")
    return written


AGG_METRICS = ("auroc", "auprc", "best_f1", "event_f1")


def write_aggregate(report_root: Path, out: Path, key: str) -> pd.DataFrame:
    """Mean and sample std over seeds of every saved report under ``report_root``."""
    rows = []
    for p in sorted(report_root.glob("*/seed*/*.json")):
        doc = json.loads(p.read_text(encoding="utf-8"))
        rows.append({key: doc[key], "protocol": doc["protocol"], "seed": doc["seed"],
                     **{m: doc[m] for m in AGG_METRICS}})
    if not rows:
        raise MissingArtifact(f"no reports under {report_root}")
    frame = pd.DataFrame(rows)
    table = []
    for (name, protocol), grp in frame.groupby([key, "protocol"], sort=True):
        row = {key: name, "protocol": protocol, "n_seeds": len(grp)}
        for m in AGG_METRICS:
            vals = grp.sort_values("seed")[m].to_numpy(float)
            if len(vals) >= 2:
                row[f"{m}_mean"], row[f"{m}_std"] = aggregate_seeds(vals)
            else:
                row[f"{m}_mean"], row[f"{m}_std"] = float(vals[0]), float("nan")
        table.append(row)
    result = pd.DataFrame(table)
    result.to_csv(out, index=False, lineterminator="\n", float_format="%.17g", na_rep="")
    return result


# ablation

def run_ablate(cfg: ExperimentConfig) -> pd.DataFrame:
    """Retrain the booster on each descriptor-group subset under the same split."""
    lay = RunLayout(cfg)
    lay.freeze_config()
    for protocol in cfg.run.protocols:
        for seed in cfg.run.seeds:
            fold = Fold(lay.features(protocol, seed))
            out = lay.ablation(protocol, seed)
            for variant in cfg.ablation.variants:
                groups = ABLATIONS[variant]
                missing = set(groups) - set(fold.features.groups)
                if missing:
                    raise ConfigError(f"variant {variant!r} needs groups {sorted(missing)} "
                                      "that were not featurized", "features.groups")
                model = fit_gbdt(fold, groups, cfg, seed)
                (out / "models").mkdir(parents=True, exist_ok=True)
                model.save(out / "models" / f"{variant}.json")
                metrics, _, _ = evaluate_model(fold, model, "tsboost", groups, cfg.window.stride)
                doc = _report(metrics, "tsboost", protocol, seed, model)
                doc["variant"] = variant
                doc["groups"] = list(groups)
                _dump_json(doc, out / f"{variant}.json")
                log.info("ablation %s %s seed %d: AUPRC %.4f", variant, protocol, seed,
                         metrics["auprc"])
    root = lay.root / "ablation"
    table = write_aggregate(root, root / "ablation.csv", "variant")
    return table


# importance

def load_family_map(cfg: ExperimentConfig) -> dict:
    path = cfg.importance.family_map
    if path is None:
        if cfg.synth is not None:
            return channel_family_map(cfg.synth)
        raise ConfigError("a channel -> family map file is required", "importance.family_map")
    path = Path(path)
    if not path.exists():
        raise MissingArtifact(f"family map not found at {path}")
    if path.suffix == ".json":
        doc = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ConfigError("family map JSON must be an object", "importance.family_map")
        return {str(k): str(v) for k, v in doc.items()}
    frame = pd.read_csv(path, dtype=str)
    if list(frame.columns[:2]) != ["channel", "family"]:
        raise ConfigError("family map CSV needs columns channel,family", "importance.family_map")
    return dict(zip(frame["channel"], frame["family"]))


def run_importance(cfg: ExperimentConfig, method: str = "tsboost") -> dict:
    """Gain share per telemetry family, averaged over seeds, then over protocols."""
    lay = RunLayout(cfg)
    lay.freeze_config()
    fam_of = load_family_map(cfg)
    per_protocol = {}
    for protocol in cfg.run.protocols:
        runs = []
        for seed in cfg.run.seeds:
            model = gbdt.BoostedModel.load(lay.models(protocol, seed) / f"{method}.json")
            grouping = {c: fam_of.get(c.split("__")[0], "other") for c in model.feature_names}
            runs.append(gbdt.feature_gain_shares(model, grouping))
        per_protocol[protocol] = gbdt.average_shares(runs)
    overall = gbdt.average_shares(list(per_protocol.values()))
    out = lay.root / "importance"
    _dump_json({"method": method, "seeds": list(cfg.run.seeds), "per_protocol": per_protocol,
                "mean": overall}, out / "importance.json")
    rows = [{"family": f, **{p: per_protocol[p].get(f, 0.0) for p in per_protocol},
             "mean": overall[f]} for f in sorted(overall, key=lambda f: (-overall[f], f))]
    pd.DataFrame(rows).to_csv(out / "importance.csv", index=False, lineterminator="\n",
                              float_format="%.17g")
    return overall


STAGES = ("prepare", "featurize", "train", "evaluate", "ablate", "importance")


def run_all(cfg: ExperimentConfig, with_synth: Optional[bool] = None) -> None:
    if with_synth is None:
        with_synth = cfg.synth is not None
    if with_synth:
        run_synth(cfg)
    run_prepare(cfg)
    run_featurize(cfg)
    run_train(cfg)
    run_evaluate(cfg)
    if cfg.ablation.variants:
        run_ablate(cfg)
    if "tsboost" in cfg.run.methods:
        run_importance(cfg)
