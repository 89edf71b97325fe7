"""Experiment orchestration: distribution-shift and task-change suites.

Records are appended to a JSON-lines file one cell at a time, keyed by cell
identity, so an interrupted suite can be resumed. Reports are computed from
the record file alone.
"""

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .datasets import SplitSpec, generate_synthetic, split_for_retraining
from .exceptions import ConfigError, ResqueError, UnderPoweredError
from .randindex import resque_task_pipeline
from .representation import class_embeddings, resque_dist
from .shifts import KINDS, NoiseSpec, apply_shift, level_params
from .stats import UndefinedCorrelationError, pearson, spearman
from .trainer import (
    ModelSpec,
    TrainConfig,
    extract_embeddings,
    init_params,
    reinit_head,
    train_fixed_epochs,
    train_to_cutoff,
)

log = logging.getLogger(__name__)

MEASURES = ("epochs", "total_grad_norm", "param_change", "wall_clock_s", "flops_estimate")
SCRATCH_SEED_OFFSET = 1000


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class DatasetSpec:
    num_classes: int = 5
    samples_per_class: int = 200
    height: int = 16
    width: int = 16
    channels: int = 1
    seed: int = 1

    def build(self):
        return generate_synthetic(self.num_classes, self.samples_per_class, self.height,
                                  self.width, self.channels, self.seed)


@dataclass(frozen=True)
class TaskSpec:
    """One synthetic task of the task-change roster."""

    name: str
    seed: int
    num_classes: int = 5
    samples_per_class: int = 100
    freq_range: tuple = (2.5, 5.0)
    pattern_seed: int = None

    def build(self, height, width, channels):
        return generate_synthetic(self.num_classes, self.samples_per_class, height, width,
                                  channels, self.seed, self.pattern_seed,
                                  freq_range=tuple(self.freq_range))


@dataclass
class ExperimentConfig:
    seeds: list = field(default_factory=lambda: [0, 1, 2])
    dataset: DatasetSpec = field(default_factory=DatasetSpec)
    split: dict = field(default_factory=dict)
    model: dict = field(default_factory=lambda: {"arch": "convnet"})
    train: TrainConfig = field(default_factory=lambda: TrainConfig(lr=3e-3))
    retrain: TrainConfig = field(
        default_factory=lambda: TrainConfig(lr=3e-4, weight_decay=1e-5))
    noises: list = field(default_factory=list)
    scratch: bool = False
    timing: bool = True
    tasks: list = field(default_factory=list)
    task_mode: str = "measures"
    peak_epochs: int = 20
    cutoffs: list = field(default_factory=list)
    task_train_cutoff: float = None
    init_scheme: str = "labels"
    output: dict = field(default_factory=dict)

    def model_spec(self, num_classes, image_shape=None):
        d = self.dataset
        shape = image_shape or (d.height, d.width, d.channels)
        m = dict(self.model)
        try:
            return ModelSpec(m.pop("arch", "convnet"), shape, num_classes,
                             tuple(m.pop("hidden", (64,))), tuple(m.pop("channels", (8, 16))))
        except ResqueError as exc:
            raise ConfigError(f"model: {exc}") from exc

    def split_spec(self, seed):
        return SplitSpec(seed=seed, **self.split)

    def noise_cells(self):
        """``[(kind, level), ...]`` in config order."""
        return [(n["kind"], int(lv)) for n in self.noises for lv in n["levels"]]

    def retrain_cutoffs(self):
        return list(self.cutoffs) or [self.retrain.cutoff_accuracy]


def _train_config(d, base):
    if d is None:
        return base
    try:
        return replace(base, **d)
    except (TypeError, ResqueError) as exc:
        raise ConfigError(f"invalid train config {d}: {exc}") from exc


def _task_spec(d, defaults):
    try:
        kw = dict(defaults)
        kw.update(d)
        if "freq_range" in kw:
            kw["freq_range"] = tuple(kw["freq_range"])
        return TaskSpec(**kw)
    except TypeError as exc:
        raise ConfigError(f"invalid task entry {d}: {exc}") from exc


def config_from_dict(raw):
    """Build an :class:`ExperimentConfig` from parsed YAML/JSON."""
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    known = {"seeds", "dataset", "split", "model", "train", "retrain", "noises", "scratch",
             "timing", "tasks", "output"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig()
    try:
        if "seeds" in raw:
            cfg.seeds = [int(s) for s in raw["seeds"]]
        if "dataset" in raw:
            cfg.dataset = DatasetSpec(**raw["dataset"])
        cfg.split = dict(raw.get("split", {}))
        cfg.split_spec(0).validate()
    except (TypeError, ValueError, ResqueError) as exc:
        raise ConfigError(str(exc)) from exc
    cfg.model = dict(raw.get("model", cfg.model))
    cfg.train = _train_config(raw.get("train"), cfg.train)
    cfg.retrain = _train_config(raw.get("retrain"), cfg.retrain)
    cfg.scratch = bool(raw.get("scratch", False))
    cfg.timing = bool(raw.get("timing", True))
    cfg.output = dict(raw.get("output", {}))
    if not cfg.seeds:
        raise ConfigError("at least one seed per cell is required")

    for entry in raw.get("noises", []) or []:
        kind = entry.get("kind")
        levels = entry.get("levels", list(range(11)))
        try:
            for lv in levels:
                level_params(kind, lv)
        except ResqueError as exc:
            raise ConfigError(f"noises: {exc}") from exc
        cfg.noises.append({"kind": kind, "levels": [int(lv) for lv in levels]})

    tasks = raw.get("tasks")
    if tasks:
        defaults = tasks.get("defaults", {})
        named = {}
        for entry in tasks.get("definitions", []):
            spec = _task_spec(entry, defaults)
            named[spec.name] = spec

        def resolve(ref):
            if isinstance(ref, str):
                if ref not in named:
                    raise ConfigError(f"unknown task {ref!r}")
                return named[ref]
            spec = _task_spec(ref, defaults)
            named.setdefault(spec.name, spec)
            return spec

        pairs = [(resolve(p["original"]), resolve(p["target"])) for p in tasks.get("roster", [])]
        if "target" in tasks:
            target = resolve(tasks["target"])
            pairs += [(resolve(o), target) for o in tasks.get("originals", [])]
        if not pairs:
            raise ConfigError("tasks section defines no (original, target) pairs")
        cfg.tasks = pairs
        cfg.task_mode = tasks.get("mode", "measures")
        if cfg.task_mode not in ("measures", "peak"):
            raise ConfigError(f"unknown task mode {cfg.task_mode!r}")
        cfg.peak_epochs = int(tasks.get("peak_epochs", 20))
        cfg.cutoffs = [float(c) for c in tasks.get("cutoffs", [])]
        cfg.task_train_cutoff = tasks.get("train_cutoff")
        cfg.init_scheme = tasks.get("init_scheme", "labels")
    return cfg


def load_config(path):
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(raw or {})


# --------------------------------------------------------------------------
# records


@dataclass
class RunRecord:
    suite: str
    cell: dict
    index: float
    index_name: str
    variant: str = "retrain"
    measures: dict = None
    status: str = "ok"
    error: str = None
    extra: dict = field(default_factory=dict)

    @property
    def key(self):
        return cell_key(self.suite, self.cell, self.variant)

    def to_json(self):
        d = {"suite": self.suite, "key": self.key, "cell": self.cell, "variant": self.variant,
             "index_name": self.index_name, "index": self.index, "measures": self.measures,
             "status": self.status, "error": self.error}
        if self.extra:
            d["extra"] = self.extra
        return json.dumps(d, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        return cls(d["suite"], d["cell"], d["index"], d["index_name"], d.get("variant", "retrain"),
                   d.get("measures"), d.get("status", "ok"), d.get("error"), d.get("extra", {}))


def cell_key(suite, cell, variant):
    parts = [suite] + [f"{k}={cell[k]}" for k in sorted(cell)] + [variant]
    return "/".join(str(p) for p in parts)


def read_records(path):
    path = Path(path)
    if not path.exists():
        return []
    out = []
    for lineno, line in enumerate(path.read_text().splitlines(), 1):
        if not line.strip():
            continue
        try:
            out.append(RunRecord.from_dict(json.loads(line)))
        except (json.JSONDecodeError, KeyError) as exc:
            raise ConfigError(f"{path}:{lineno}: malformed record ({exc})") from exc
    return out


def completed_keys(path):
    return {r.key for r in read_records(path) if r.status == "ok"}


def _measures_dict(measures, timing):
    d = measures.to_dict()
    if not timing:
        d["wall_clock_s"] = 0.0
    return d


def _failure(suite, cell, index, index_name, variant, exc):
    log.warning("cell %s failed: %s", cell, exc)
    return RunRecord(suite, cell, index, index_name, variant, None, "failed",
                     f"{type(exc).__name__}: {exc}")


# --------------------------------------------------------------------------
# distribution-shift suite


def _noise_seed(seed, kind, level):
    return int(np.random.SeedSequence([seed, KINDS.index(kind), level]).generate_state(1)[0])


def _dist_cells_for_seed(cfg, seed, skip):
    """All distribution-suite records for one run seed."""
    wanted = []
    for kind, level in cfg.noise_cells():
        cell = {"kind": kind, "level": level, "seed": seed}
        variants = ["retrain"] + (["scratch"] if cfg.scratch else [])
        todo = [v for v in variants if cell_key("dist", cell, v) not in skip]
        if todo:
            wanted.append((kind, level, cell, todo))
    if not wanted:
        return []

    ds = cfg.dataset.build()
    spec = cfg.model_spec(ds.num_classes, ds.image_shape)
    train_cfg = replace(cfg.train, seed=seed)
    retrain_cfg = replace(cfg.retrain, seed=seed)
    records = []
    try:
        original, shifted_base = split_for_retraining(ds, cfg.split_spec(seed))
        params, _ = train_to_cutoff(init_params(spec, seed), original, train_cfg)
        emb = extract_embeddings(params, original)
        reference = class_embeddings(emb.representations, emb.labels, ds.num_classes)
    except ResqueError as exc:
        return [_failure("dist", cell, None, "resque_dist", v, exc)
                for _, _, cell, todo in wanted for v in todo]

    for kind, level, cell, todo in wanted:
        try:
            shifted = apply_shift(shifted_base, NoiseSpec(kind, level, _noise_seed(seed, kind, level)))
            emb = extract_embeddings(params, shifted)
            index = resque_dist(reference,
                                class_embeddings(emb.representations, emb.labels, ds.num_classes))
        except ResqueError as exc:
            records += [_failure("dist", cell, None, "resque_dist", v, exc) for v in todo]
            continue
        for variant in todo:
            start = params if variant == "retrain" else init_params(spec, seed + SCRATCH_SEED_OFFSET)
            try:
                _, measures = train_to_cutoff(start, shifted, retrain_cfg)
            except ResqueError as exc:
                records.append(_failure("dist", cell, index, "resque_dist", variant, exc))
                continue
            records.append(RunRecord("dist", cell, index, "resque_dist", variant,
                                     _measures_dict(measures, cfg.timing)))
    return records


def iter_distribution_suite(cfg, skip=frozenset(), parallel=1):
    """Yield distribution-suite records, skipping cell keys in ``skip``."""
    if not cfg.noises:
        raise ConfigError("config has no noises section")
    yield from _map_seeds(_dist_cells_for_seed, cfg, skip, parallel)


# --------------------------------------------------------------------------
# task-change suite


def _task_cells_for_seed(cfg, seed, skip):
    d = cfg.dataset
    build = {}

    def dataset(task):
        if task not in build:
            build[task] = task.build(d.height, d.width, d.channels)
        return build[task]

    train_cfg = replace(cfg.train, seed=seed)
    if cfg.task_train_cutoff is not None:
        train_cfg = replace(train_cfg, cutoff_accuracy=float(cfg.task_train_cutoff))
    retrain_cfg = replace(cfg.retrain, seed=seed)
    originals = {}
    records = []
    for original, target in cfg.tasks:
        if cfg.task_mode == "peak":
            cells = [{"original": original.name, "target": target.name, "seed": seed,
                      "mode": "peak", "epochs": cfg.peak_epochs}]
        else:
            cells = [{"original": original.name, "target": target.name, "seed": seed,
                      "mode": "measures", "cutoff": c} for c in cfg.retrain_cutoffs()]
        variants = ["retrain"] + (["scratch"] if cfg.scratch else [])
        todo = [(c, v) for c in cells for v in variants if cell_key("task", c, v) not in skip]
        if not todo:
            continue
        try:
            if original not in originals:
                ods = dataset(original)
                spec = cfg.model_spec(ods.num_classes, ods.image_shape)
                originals[original], _ = train_to_cutoff(init_params(spec, seed), ods, train_cfg)
            params = originals[original]
            tds = dataset(target)
            result = resque_task_pipeline(params, tds, retrain_cfg, cfg.init_scheme)
        except ResqueError as exc:
            records += [_failure("task", c, None, "resque_task", v, exc) for c, v in todo]
            continue
        for cell, variant in todo:
            if variant == "retrain":
                start = reinit_head(params, tds.num_classes, seed)
            else:
                start = init_params(params.spec.with_classes(tds.num_classes),
                                    seed + SCRATCH_SEED_OFFSET)
            try:
                if cell["mode"] == "peak":
                    _, measures = train_fixed_epochs(start, tds, retrain_cfg, cfg.peak_epochs)
                else:
                    _, measures = train_to_cutoff(
                        start, tds, replace(retrain_cfg, cutoff_accuracy=cell["cutoff"]))
            except ResqueError as exc:
                records.append(_failure("task", cell, result.index, "resque_task", variant, exc))
                continue
            records.append(RunRecord("task", cell, result.index, "resque_task", variant,
                                     _measures_dict(measures, cfg.timing),
                                     extra={"init_scheme": result.init_scheme,
                                            "epochs_used": result.epochs_used}))
    return records


def iter_task_suite(cfg, skip=frozenset(), parallel=1):
    if not cfg.tasks:
        raise ConfigError("config has no tasks section")
    # measures mode compares originals against a target; peak mode compares
    # targets reached from one original
    side = 1 if cfg.task_mode == "peak" else 0
    if len({pair[side] for pair in cfg.tasks}) < 3:
        what = "target" if side else "original"
        raise ConfigError(f"task roster needs at least 3 distinct {what} tasks")
    yield from _map_seeds(_task_cells_for_seed, cfg, skip, parallel)


def _map_seeds(fn, cfg, skip, parallel):
    if parallel <= 1:
        for seed in cfg.seeds:
            yield from fn(cfg, seed, skip)
        return
    with ProcessPoolExecutor(max_workers=parallel) as pool:
        futures = [pool.submit(fn, cfg, seed, skip) for seed in cfg.seeds]
        for fut in futures:
            yield from fut.result()


def _run(iter_fn, cfg, records_path, parallel):
    skip = completed_keys(records_path) if records_path else frozenset()
    new = []
    fh = open(records_path, "a") if records_path else None
    try:
        for rec in iter_fn(cfg, skip, parallel):
            if fh:
                fh.write(rec.to_json() + "\n")
                fh.flush()
            new.append(rec)
    finally:
        if fh:
            fh.close()
    return new


def run_distribution_suite(cfg, records_path=None, parallel=1):
    """Run (or resume) the distribution suite; returns the newly written records."""
    return _run(iter_distribution_suite, cfg, records_path, parallel)


def run_task_suite(cfg, records_path=None, parallel=1):
    return _run(iter_task_suite, cfg, records_path, parallel)


# --------------------------------------------------------------------------
# reporting


def _latest(records):
    by_key = {}
    for r in records:
        by_key[r.key] = r
    return list(by_key.values())


def _group_mean(records, group_fields, measure_names, raw=False):
    """Average index and measures over seeds within each group."""
    groups = {}
    for r in records:
        gid = tuple(r.cell[f] for f in group_fields)
        if raw:
            gid = gid + (r.cell.get("seed"),)
        groups.setdefault(gid, []).append(r)
    rows = []
    for gid, recs in groups.items():
        row = dict(zip(group_fields, gid))
        if raw:
            row["seed"] = gid[-1]
        row["n_seeds"] = len(recs)
        row["index"] = float(np.mean([r.index for r in recs]))
        for m in measure_names:
            row[m] = float(np.mean([r.measures[m] for r in recs]))
        rows.append(row)
    return rows


def correlation_table(rows, measure_names):
    table = []
    x = [r["index"] for r in rows]
    for m in measure_names:
        y = [r[m] for r in rows]
        row = {"measure": m, "n": len(rows)}
        for name, fn in (("pearson", pearson), ("spearman", spearman)):
            try:
                res = fn(x, y)
                row[f"{name}_r"], row[f"{name}_p"] = res.coefficient, res.p_value
            except UndefinedCorrelationError:
                row[f"{name}_r"], row[f"{name}_p"] = math.nan, math.nan
        table.append(row)
    return table


def _write_csv(path, rows):
    if not rows:
        return
    fields = list(rows[0])
    for r in rows[1:]:
        fields += [k for k in r if k not in fields]
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        w.writerows(rows)


def _require(points, what, missing):
    if len(points) < 3:
        raise UnderPoweredError(
            f"{what}: need >= 3 completed cells for a correlation, have {len(points)}"
            + (f"; failed or missing: {', '.join(missing)}" if missing else ""), missing)


def report(records_path, mode="dist", out_dir=None, raw=False):
    """Correlation tables and plot series from a record file.

    Returns ``{"correlations": [...], "series": [...], ...}``; with ``out_dir``
    the same tables are written as CSV files.
    """
    records = _latest(read_records(records_path))
    records = [r for r in records if r.suite == mode]
    failed = sorted(r.key for r in records if r.status != "ok")
    ok = [r for r in records if r.status == "ok" and r.measures is not None]
    result = {}
    if mode == "dist":
        retrain = [r for r in ok if r.variant == "retrain"]
        series = sorted(_group_mean(retrain, ("kind", "level"), MEASURES, raw),
                        key=lambda r: (r["kind"], r["level"], r.get("seed", 0)))
        _require(series, "distribution suite", failed)
        result["series"] = series
        result["correlations"] = correlation_table(series, MEASURES)
        scratch = [r for r in ok if r.variant == "scratch"]
        if scratch:
            comp = []
            for variant, recs in (("retrain", retrain), ("scratch", scratch)):
                for row in _group_mean(recs, ("kind", "level"), MEASURES):
                    row["variant"] = variant
                    comp.append(row)
            result["scratch_vs_retrain"] = sorted(
                comp, key=lambda r: (r["kind"], r["level"], r["variant"]))
    elif mode == "task":
        measures_recs = [r for r in ok if r.cell.get("mode") == "measures" and r.variant == "retrain"]
        peak_recs = [r for r in ok if r.cell.get("mode") == "peak" and r.variant == "retrain"]
        correlations, series = [], []
        groups = {}
        for r in measures_recs:
            groups.setdefault((r.cell["target"], r.cell["cutoff"]), []).append(r)
        for (target, cutoff), recs in sorted(groups.items()):
            rows = _group_mean(recs, ("original", "target", "cutoff"), MEASURES, raw)
            _require(rows, f"target {target} at cutoff {cutoff}", failed)
            series += rows
            for row in correlation_table(rows, MEASURES):
                correlations.append({"target": target, "cutoff": cutoff, **row})
        pgroups = {}
        for r in peak_recs:
            pgroups.setdefault(r.cell["original"], []).append(r)
        for original, recs in sorted(pgroups.items()):
            for r in recs:
                r.measures = dict(r.measures, peak_accuracy=max(r.measures["accuracy_trace"]))
            rows = _group_mean(recs, ("original", "target"), ("peak_accuracy", "epochs"), raw)
            _require(rows, f"peak mode for original {original}", failed)
            series += rows
            for row in correlation_table(rows, ("peak_accuracy",)):
                correlations.append({"original": original, **row})
        if not correlations:
            _require([], "task suite", failed)
        result["series"] = series
        result["correlations"] = correlations
        scratch = [r for r in ok if r.variant == "scratch" and r.cell.get("mode") == "measures"]
        if scratch:
            comp = []
            for variant, recs in (("retrain", measures_recs), ("scratch", scratch)):
                for row in _group_mean(recs, ("original", "target", "cutoff"), MEASURES):
                    row["variant"] = variant
                    comp.append(row)
            result["scratch_vs_retrain"] = comp
    else:
        raise ConfigError(f"unknown report mode {mode!r}")

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_csv(out / f"{mode}_correlations.csv", result["correlations"])
        _write_csv(out / f"{mode}_series.csv", result["series"])
        if "scratch_vs_retrain" in result:
            _write_csv(out / f"{mode}_scratch_vs_retrain.csv", result["scratch_vs_retrain"])
    return result
