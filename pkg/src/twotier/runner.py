"""Run orchestration: configs in, artifact directories out.

Every run owns one directory (named ``run-<timestamp>-seed<seed>`` unless
the caller picks a path) holding:

* ``resolved_config.json``: the exact, fully defaulted config; re-running
  it reproduces the run byte for byte,
* ``metrics.csv``: one row per (task, epoch),
* ``accuracy_matrix.csv``: T x T with task-id header row and column;
  never-evaluated cells stay empty,
* ``cost_report.json``: the declared cost model's output,
* ``log.txt``: the run log (the only artifact allowed timestamps),
* figures (``training_curves.png``, ``accuracy_matrix.png``,
  ``cost_report.png``) and ``emulation.json`` alongside.

Failures leave whatever was already written in place and add a ``FAILED``
marker containing the error, so partial output is never mistaken for a
completed run.
"""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import plots
from .compound import (
    CompoundModel,
    SequenceResult,
    build_and_fit_lower,
    forgetting_metrics,
    ridge_accuracy,
    train_sequence,
)
from .config import ExperimentConfig, resolved_config_json
from .costs import build_cost_report
from .dataio import load_csv, save_csv
from .errors import StateError
from .fixedpoint import FixedPointFormat, emulate_direct_solve
from .lower import NormalEqAccumulator, apply_features, one_hot
from .tasks import TaskStream, gen_task_stream
from .upper import EpochRecord

METRICS_NAME = "metrics.csv"
ACCURACY_NAME = "accuracy_matrix.csv"
COST_NAME = "cost_report.json"
CONFIG_NAME = "resolved_config.json"
LOG_NAME = "log.txt"
FAILURE_MARKER = "FAILED"


@dataclass(frozen=True)
class RunArtifacts:
    run_dir: Path

    @property
    def metrics_csv(self) -> Path:
        return self.run_dir / METRICS_NAME

    @property
    def accuracy_csv(self) -> Path:
        return self.run_dir / ACCURACY_NAME

    @property
    def cost_json(self) -> Path:
        return self.run_dir / COST_NAME

    @property
    def config_json(self) -> Path:
        return self.run_dir / CONFIG_NAME

    @property
    def log_path(self) -> Path:
        return self.run_dir / LOG_NAME


def make_run_dir(out: str | Path | None, seed: int, base: str | Path = ".") -> Path:
    """Caller-chosen directory, or a fresh timestamp+seed name under base."""
    if out is not None:
        run_dir = Path(out)
    else:
        stamp = time.strftime("%Y%m%d-%H%M%S")
        run_dir = Path(base) / f"run-{stamp}-seed{seed}"
    run_dir.mkdir(parents=True, exist_ok=True)
    return run_dir


def _make_logger(run_dir: Path, quiet: bool) -> logging.Logger:
    logger = logging.getLogger(f"twotier.run.{run_dir}")
    logger.setLevel(logging.INFO)
    logger.handlers.clear()
    logger.propagate = False
    file_handler = logging.FileHandler(run_dir / LOG_NAME, mode="w")
    file_handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    logger.addHandler(file_handler)
    if not quiet:
        console = logging.StreamHandler()
        console.setFormatter(logging.Formatter("%(message)s"))
        logger.addHandler(console)
    return logger


def _close_logger(logger: logging.Logger) -> None:
    for handler in list(logger.handlers):
        handler.close()
        logger.removeHandler(handler)


def _fmt(value: float) -> str:
    """Stable float formatting for delimited artifacts (shortest round trip)."""
    if isinstance(value, float) and math.isnan(value):
        return ""
    return repr(float(value))


def write_metrics_csv(records: list[EpochRecord], path: Path) -> None:
    lines = ["task,epoch,train_loss,ewc_penalty,test_acc"]
    for r in records:
        lines.append(f"{r.task},{r.epoch},{_fmt(r.train_loss)},{_fmt(r.ewc_penalty)},{_fmt(r.test_acc)}")
    path.write_text("\n".join(lines) + "\n")


def write_accuracy_csv(matrix: np.ndarray, path: Path) -> None:
    t = matrix.shape[0]
    lines = ["task," + ",".join(str(i) for i in range(t))]
    for i in range(t):
        cells = [_fmt(matrix[i, j]) if not np.isnan(matrix[i, j]) else "" for j in range(t)]
        lines.append(f"{i}," + ",".join(cells))
    path.write_text("\n".join(lines) + "\n")


def build_stream(cfg: ExperimentConfig, run_dir: Path | None = None) -> TaskStream:
    """Task stream from the configured source (synthetic or CSV)."""
    base_x = base_labels = None
    if cfg.data_source.kind == "csv":
        loaded = load_csv(cfg.data_source.path, cfg.data_source.label_column)
        if len(loaded.label_names) != cfg.k:
            raise StateError(
                f"csv provides {len(loaded.label_names)} classes, config expects k={cfg.k}"
            )
        base_x, base_labels = loaded.x, loaded.labels
        if run_dir is not None:
            (run_dir / "label_mapping.csv").write_text(
                "label,class_id\n"
                + "\n".join(f"{name},{i}" for i, name in enumerate(loaded.label_names))
                + "\n"
            )
    return gen_task_stream(
        cfg.stream_kind,
        seed=cfg.seed,
        d_in=cfg.d_in,
        k=cfg.k,
        n_tasks=cfg.tasks,
        samples_per_task=cfg.samples_per_task,
        base_x=base_x,
        base_labels=base_labels,
    )


def _emulate_from_model(model: CompoundModel, stream: TaskStream, cfg: ExperimentConfig):
    """Re-accumulate task 0's normal equations and solve them in fixed point."""
    first = stream.tasks[0]
    acc = NormalEqAccumulator(cfg.h, stream.n_classes)
    y = one_hot(first.train_labels, stream.n_classes)
    for s in range(0, first.train_x.shape[0], cfg.chunk_rows):
        chunk = first.train_x[s : s + cfg.chunk_rows]
        acc.absorb(apply_features(model.feature_map, chunk), y[s : s + cfg.chunk_rows])
    fmt = FixedPointFormat(cfg.fixed_format.int_bits, cfg.fixed_format.frac_bits)
    return emulate_direct_solve(acc.gram, acc.cross, cfg.lambda_ridge, fmt)


def _write_emulation_json(result, path: Path) -> None:
    doc = {
        "schema_version": 1,
        "format": f"Q{result.fmt.int_bits}.{result.fmt.frac_bits}",
        "max_abs_err": result.max_abs_err,
        "saturations": result.saturations,
        "mac_tally": result.mac_tally,
        "factor_macs": result.factor_macs,
        "solve_macs": result.solve_macs,
    }
    path.write_text(json.dumps(doc, indent=2) + "\n")


def run_experiment(
    cfg: ExperimentConfig, out: str | Path | None = None, quiet: bool = False, figures: bool = True
) -> RunArtifacts:
    """Full continual pipeline: fit lower tier, train across tasks, report."""
    run_dir = make_run_dir(out, cfg.seed)
    artifacts = RunArtifacts(run_dir)
    logger = _make_logger(run_dir, quiet)
    try:
        artifacts.config_json.write_text(resolved_config_json(cfg))
        logger.info("run directory: %s", run_dir)

        stream = build_stream(cfg, run_dir)
        logger.info("stream: %s, %d tasks, %d classes, d_in=%d",
                    stream.kind, len(stream), stream.n_classes, stream.d_in)

        model = build_and_fit_lower(stream, cfg)
        checksum_before = model.lower_checksum()
        logger.info("lower tier fit: h=%d, ridge residual=%s, task-0 readout acc=%.4f",
                    cfg.h, model.ridge.train_residual,
                    ridge_accuracy(model, stream.tasks[0].test_x, stream.tasks[0].test_labels))

        result: SequenceResult = train_sequence(model, stream, cfg)
        if model.lower_checksum() != checksum_before:
            raise StateError("lower tier changed during head training; freeze contract violated")
        metrics = forgetting_metrics(result.accuracy_matrix)
        logger.info("avg final accuracy: %.4f", metrics.avg_final_accuracy)
        logger.info("forgetting per task: %s", np.round(metrics.forgetting, 4).tolist())
        logger.info("backward transfer: %.4f", metrics.backward_transfer)

        n_fit = stream.tasks[0].train_x.shape[0]
        report = build_cost_report(
            n_rows=n_fit,
            d_in=stream.d_in,
            h=cfg.h,
            k=stream.n_classes,
            epochs=cfg.epochs_per_task * len(stream),
            chunk_rows=cfg.chunk_rows,
            model=cfg.cost_model,
            head_hidden=cfg.head_hidden,
        )
        emulation = _emulate_from_model(model, stream, cfg)
        logger.info("fixed-point solve: max_abs_err=%.3g, saturations=%d, mac tally=%d",
                    emulation.max_abs_err, emulation.saturations, emulation.mac_tally)

        write_metrics_csv(result.epochs, artifacts.metrics_csv)
        write_accuracy_csv(result.accuracy_matrix, artifacts.accuracy_csv)
        artifacts.cost_json.write_text(report.to_json())
        _write_emulation_json(emulation, run_dir / "emulation.json")
        if figures:
            plots.save_training_curves(result.epochs, run_dir / "training_curves.png")
            plots.save_accuracy_matrix(result.accuracy_matrix, run_dir / "accuracy_matrix.png")
            plots.save_cost_report(report, n_fit, cfg.h, stream.n_classes,
                                   run_dir / "cost_report.png", cfg.head_hidden)
        logger.info("artifacts written to %s", run_dir)
        return artifacts
    except BaseException as exc:
        (run_dir / FAILURE_MARKER).write_text(f"{type(exc).__name__}: {exc}\n")
        logger.error("run failed: %s: %s", type(exc).__name__, exc)
        raise
    finally:
        _close_logger(logger)


def run_fit_direct(
    cfg: ExperimentConfig, out: str | Path | None = None, quiet: bool = False
) -> RunArtifacts:
    """Lower tier only: one-pass fit, readout accuracy per task."""
    run_dir = make_run_dir(out, cfg.seed)
    artifacts = RunArtifacts(run_dir)
    logger = _make_logger(run_dir, quiet)
    try:
        artifacts.config_json.write_text(resolved_config_json(cfg))
        stream = build_stream(cfg, run_dir)
        model = build_and_fit_lower(stream, cfg)
        accs = [
            ridge_accuracy(model, task.test_x, task.test_labels) for task in stream.tasks
        ]
        for t, acc in enumerate(accs):
            logger.info("task %d readout accuracy: %.4f", t, acc)
        doc = {
            "schema_version": 1,
            "train_residual": model.ridge.train_residual,
            "readout_test_accuracy": accs,
        }
        (run_dir / "fit_summary.json").write_text(json.dumps(doc, indent=2) + "\n")
        return artifacts
    except BaseException as exc:
        (run_dir / FAILURE_MARKER).write_text(f"{type(exc).__name__}: {exc}\n")
        logger.error("run failed: %s: %s", type(exc).__name__, exc)
        raise
    finally:
        _close_logger(logger)


def run_emulate(
    cfg: ExperimentConfig, out: str | Path | None = None, quiet: bool = False, figures: bool = True
) -> RunArtifacts:
    """Fixed-point emulation and cost report, no head training."""
    run_dir = make_run_dir(out, cfg.seed)
    artifacts = RunArtifacts(run_dir)
    logger = _make_logger(run_dir, quiet)
    try:
        artifacts.config_json.write_text(resolved_config_json(cfg))
        stream = build_stream(cfg, run_dir)
        model = build_and_fit_lower(stream, cfg)
        emulation = _emulate_from_model(model, stream, cfg)
        logger.info("fixed-point solve: max_abs_err=%.3g, saturations=%d, mac tally=%d",
                    emulation.max_abs_err, emulation.saturations, emulation.mac_tally)
        n_fit = stream.tasks[0].train_x.shape[0]
        report = build_cost_report(
            n_rows=n_fit,
            d_in=stream.d_in,
            h=cfg.h,
            k=stream.n_classes,
            epochs=cfg.epochs_per_task * len(stream),
            chunk_rows=cfg.chunk_rows,
            model=cfg.cost_model,
            head_hidden=cfg.head_hidden,
        )
        artifacts.cost_json.write_text(report.to_json())
        _write_emulation_json(emulation, run_dir / "emulation.json")
        if figures:
            plots.save_cost_report(report, n_fit, cfg.h, stream.n_classes,
                                   run_dir / "cost_report.png", cfg.head_hidden)
        return artifacts
    except BaseException as exc:
        (run_dir / FAILURE_MARKER).write_text(f"{type(exc).__name__}: {exc}\n")
        logger.error("run failed: %s: %s", type(exc).__name__, exc)
        raise
    finally:
        _close_logger(logger)


def run_gen_data(cfg: ExperimentConfig, out: str | Path | None = None, quiet: bool = False) -> Path:
    """Write the configured synthetic stream to per-task CSV files."""
    run_dir = make_run_dir(out, cfg.seed)
    logger = _make_logger(run_dir, quiet)
    try:
        stream = build_stream(cfg)
        for t, task in enumerate(stream.tasks):
            save_csv(run_dir / f"task{t}_train.csv", task.train_x, task.train_labels)
            save_csv(run_dir / f"task{t}_test.csv", task.test_x, task.test_labels)
            logger.info("task %d: %d train rows, %d test rows",
                        t, task.train_x.shape[0], task.test_x.shape[0])
        return run_dir
    except BaseException as exc:
        (run_dir / FAILURE_MARKER).write_text(f"{type(exc).__name__}: {exc}\n")
        raise
    finally:
        _close_logger(logger)
