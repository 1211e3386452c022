"""Experiment configuration: JSON in, validated dataclass out.

Unknown keys are rejected, and every validation failure names the offending
field, so a typo fails loudly instead of silently running defaults.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import ConfigError

NONLINEARITIES = ("tanh", "relu", "identity")
STREAM_KINDS = ("split_classes", "permuted_features", "drifting_blobs")
DATA_KINDS = ("synthetic", "csv")

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class FixedFormatSpec:
    """Signed fixed-point word layout (sign bit is implicit)."""

    int_bits: int = 16
    frac_bits: int = 16


@dataclass(frozen=True)
class CostModelSpec:
    """Unit energy/footprint constants; all figures are model units."""

    e_mac: float = 1.0
    e_mem: float = 5.0
    word_bytes: int = 4
    onchip_budget_bytes: int = 2 * 2**20


@dataclass(frozen=True)
class DataSourceSpec:
    kind: str = "synthetic"
    path: str | None = None
    label_column: str | None = None


@dataclass(frozen=True)
class ExperimentConfig:
    seed: int = 0
    d_in: int = 16
    h: int = 64
    k: int = 4
    head_hidden: int = 0
    nonlinearity: str = "tanh"
    lambda_ridge: float = 1e-3
    lambda_ewc: float = 1.0
    eta: float = 0.1
    epochs_per_task: int = 20
    tasks: int = 2
    samples_per_task: int = 400
    chunk_rows: int = 64
    batch_size: int = 32
    fisher_sample_cap: int = 0
    stream_kind: str = "drifting_blobs"
    fixed_format: FixedFormatSpec = field(default_factory=FixedFormatSpec)
    cost_model: CostModelSpec = field(default_factory=CostModelSpec)
    data_source: DataSourceSpec = field(default_factory=DataSourceSpec)

    def to_dict(self) -> dict:
        return asdict(self)


def _take(raw: dict, section: str, allowed: tuple[str, ...]) -> dict:
    for key in raw:
        if key not in allowed:
            raise ConfigError(f"{section}.{key}" if section else key, "unknown field")
    return raw


def _require(cond: bool, fld: str, message: str) -> None:
    if not cond:
        raise ConfigError(fld, message)


def _number(raw: dict, fld: str, default: float) -> float:
    value = raw.get(fld, default)
    _require(isinstance(value, (int, float)) and not isinstance(value, bool), fld, "must be a number")
    return float(value)


def _integer(raw: dict, fld: str, default: int) -> int:
    value = raw.get(fld, default)
    _require(isinstance(value, int) and not isinstance(value, bool), fld, "must be an integer")
    return value


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a parsed JSON document into an ExperimentConfig."""
    if not isinstance(raw, dict):
        raise ConfigError("<root>", "config document must be a JSON object")
    raw = dict(raw)
    # Resolved configs carry their schema version; accept and check it so a
    # run can be reproduced straight from its own artifact.
    version = raw.pop("schema_version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION, "schema_version", f"unsupported version {version!r}")
    defaults = ExperimentConfig()
    allowed = tuple(defaults.__dataclass_fields__)
    _take(raw, "", allowed)

    seed = _integer(raw, "seed", defaults.seed)
    _require(0 <= seed < 2**64, "seed", "must fit in an unsigned 64-bit integer")
    d_in = _integer(raw, "d_in", defaults.d_in)
    _require(d_in >= 1, "d_in", "must be at least 1")
    h = _integer(raw, "h", defaults.h)
    _require(h >= 1, "h", "must be at least 1")
    k = _integer(raw, "k", defaults.k)
    _require(k >= 2, "k", "must be at least 2")
    head_hidden = _integer(raw, "head_hidden", defaults.head_hidden)
    _require(head_hidden >= 0, "head_hidden", "must be non-negative")
    nonlinearity = raw.get("nonlinearity", defaults.nonlinearity)
    _require(nonlinearity in NONLINEARITIES, "nonlinearity", f"must be one of {list(NONLINEARITIES)}")
    lambda_ridge = _number(raw, "lambda_ridge", defaults.lambda_ridge)
    _require(lambda_ridge > 0.0, "lambda_ridge", "must be positive")
    lambda_ewc = _number(raw, "lambda_ewc", defaults.lambda_ewc)
    _require(lambda_ewc >= 0.0, "lambda_ewc", "must be non-negative")
    eta = _number(raw, "eta", defaults.eta)
    _require(eta > 0.0, "eta", "must be positive")
    epochs_per_task = _integer(raw, "epochs_per_task", defaults.epochs_per_task)
    _require(epochs_per_task >= 1, "epochs_per_task", "must be at least 1")
    tasks = _integer(raw, "tasks", defaults.tasks)
    _require(tasks >= 1, "tasks", "must be at least 1")
    samples_per_task = _integer(raw, "samples_per_task", defaults.samples_per_task)
    _require(samples_per_task >= 5, "samples_per_task", "must be at least 5")
    chunk_rows = _integer(raw, "chunk_rows", defaults.chunk_rows)
    _require(chunk_rows >= 1, "chunk_rows", "must be at least 1")
    batch_size = _integer(raw, "batch_size", defaults.batch_size)
    _require(batch_size >= 0, "batch_size", "must be non-negative (0 = full batch)")
    fisher_sample_cap = _integer(raw, "fisher_sample_cap", defaults.fisher_sample_cap)
    _require(fisher_sample_cap >= 0, "fisher_sample_cap", "must be non-negative (0 = full data)")
    stream_kind = raw.get("stream_kind", defaults.stream_kind)
    _require(stream_kind in STREAM_KINDS, "stream_kind", f"must be one of {list(STREAM_KINDS)}")
    if stream_kind == "split_classes":
        _require(tasks <= k, "tasks", f"split_classes needs tasks <= k, got {tasks} > {k}")

    ff_raw = raw.get("fixed_format", {})
    _require(isinstance(ff_raw, dict), "fixed_format", "must be an object")
    _take(ff_raw, "fixed_format", ("int_bits", "frac_bits"))
    int_bits = _integer(ff_raw, "int_bits", FixedFormatSpec.int_bits)
    frac_bits = _integer(ff_raw, "frac_bits", FixedFormatSpec.frac_bits)
    _require(int_bits >= 1, "fixed_format.int_bits", "must be at least 1")
    _require(frac_bits >= 1, "fixed_format.frac_bits", "must be at least 1")
    _require(
        int_bits + frac_bits + 1 <= 64,
        "fixed_format.int_bits",
        f"total width {int_bits}+{frac_bits}+1 exceeds 64 bits",
    )

    cm_raw = raw.get("cost_model", {})
    _require(isinstance(cm_raw, dict), "cost_model", "must be an object")
    _take(cm_raw, "cost_model", ("e_mac", "e_mem", "word_bytes", "onchip_budget_bytes"))
    e_mac = _number(cm_raw, "e_mac", CostModelSpec.e_mac)
    _require(e_mac >= 0.0, "cost_model.e_mac", "must be non-negative")
    e_mem = _number(cm_raw, "e_mem", CostModelSpec.e_mem)
    _require(e_mem >= 0.0, "cost_model.e_mem", "must be non-negative")
    word_bytes = _integer(cm_raw, "word_bytes", CostModelSpec.word_bytes)
    _require(word_bytes >= 1, "cost_model.word_bytes", "must be at least 1")
    budget = _integer(cm_raw, "onchip_budget_bytes", CostModelSpec.onchip_budget_bytes)
    _require(budget >= 1, "cost_model.onchip_budget_bytes", "must be at least 1")

    ds_raw = raw.get("data_source", {})
    _require(isinstance(ds_raw, dict), "data_source", "must be an object")
    _take(ds_raw, "data_source", ("kind", "path", "label_column"))
    ds_kind = ds_raw.get("kind", DataSourceSpec.kind)
    _require(ds_kind in DATA_KINDS, "data_source.kind", f"must be one of {list(DATA_KINDS)}")
    ds_path = ds_raw.get("path")
    ds_label = ds_raw.get("label_column")
    if ds_kind == "csv":
        _require(isinstance(ds_path, str) and ds_path != "", "data_source.path", "required for csv sources")
        _require(
            isinstance(ds_label, str) and ds_label != "",
            "data_source.label_column",
            "required for csv sources",
        )
        _require(
            stream_kind != "drifting_blobs",
            "stream_kind",
            "drifting_blobs is generative and cannot consume a csv source",
        )
    else:
        ds_path, ds_label = None, None

    return ExperimentConfig(
        seed=seed,
        d_in=d_in,
        h=h,
        k=k,
        head_hidden=head_hidden,
        nonlinearity=nonlinearity,
        lambda_ridge=lambda_ridge,
        lambda_ewc=lambda_ewc,
        eta=eta,
        epochs_per_task=epochs_per_task,
        tasks=tasks,
        samples_per_task=samples_per_task,
        chunk_rows=chunk_rows,
        batch_size=batch_size,
        fisher_sample_cap=fisher_sample_cap,
        stream_kind=stream_kind,
        fixed_format=FixedFormatSpec(int_bits=int_bits, frac_bits=frac_bits),
        cost_model=CostModelSpec(
            e_mac=e_mac, e_mem=e_mem, word_bytes=word_bytes, onchip_budget_bytes=budget
        ),
        data_source=DataSourceSpec(kind=ds_kind, path=ds_path, label_column=ds_label),
    )


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError("<document>", f"invalid JSON in {path}: {exc}") from exc
    return config_from_dict(raw)


def resolved_config_json(cfg: ExperimentConfig) -> str:
    """Serialize the fully resolved config (defaults filled in)."""
    doc = {"schema_version": SCHEMA_VERSION, **cfg.to_dict()}
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
