"""Closed-form op and memory-traffic counts for the two fit strategies.

Everything here is a declared model in dimensionless units ("ops", "words",
"model units" of energy), never joules.  The conventions, fixed once and
shared with the datapath emulator's instrumented tally:

Direct (single-pass) fit of the lower-tier readout, N rows, d_in inputs,
h features, k targets:

* featurize            N * d_in * h
* symmetric Gram       N * h * (h + 1) / 2       (triangle only)
* cross term           N * h * k
* Cholesky factor      h * (h + 1) * (h + 2) / 6 (each entry: its inner
                       product MACs plus one finalize op, sqrt or divide)
* two substitutions    h * h * k                 (per right-hand side:
                       h*(h-1) MACs plus h pivot normalizations, counted
                       once and shared by the forward and back passes)

Bias addition and the pointwise nonlinearity ride free.  Memory traffic
streams each input word exactly once; the Gram triangle and cross term stay
resident and are charged one materialization each, plus the solution write:

* direct words = N * (d_in + k) + h*(h+1)/2 + h*k + h*k

Iterative head training (per epoch, linear head; the head is the topmost
layer, so gradients with respect to its inputs are never formed and their
ops are omitted by convention):

* forward              N * h * k
* weight gradients     N * h * k
* parameter update     h * k
* words per epoch      N * (h + 1) + 2 * h * k   (read features and labels,
                       read and write the weights)

A hidden layer of width m extends the per-epoch MACs to
``N*(h*m + m*k) + N*(m*k + h*m) + N*m*k + (h*m + m*k)`` (forward, weight
gradients, delta propagation through the hidden layer, update); bias work
is uncounted throughout.

``crossover_epochs`` is the smallest epoch count E at which the iterative
MAC total strictly exceeds the direct one.  Peak resident footprint for the
direct path is ``word_bytes * (h*h + h*k + chunk_rows*h)`` (Gram, cross,
one feature chunk).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass

from .config import CostModelSpec

SCHEMA_VERSION = 1


@dataclass(frozen=True)
class OpCounts:
    macs: int
    mem_words: int


@dataclass(frozen=True)
class CostReport:
    direct_macs: int
    sgd_macs: int
    direct_mem_words: int
    sgd_mem_words: int
    direct_energy: float
    sgd_energy: float
    peak_bytes: int
    fits_onchip: bool
    crossover_epochs: int

    def to_json(self) -> str:
        doc = {"schema_version": SCHEMA_VERSION, **asdict(self)}
        return json.dumps(doc, indent=2) + "\n"


def _check_dims(**dims: int) -> None:
    for name, value in dims.items():
        if value < 1:
            raise ValueError(f"{name} must be positive, got {value}")


def count_direct_ops(n_rows: int, d_in: int, h: int, k: int) -> OpCounts:
    """Op and word counts for the single-pass fit, formulas as above."""
    _check_dims(n_rows=n_rows, d_in=d_in, h=h, k=k)
    macs = (
        n_rows * d_in * h
        + n_rows * h * (h + 1) // 2
        + n_rows * h * k
        + h * (h + 1) * (h + 2) // 6
        + h * h * k
    )
    mem_words = n_rows * (d_in + k) + h * (h + 1) // 2 + h * k + h * k
    return OpCounts(macs=macs, mem_words=mem_words)


def _sgd_epoch_macs(n_rows: int, h: int, k: int, head_hidden: int) -> int:
    if head_hidden == 0:
        return 2 * n_rows * h * k + h * k
    m = head_hidden
    weights = h * m + m * k
    return n_rows * weights + n_rows * weights + n_rows * m * k + weights


def _sgd_epoch_words(n_rows: int, h: int, k: int, head_hidden: int) -> int:
    weights = h * k if head_hidden == 0 else h * head_hidden + head_hidden * k
    return n_rows * (h + 1) + 2 * weights


def count_sgd_ops(n_rows: int, h: int, k: int, epochs: int, head_hidden: int = 0) -> OpCounts:
    """Op and word counts for iterative head training over ``epochs``."""
    _check_dims(n_rows=n_rows, h=h, k=k, epochs=epochs)
    if head_hidden < 0:
        raise ValueError(f"head_hidden must be non-negative, got {head_hidden}")
    return OpCounts(
        macs=epochs * _sgd_epoch_macs(n_rows, h, k, head_hidden),
        mem_words=epochs * _sgd_epoch_words(n_rows, h, k, head_hidden),
    )


def crossover_epochs(n_rows: int, d_in: int, h: int, k: int, head_hidden: int = 0) -> int:
    """Smallest E with iterative MACs strictly above the direct fit's."""
    direct = count_direct_ops(n_rows, d_in, h, k).macs
    per_epoch = _sgd_epoch_macs(n_rows, h, k, head_hidden)
    return direct // per_epoch + 1


def peak_direct_bytes(h: int, k: int, chunk_rows: int, word_bytes: int) -> int:
    _check_dims(h=h, k=k, chunk_rows=chunk_rows, word_bytes=word_bytes)
    return word_bytes * (h * h + h * k + chunk_rows * h)


def build_cost_report(
    n_rows: int,
    d_in: int,
    h: int,
    k: int,
    epochs: int,
    chunk_rows: int,
    model: CostModelSpec,
    head_hidden: int = 0,
) -> CostReport:
    """Assemble the full report for one configuration.

    ``epochs`` is the iterative budget being compared against the one-shot
    fit (for a full run: epochs_per_task * tasks).
    """
    direct = count_direct_ops(n_rows, d_in, h, k)
    sgd = count_sgd_ops(n_rows, h, k, epochs, head_hidden)
    peak = peak_direct_bytes(h, k, chunk_rows, model.word_bytes)
    return CostReport(
        direct_macs=direct.macs,
        sgd_macs=sgd.macs,
        direct_mem_words=direct.mem_words,
        sgd_mem_words=sgd.mem_words,
        direct_energy=direct.macs * model.e_mac + direct.mem_words * model.e_mem,
        sgd_energy=sgd.macs * model.e_mac + sgd.mem_words * model.e_mem,
        peak_bytes=peak,
        fits_onchip=peak <= model.onchip_budget_bytes,
        crossover_epochs=crossover_epochs(n_rows, d_in, h, k, head_hidden),
    )
