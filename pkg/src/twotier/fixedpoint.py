"""Signed fixed-point arithmetic and the emulated direct-solve datapath.

Values are held as raw integers at scale ``2**frac_bits`` in a signed
Qint.frac format (one implicit sign bit; ``int_bits + frac_bits + 1 <= 64``).
All arithmetic is exact integer work, so the emulation is bit-reproducible:

* rounding is round-to-nearest, ties to even;
* overflow saturates to the format's extremes and bumps a counter;
* a multiply-accumulate keeps the product at double precision
  (``2 * frac_bits``) and rounds once on the accumulate, mirroring a
  hardware MAC with a wide accumulator.

``emulate_direct_solve`` runs the whole lower-tier solve (Cholesky
factorization plus forward/back substitution) in this arithmetic and
tallies datapath operations as it executes them.  The tally convention,
fixed here and mirrored by the cost module's closed-form counts:

* every multiply-accumulate counts 1;
* each factor-phase entry finalize (the pivot square root, or the divide
  producing an off-diagonal entry) counts 1, giving exactly
  ``h*(h+1)*(h+2)/6`` factor ops;
* each substitution entry's pivot normalization counts once per
  right-hand side: the forward divide is counted, and the back
  substitution's divide by the same pivot reuses that normalization and is
  not double-counted.  The two substitutions therefore tally exactly
  ``h*h`` ops per right-hand-side column.

These are declared model conventions (dimensionless "op" units, not
joules); what the invariants pin down is that the tally is incremented by
the executing code paths, not estimated after the fact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FixedPointNotPositiveDefiniteError, ShapeError
from .linalg import add_scaled_identity, as_matrix


@dataclass(frozen=True)
class FixedPointFormat:
    """Signed Q(int_bits).(frac_bits) layout."""

    int_bits: int = 16
    frac_bits: int = 16

    def __post_init__(self):
        if self.int_bits < 1 or self.frac_bits < 1:
            raise ValueError(f"bit fields must be positive, got Q{self.int_bits}.{self.frac_bits}")
        if self.int_bits + self.frac_bits + 1 > 64:
            raise ValueError(
                f"Q{self.int_bits}.{self.frac_bits} needs {self.int_bits + self.frac_bits + 1} bits, "
                "limit is 64"
            )

    @property
    def scale(self) -> int:
        return 1 << self.frac_bits

    @property
    def raw_min(self) -> int:
        return -(1 << (self.int_bits + self.frac_bits))

    @property
    def raw_max(self) -> int:
        return (1 << (self.int_bits + self.frac_bits)) - 1

    @property
    def resolution(self) -> float:
        return 1.0 / self.scale

    def to_float(self, raw: int) -> float:
        return raw / self.scale


@dataclass
class OpCounter:
    """Instrumented datapath activity for one emulated solve."""

    macs: int = 0
    saturations: int = 0


def _round_half_even(num: int, den: int) -> int:
    """Nearest integer to num/den with ties to even; den > 0."""
    q, r = divmod(num, den)
    twice = 2 * r
    if twice > den or (twice == den and q & 1):
        q += 1
    return q


def _saturate(raw: int, fmt: FixedPointFormat, counter: OpCounter) -> int:
    if raw > fmt.raw_max:
        counter.saturations += 1
        return fmt.raw_max
    if raw < fmt.raw_min:
        counter.saturations += 1
        return fmt.raw_min
    return raw


def quantize(x: float, fmt: FixedPointFormat, counter: OpCounter | None = None) -> int:
    """Round a real to the nearest representable raw value, saturating.

    Multiplying a float by the power-of-two scale is exact, so the only
    rounding happens once, at the integer conversion (ties to even).
    """
    if counter is None:
        counter = OpCounter()
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x!r}")
    scaled = x * fmt.scale
    if math.isinf(scaled):  # scaling can overflow float range for huge x
        return _saturate(fmt.raw_max + 1 if scaled > 0 else fmt.raw_min - 1, fmt, counter)
    return _saturate(round(scaled), fmt, counter)


def fixed_mac(acc: int, a: int, b: int, fmt: FixedPointFormat, counter: OpCounter | None = None) -> int:
    """acc + a*b with the product kept wide and a single rounding.

    The product sits at scale ``2**(2*frac_bits)``; the accumulator is
    widened to match, summed exactly, and rounded once back to the format.
    """
    counter = counter if counter is not None else OpCounter()
    wide = (acc << fmt.frac_bits) + a * b
    counter.macs += 1
    return _saturate(_round_half_even(wide, fmt.scale), fmt, counter)


def _fixed_div(num: int, den: int, fmt: FixedPointFormat, counter: OpCounter, count: bool = True) -> int:
    """num/den in raw units, round-to-nearest-even, saturating."""
    if count:
        counter.macs += 1
    wide = num << fmt.frac_bits
    if den < 0:
        wide, den = -wide, -den
    return _saturate(_round_half_even(wide, den), fmt, counter)


def _fixed_sqrt(raw: int, fmt: FixedPointFormat, counter: OpCounter) -> int:
    """sqrt of a non-negative raw value, rounded to nearest."""
    counter.macs += 1
    wide = raw << fmt.frac_bits
    s = math.isqrt(wide)
    # Nearest of s, s+1: sqrt ties cannot land exactly on .5, so compare
    # squared distances directly.
    if wide - s * s > (s + 1) * (s + 1) - wide:
        s += 1
    return _saturate(s, fmt, counter)


def quantize_matrix(a: np.ndarray, fmt: FixedPointFormat, counter: OpCounter) -> list[list[int]]:
    a = as_matrix(a)
    return [[quantize(float(v), fmt, counter) for v in row] for row in a]


@dataclass
class EmulationResult:
    """Fixed-point solve output alongside its float reference."""

    weights: np.ndarray  # fixed-point solution, converted back to floats
    weights_float: np.ndarray  # float64 reference solution
    max_abs_err: float
    saturations: int
    mac_tally: int
    factor_macs: int
    solve_macs: int
    fmt: FixedPointFormat


def emulate_direct_solve(gram, cross, lambda_ridge: float, fmt: FixedPointFormat) -> EmulationResult:
    """Solve ``(gram + lambda I) W = cross`` entirely in fixed point.

    Inputs are quantized once (input quantization saturates the counter but
    is not a datapath op), then factored and substituted with the
    instrumented primitives above.  A non-positive quantized pivot raises
    FixedPointNotPositiveDefiniteError carrying the pivot index; the float
    reference solve is done in float64 by the dense kernel module, an
    independent code path.
    """
    from .linalg import solve_spd  # local import keeps the routes visibly separate

    gram = as_matrix(gram, "gram")
    cross = as_matrix(cross, "cross")
    n = gram.shape[0]
    if gram.shape[1] != n:
        raise ShapeError(f"gram must be square, got {gram.shape[0]}x{gram.shape[1]}")
    if cross.shape[0] != n:
        raise ShapeError(f"cross has {cross.shape[0]} rows, gram is {n}x{n}")
    k = cross.shape[1]

    a_float = add_scaled_identity(gram, lambda_ridge)
    w_float = solve_spd(a_float, cross)

    counter = OpCounter()
    a = quantize_matrix(a_float, fmt, counter)
    b = quantize_matrix(cross, fmt, counter)
    counter.macs = 0  # input quantization is not datapath work

    # Factor phase: j MACs per entry of column j, plus one finalize op
    # (sqrt on the pivot, divide off the diagonal).
    l = [[0] * n for _ in range(n)]
    for j in range(n):
        acc = a[j][j]
        for p in range(j):
            acc = fixed_mac(acc, -l[j][p], l[j][p], fmt, counter)
        if acc <= 0:
            raise FixedPointNotPositiveDefiniteError(j)
        l[j][j] = _fixed_sqrt(acc, fmt, counter)
        if l[j][j] == 0:
            raise FixedPointNotPositiveDefiniteError(j)
        for i in range(j + 1, n):
            acc = a[i][j]
            for p in range(j):
                acc = fixed_mac(acc, -l[i][p], l[j][p], fmt, counter)
            l[i][j] = _fixed_div(acc, l[j][j], fmt, counter)
    factor_macs = counter.macs

    # Substitution phase, per right-hand-side column: the forward pivot
    # divide is counted; the back substitution divides by the same pivot
    # and reuses its normalization, so it is not counted again.
    w = [[0] * k for _ in range(n)]
    for c in range(k):
        z = [0] * n
        for i in range(n):
            acc = b[i][c]
            for p in range(i):
                acc = fixed_mac(acc, -l[i][p], z[p], fmt, counter)
            z[i] = _fixed_div(acc, l[i][i], fmt, counter)
        for i in range(n - 1, -1, -1):
            acc = z[i]
            for p in range(i + 1, n):
                acc = fixed_mac(acc, -l[p][i], w[p][c], fmt, counter)
            w[i][c] = _fixed_div(acc, l[i][i], fmt, counter, count=False)
    solve_macs = counter.macs - factor_macs

    weights = np.array([[fmt.to_float(w[i][c]) for c in range(k)] for i in range(n)])
    max_abs_err = float(np.max(np.abs(weights - w_float))) if weights.size else 0.0
    return EmulationResult(
        weights=weights,
        weights_float=w_float,
        max_abs_err=max_abs_err,
        saturations=counter.saturations,
        mac_tally=counter.macs,
        factor_macs=factor_macs,
        solve_macs=solve_macs,
        fmt=fmt,
    )
