"""Monte Carlo Euler estimators and convergence-order experiments.

The headline estimator averages a payoff of the terminal Euler value
over M = N**2 independent replicates, so the total effort per row is
N**3 scheme steps.  Unrestricted averages are the headline quantity;
alongside them every run evaluates the restricted
average that zeroes replicates outside the dominating-process event,
plus the count of replicates that were excluded.

Determinism contract: results are a pure function of (model, payoff,
N, M, seed) for a fixed package version.  Replicates are numbered from
1 and map to counter-based streams, chunking is fixed at CHUNK, chunk
partial sums use numpy's pairwise summation, and partials merge in
chunk order through compensated addition.  Thread count and backend
choice never enter the arithmetic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Sequence

import numpy as np
import scipy.stats

from .brownian import (
    fold_increments,
    initial_draws_batch,
    normals_from_keys,
    path_values_batch,
    stream_keys,
)
from .dominator import omega_membership_batch
from .euler import euler_values_batch
from .models import SdeModel
from . import _kernels

# Replicates per batch.  A constant, not a tunable: chunk boundaries
# decide which partial sums exist, so changing it moves results by a
# few ulps.  4096 keeps the widest working set (reference-depth paths)
# near 130 MB.
CHUNK = 4096


class KahanSum:
    """Compensated serial accumulator for merging chunk partial sums."""

    def __init__(self) -> None:
        self.total = 0.0
        self._carry = 0.0

    def add(self, x: float) -> None:
        y = x - self._carry
        t = self.total + y
        self._carry = (t - self.total) - y
        self.total = t


def abs_power_payoff(p: float) -> Callable[[np.ndarray], np.ndarray]:
    """Vectorized |y|**p with overflow saturating to inf."""
    p = float(p)

    def payoff(y: np.ndarray) -> np.ndarray:
        with np.errstate(over="ignore", invalid="ignore"):
            return np.abs(y) ** p

    return payoff


square_payoff = abs_power_payoff(2.0)


@dataclass(frozen=True)
class McEstimate:
    value: float  # unrestricted mean; NaN if any payoff was non-finite
    restricted_value: float  # event-and-finite replicates only, over M
    n_samples: int
    std_error: float  # of the unrestricted mean; NaN with value
    excluded_count: int  # replicates outside the event or non-finite
    n_steps: int


@dataclass(frozen=True)
class ConvergenceRow:
    seed: int
    model: str
    n_steps: int
    n_samples: int
    estimate: float
    restricted: float
    abs_error: float  # NaN until error_rows fills it in
    effort: float  # n_steps**3, the step-count cost of the row


@dataclass(frozen=True)
class OrderFit:
    slope: float
    intercept: float
    r_squared: float
    n_rows: int


@dataclass(frozen=True)
class MomentRow:
    n_steps: int
    n_samples: int
    power: float
    restricted_moment: float
    finite_fraction: float
    event: str
    event_empty: bool


@dataclass(frozen=True)
class ProbRow:
    n_steps: int
    n_samples: int
    p_complement: float
    std_err: float
    event_empty: bool


def _pow2_exponent(n: int) -> Optional[int]:
    k = int(n).bit_length() - 1
    return k if n >= 1 and 2**k == n else None


def _chunk_inputs(model: SdeModel, seed: int, m0: int, count: int, n_steps: int,
                  depth: Optional[int]):
    """Increments, realized initials and optional path values for
    replicates m0+1 .. m0+count.

    With a depth, increments come from folding dyadic path differences
    (and the path values are returned for sup-functionals); without
    one they are drawn directly as sqrt(T/N) * Z, which is the only
    option when N is not a power of two.
    """
    T = model.horizon_T
    if depth is not None:
        wvals = path_values_batch(seed, m0 + 1, count, depth, T)
        incs = np.diff(wvals, axis=1)
        k = _pow2_exponent(n_steps)
        for _ in range(depth - k):
            incs = fold_increments(incs)
    else:
        keys = stream_keys(seed, np.arange(m0 + 1, m0 + count + 1, dtype=np.uint64))
        incs = normals_from_keys(keys, 0, n_steps) * math.sqrt(T / n_steps)
        wvals = None
    if model.has_random_initial:
        z = initial_draws_batch(seed, m0 + 1, count)
        xi = np.asarray(model.initial(z), dtype=np.float64)
        if xi.shape != (count,):
            raise ValueError("initial sampler must map draws elementwise")
    else:
        xi = np.full(count, model.initial_value())
    return incs, xi, wvals


def _resolve_depth(model: SdeModel, n_steps: int, depth: Optional[int], event: str):
    k = _pow2_exponent(n_steps)
    if event == "intro":
        if k is None:
            raise ValueError("the sup|W| event needs a power-of-two step count")
        if depth is not None and depth < k:
            raise ValueError("depth 2**%d cannot resolve %d steps" % (depth, n_steps))
        # two extra levels by default so the grid sup sees sub-step wiggle
        return depth if depth is not None else k + 2
    if depth is not None:
        if k is None:
            raise ValueError("an explicit depth needs a power-of-two step count")
        if depth < k:
            raise ValueError("depth 2**%d cannot resolve %d steps" % (depth, n_steps))
        return depth
    return k  # None for non-powers of two: direct increment draws


def _intro_cutoff(model: SdeModel, n_steps: int) -> float:
    if (
        model.kernel_kind != _kernels.KIND_CUBIC
        or model.kernel_params[0] != 1.0
        or model.has_random_initial
        or model.initial_value() != 0.0
    ):
        raise ValueError(
            "the sup|W| event applies to the cubic model with unit noise "
            "and zero initial value"
        )
    return math.sqrt(n_steps / (2.0 * model.horizon_T))


def mce(
    model: SdeModel,
    payoff: Callable[[np.ndarray], np.ndarray],
    n_steps: int,
    n_samples: int,
    seed: int,
    depth: Optional[int] = None,
    event: str = "dominator",
) -> McEstimate:
    """Monte Carlo Euler estimate of E[payoff(Y_N)].

    depth widens the dyadic grid the increments are folded from; rows
    produced at equal (seed, depth) share paths replicate-for-replicate
    with coupled_sweep.  event selects the restriction: "dominator" for
    the windowed dominating-process event, "intro" for the terminal
    sup|W| event of the additive-noise cubic model.
    """
    if n_steps < 1 or n_samples < 1:
        raise ValueError("n_steps and n_samples must be positive")
    if event not in ("dominator", "intro"):
        raise ValueError("event must be 'dominator' or 'intro', got %r" % event)
    depth = _resolve_depth(model, n_steps, depth, event)
    cutoff = _intro_cutoff(model, n_steps) if event == "intro" else None

    dt = model.horizon_T / n_steps
    sum_z = KahanSum()
    sum_z2 = KahanSum()
    sum_r = KahanSum()
    included = 0
    any_nonfinite = False
    m0 = 0
    while m0 < n_samples:
        count = min(CHUNK, n_samples - m0)
        incs, xi, wvals = _chunk_inputs(model, seed, m0, count, n_steps, depth)
        values = euler_values_batch(model, dt, xi, incs)
        y = values[:, -1]
        if event == "intro":
            flags = np.abs(wvals).max(axis=1) <= cutoff
        else:
            flags, _ = omega_membership_batch(model, xi, values, incs)
        with np.errstate(over="ignore", invalid="ignore"):
            z = np.asarray(payoff(y), dtype=np.float64)
            finite = np.isfinite(z)
            keep = flags & finite
            any_nonfinite = any_nonfinite or not finite.all()
            sum_z.add(float(np.sum(z)))
            zf = np.where(finite, z, 0.0)
            sum_z2.add(float(np.sum(zf * zf)))
            sum_r.add(float(np.sum(np.where(keep, z, 0.0))))
        included += int(np.count_nonzero(keep))
        m0 += count

    if any_nonfinite:
        value = float("nan")
        std_error = float("nan")
    else:
        value = sum_z.total / n_samples
        if n_samples > 1:
            var = max(0.0, (sum_z2.total - n_samples * value * value) / (n_samples - 1))
            std_error = math.sqrt(var / n_samples)
        else:
            std_error = 0.0
    return McEstimate(
        value=value,
        restricted_value=sum_r.total / n_samples,
        n_samples=int(n_samples),
        std_error=std_error,
        excluded_count=int(n_samples) - included,
        n_steps=int(n_steps),
    )


def coupled_sweep(
    model: SdeModel,
    payoff: Callable[[np.ndarray], np.ndarray],
    n_list: Sequence[int],
    seed: int,
    depth_cap: int = 10,
    n_samples: Optional[int] = None,
) -> List[ConvergenceRow]:
    """One convergence table: row N averages payoff over M = N**2.

    All rows share Brownian paths: row N folds the same depth-log2(max
    N) paths down to its own grid and uses replicates m <= N**2, so
    coarse rows are nested subsets of fine rows.  Each row is exactly
    mce(model, payoff, N, N**2, seed, depth=log2(max N)).

    Passing n_samples freezes the replicate count at that value for
    every row instead of N**2; the paths stay shared, which isolates
    the scheme bias from sampling noise when comparing rows.
    """
    ns = sorted(set(int(n) for n in n_list))
    if not ns:
        raise ValueError("n_list must not be empty")
    ks = [_pow2_exponent(n) for n in ns]
    if any(k is None for k in ks):
        raise ValueError("coupled sweeps need power-of-two step counts")
    d = ks[-1]
    if d > depth_cap:
        raise ValueError(
            "max steps 2**%d exceeds the depth cap 2**%d; raise depth_cap "
            "if the cost is intended" % (d, depth_cap)
        )
    if n_samples is not None and n_samples < 1:
        raise ValueError("n_samples must be positive")
    T = model.horizon_T

    def row_samples(n: int) -> int:
        return n * n if n_samples is None else int(n_samples)

    m_max = max(row_samples(n) for n in ns)

    class _RowState:
        __slots__ = ("sum_z", "sum_r", "included", "any_nonfinite")

        def __init__(self):
            self.sum_z = KahanSum()
            self.sum_r = KahanSum()
            self.included = 0
            self.any_nonfinite = False

    state = {n: _RowState() for n in ns}
    m0 = 0
    while m0 < m_max:
        count = min(CHUNK, m_max - m0)
        incs, xi, _ = _chunk_inputs(model, seed, m0, count, ns[-1], d)
        for k in range(d, ks[0] - 1, -1):
            n = 2**k
            if n in state and m0 < row_samples(n):
                sub = min(count, row_samples(n) - m0)
                st = state[n]
                values = euler_values_batch(model, T / n, xi[:sub], incs[:sub])
                y = values[:, -1]
                flags, _ = omega_membership_batch(model, xi[:sub], values, incs[:sub])
                with np.errstate(over="ignore", invalid="ignore"):
                    z = np.asarray(payoff(y), dtype=np.float64)
                    finite = np.isfinite(z)
                    keep = flags & finite
                    st.any_nonfinite = st.any_nonfinite or not finite.all()
                    st.sum_z.add(float(np.sum(z)))
                    st.sum_r.add(float(np.sum(np.where(keep, z, 0.0))))
                st.included += int(np.count_nonzero(keep))
            if k > ks[0]:
                incs = fold_increments(incs)
        m0 += count

    rows = []
    for n in ns:
        st = state[n]
        m = row_samples(n)
        est = float("nan") if st.any_nonfinite else st.sum_z.total / m
        rows.append(
            ConvergenceRow(
                seed=int(seed),
                model=model.name,
                n_steps=n,
                n_samples=m,
                estimate=est,
                restricted=st.sum_r.total / m,
                abs_error=float("nan"),
                effort=float(n) * m,  # equals N**3 at the default M = N**2
            )
        )
    return rows


def error_rows(rows: Sequence[ConvergenceRow], reference: float) -> List[ConvergenceRow]:
    """Copy of rows with abs_error filled in against a scalar reference."""
    out = []
    for row in rows:
        err = abs(row.estimate - reference)
        out.append(replace(row, abs_error=float(err)))
    return out


def fit_order(rows: Sequence[ConvergenceRow]) -> OrderFit:
    """Least-squares slope of log10 abs_error against log10 effort.

    Rows with zero, non-finite, or missing errors are dropped; at least
    three usable rows are required for a meaningful line.
    """
    pts = [
        (row.effort, row.abs_error)
        for row in rows
        if math.isfinite(row.abs_error) and row.abs_error > 0.0
    ]
    if len(pts) < 3:
        raise ValueError(
            "need at least 3 rows with positive finite abs_error, have %d" % len(pts)
        )
    x = np.log10([p[0] for p in pts])
    ylog = np.log10([p[1] for p in pts])
    fit = scipy.stats.linregress(x, ylog)
    return OrderFit(
        slope=float(fit.slope),
        intercept=float(fit.intercept),
        r_squared=float(fit.rvalue) ** 2,
        n_rows=len(pts),
    )


def moment_diagnostics(
    model: SdeModel,
    power: float,
    n_list: Sequence[int],
    n_samples: int,
    seed: int,
    event: str = "auto",
) -> List[MomentRow]:
    """Restricted |Y_N|**p moments across step counts.

    event "auto" picks the terminal sup|W| event when the model is the
    unit-noise cubic started at zero (where that event is live at every
    N) and the dominating-process event otherwise.  The returned rows
    carry the resolved event name and whether it was deterministically
    empty.  finite_fraction records the share of replicates whose
    unrestricted payoff was even finite, as a blow-up symptom.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    if event == "auto":
        try:
            _intro_cutoff(model, 16)
            event = "intro"
        except ValueError:
            event = "dominator"
    if event not in ("dominator", "intro"):
        raise ValueError("event must be auto|dominator|intro, got %r" % event)
    payoff = abs_power_payoff(power)

    rows = []
    for n in sorted(set(int(n) for n in n_list)):
        depth = _resolve_depth(model, n, None, event)
        cutoff = _intro_cutoff(model, n) if event == "intro" else None
        dt = model.horizon_T / n
        sum_r = KahanSum()
        finite_count = 0
        empty = event == "dominator"
        m0 = 0
        while m0 < n_samples:
            count = min(CHUNK, n_samples - m0)
            incs, xi, wvals = _chunk_inputs(model, seed, m0, count, n, depth)
            values = euler_values_batch(model, dt, xi, incs)
            y = values[:, -1]
            if event == "intro":
                flags = np.abs(wvals).max(axis=1) <= cutoff
            else:
                flags, chunk_empty = omega_membership_batch(model, xi, values, incs)
                empty = empty and chunk_empty
            with np.errstate(over="ignore", invalid="ignore"):
                z = np.asarray(payoff(y), dtype=np.float64)
                finite = np.isfinite(z)
                sum_r.add(float(np.sum(np.where(flags & finite, z, 0.0))))
            finite_count += int(np.count_nonzero(finite))
            m0 += count
        rows.append(
            MomentRow(
                n_steps=n,
                n_samples=int(n_samples),
                power=float(power),
                restricted_moment=sum_r.total / n_samples,
                finite_fraction=finite_count / n_samples,
                event=event,
                event_empty=bool(empty),
            )
        )
    return rows


def prob_omega_complement(
    model: SdeModel,
    n_list: Sequence[int],
    n_samples: int,
    seed: int,
) -> List[ProbRow]:
    """Estimated probability of falling outside the dominator event.

    p_complement is exact (0 or 1, std_err 0) whenever membership is
    deterministic, in particular when base > r_N empties the event.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    rows = []
    for n in sorted(set(int(n) for n in n_list)):
        depth = _resolve_depth(model, n, None, "dominator")
        dt = model.horizon_T / n
        members = 0
        empty = True
        m0 = 0
        while m0 < n_samples:
            count = min(CHUNK, n_samples - m0)
            incs, xi, _ = _chunk_inputs(model, seed, m0, count, n, depth)
            values = euler_values_batch(model, dt, xi, incs)
            flags, chunk_empty = omega_membership_batch(model, xi, values, incs)
            empty = empty and chunk_empty
            members += int(np.count_nonzero(flags))
            m0 += count
        p_c = 1.0 - members / n_samples
        rows.append(
            ProbRow(
                n_steps=n,
                n_samples=int(n_samples),
                p_complement=p_c,
                std_err=math.sqrt(max(0.0, p_c * (1.0 - p_c) / n_samples)),
                event_empty=bool(empty),
            )
        )
    return rows
