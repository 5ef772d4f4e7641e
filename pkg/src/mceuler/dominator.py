"""Pathwise dominating process for Euler schemes with one-sided drift.

The scheme increment splits as Y_{n+1} = Y_n (1 + small) + noise once
the drift's one-sided bound is isolated, and iterating that split from
the most recent sign change of Y gives an explicit dominating sequence

    D_{v,w} = exp(sum_{l=v}^{w-1} alpha_l) * base
            + sum_{k=v}^{w-1} sgn(Y_k) exp(sum_{l=k+1}^{w-1} alpha_l) beta_k

with alpha_n = T L / N + sigma_tilde(Y_n) dW_n, beta_n = T mu(0) / N +
sigma(0) dW_n, base = T |mu(0)| + |sigma(0)| + |xi| + 1, and empty sums
equal to zero (so D_{v,v} = base).  On the event that every |D_{v,w}|
stays below a cutoff radius r_N and every increment |dW| stays below
N**-1/4, the scheme itself satisfies |Y_n| <= D_{tau_n, n} where tau_n
is the last sign-change step.  That inequality is what check_domination
verifies numerically, and the event is what the restricted estimators
condition on.

The radius r_N grows like N**1/4, while base >= 1 + |xi| is fixed, so
for stiff models the event can be *deterministically* empty until N is
astronomically large: base > r_N already forces D_{v,v} > r_N for
every path.  Membership code short-circuits on that comparison, which
is exact arithmetic, not an approximation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .brownian import BrownianPath, sup_abs
from .euler import EulerTrajectory
from .models import SdeModel


def sigma_tilde(model: SdeModel, x):
    """(sigma(x) - sigma(0)) / x elementwise, with value 0 at x = 0."""
    x = np.asarray(x, dtype=np.float64)
    sig0 = model.sigma_at_zero
    num = np.asarray(model.sigma(x), dtype=np.float64) - sig0
    out = np.zeros_like(x)
    with np.errstate(divide="ignore", invalid="ignore"):
        np.divide(num, x, out=out, where=(x != 0.0))
    return out if out.shape else float(out)


def radius(model: SdeModel, n_steps: int) -> float:
    """Event cutoff r_N for the dominating process.

    r_N = min(N**(1/4) / L,
              max(0, N / (T (sup|mu'| + 3L)) - 1) ** (1/(delta-1)))

    Nondecreasing in N and tending to infinity, but typically tiny at
    small N: both branches start below 1 for the stiff builtin models.
    """
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    L = model.growth_L
    d = model.growth_delta
    stiffness = model.sup_mu_prime_unit + 3.0 * L
    a = n_steps**0.25 / L
    b = max(0.0, n_steps / (model.horizon_T * stiffness) - 1.0) ** (1.0 / (d - 1.0))
    return min(a, b)


def dominator_base(model: SdeModel, xi) -> np.ndarray:
    """Start value of every restarted recursion: T|mu(0)| + |sigma(0)| + |xi| + 1."""
    T = model.horizon_T
    return T * abs(model.mu_at_zero) + abs(model.sigma_at_zero) + np.abs(xi) + 1.0


def sign_pm(x):
    """+1 on [0, inf), -1 elsewhere; NaN maps to -1 but flags die on NaN anyway."""
    return np.where(np.asarray(x) >= 0.0, 1.0, -1.0)


def alpha_beta(model: SdeModel, n_steps: int, y: np.ndarray, incs: np.ndarray):
    """Per-step multiplier exponents and offsets along a trajectory.

    y are the pre-step values Y_0 .. Y_{N-1}, incs the matching
    Brownian increments.  Works on 1-d or (R, N) batches.
    """
    y = np.asarray(y, dtype=np.float64)
    incs = np.asarray(incs, dtype=np.float64)
    T = model.horizon_T
    with np.errstate(over="ignore", invalid="ignore"):
        alpha = T * model.growth_L / n_steps + sigma_tilde(model, y) * incs
        beta = T * model.mu_at_zero / n_steps + model.sigma_at_zero * incs
    return alpha, beta


@dataclass
class DominatorTrace:
    """All dominating-process state along one trajectory.

    Arrays are indexed by step n = 0..N (alpha/beta by n = 0..N-1).
    sup_D[n] is the running sup of |D_{v,w}| over 0 <= v <= w <= n;
    after a trajectory loses finiteness it is NaN and omega_flags is
    False from there on.  omega_flags[n] also requires the first n
    increments to stay within N**-1/4.
    """

    n_steps: int
    r_N: float
    base: float
    alpha: np.ndarray
    beta: np.ndarray
    sgn_y: np.ndarray
    tau: np.ndarray
    D_tau: np.ndarray
    sup_D: np.ndarray
    omega_flags: np.ndarray
    increment_flag: bool

    @property
    def is_member(self) -> bool:
        """Membership of the full event (all N steps)."""
        return bool(self.omega_flags[-1])


def dominator_table(
    traj: EulerTrajectory,
    incs: Optional[np.ndarray] = None,
    model: Optional[SdeModel] = None,
) -> DominatorTrace:
    """Evaluate the dominating process along one trajectory.

    incs and model default to the ones stored on the trajectory; pass
    them only to assert they match.  Cost is O(N^2) dominator cells,
    evaluated with one vectorized sweep per step.
    """
    if model is None:
        model = traj.model
    elif model is not traj.model:
        raise ValueError("model does not match the trajectory's model")
    if incs is None:
        incs = traj.increments
    else:
        incs = np.asarray(incs, dtype=np.float64)
        if incs.shape != traj.increments.shape or not np.array_equal(
            incs, traj.increments, equal_nan=True
        ):
            raise ValueError("incs do not match the trajectory's increments")

    N = traj.n_steps
    y = traj.values
    r_N = radius(model, N)
    base = float(dominator_base(model, traj.initial))
    alpha, beta = alpha_beta(model, N, y[:-1], incs)
    sgn_y = sign_pm(y)

    with np.errstate(over="ignore", invalid="ignore"):
        ealpha = np.exp(alpha)
        sb = sgn_y[:-1] * beta

        # Forward sweep over end index w, batched over start index v:
        # after step w, dv[v] holds D_{v, w+1} for v <= w and base on
        # the untouched diagonal slots.
        dv = np.full(N + 1, base)
        sup_run = np.empty(N + 1)
        tau = np.zeros(N + 1, dtype=np.int64)
        d_tau = np.empty(N + 1)
        sup_run[0] = base
        d_tau[0] = base
        cur_tau = 0
        for w in range(N):
            dv[: w + 1] = ealpha[w] * dv[: w + 1] + sb[w]
            col_sup = float(np.abs(dv[: w + 2]).max())
            sup_run[w + 1] = np.maximum(sup_run[w], col_sup)  # NaN-sticky
            if sgn_y[w] != sgn_y[w + 1]:
                cur_tau = w + 1
            tau[w + 1] = cur_tau
            d_tau[w + 1] = dv[cur_tau]

    inc_small = np.abs(incs) <= N**-0.25
    inc_prefix = np.empty(N + 1, dtype=bool)
    inc_prefix[0] = True
    np.logical_and.accumulate(inc_small, out=inc_prefix[1:])
    with np.errstate(invalid="ignore"):
        omega = (sup_run <= r_N) & inc_prefix

    return DominatorTrace(
        n_steps=N,
        r_N=r_N,
        base=base,
        alpha=alpha,
        beta=beta,
        sgn_y=sgn_y,
        tau=tau,
        D_tau=d_tau,
        sup_D=sup_run,
        omega_flags=omega,
        increment_flag=bool(inc_small.all()),
    )


def check_domination(
    trace: DominatorTrace, traj: EulerTrajectory, tol: float = 1e-9
) -> list:
    """Steps where the domination inequality fails on the event.

    Returns the list of n with omega_flags[n] set and
    |Y_n| > D_{tau_n, n} + tol.  Empty list means the pathwise bound
    held everywhere it was claimed.
    """
    if trace.n_steps != traj.n_steps:
        raise ValueError("trace and trajectory disagree on the step count")
    bad = []
    y = traj.values
    for n in range(trace.n_steps + 1):
        if trace.omega_flags[n] and not abs(y[n]) <= trace.D_tau[n] + tol:
            bad.append(n)
    return bad


def omega_membership_batch(model: SdeModel, xi: np.ndarray, values: np.ndarray, incs: np.ndarray):
    """Full-horizon event membership for a batch of replicates.

    values: (R, N+1) trajectory values, incs: (R, N) increments, xi:
    (R,) realized initial values.  Returns (flags, event_empty) where
    event_empty reports that the deterministic comparison base > r_N
    already excluded every replicate, without touching any dominator
    cell.  Rows that lose finiteness drop out via NaN comparisons.
    """
    n_rep, n_steps = incs.shape
    r = radius(model, n_steps)
    base = np.broadcast_to(
        np.asarray(dominator_base(model, xi), dtype=np.float64), (n_rep,)
    )
    event_empty = bool(base.min() > r)
    flags = np.zeros(n_rep, dtype=bool)
    if event_empty:
        return flags, True
    with np.errstate(over="ignore", invalid="ignore"):
        inc_ok = np.max(np.abs(incs), axis=1) <= n_steps**-0.25
        alive = (base <= r) & inc_ok
        if not alive.any():
            return flags, False
        idx = np.flatnonzero(alive)
        T = model.horizon_T
        y_pre = values[idx, :-1]
        st = sigma_tilde(model, y_pre)
        ealpha = np.exp(T * model.growth_L / n_steps + st * incs[idx])
        sb = sign_pm(y_pre) * (
            T * model.mu_at_zero / n_steps + model.sigma_at_zero * incs[idx]
        )
        flags[idx] = _kernels.omega_flags_batch(
            np.ascontiguousarray(ealpha),
            np.ascontiguousarray(sb),
            np.ascontiguousarray(base[idx]),
            r,
        )
    return flags, False


@dataclass
class IntroDominationResult:
    """Terminal-value domination by the running Brownian maximum.

    For the additive-noise cubic model started at zero the terminal
    Euler value obeys |Y_N| <= 2 sup_t |W_t| on the event
    {sup_t |W_t| <= sqrt(N / (2T))}.  sup_w here is the grid maximum of
    the tabulated path, recorded together with its depth.
    """

    n_steps: int
    grid_depth: int
    sup_w: float
    event_cutoff: float
    member: bool
    bound: float
    holds: Optional[bool]  # None when off the event (nothing is claimed)


def intro_domination(traj: EulerTrajectory, path: BrownianPath) -> IntroDominationResult:
    model = traj.model
    if (
        model.kernel_kind != _kernels.KIND_CUBIC
        or model.kernel_params[0] != 1.0
        or model.has_random_initial
        or model.initial_value() != 0.0
    ):
        raise ValueError(
            "terminal domination by 2 sup|W| needs the cubic model with "
            "unit noise and zero initial value"
        )
    if path.horizon_T != model.horizon_T:
        raise ValueError("path horizon does not match the model")
    sup_w = sup_abs(path)
    cutoff = math.sqrt(traj.n_steps / (2.0 * model.horizon_T))
    member = sup_w <= cutoff
    bound = 2.0 * sup_w
    holds = bool(abs(traj.terminal) <= bound) if member else None
    return IntroDominationResult(
        n_steps=traj.n_steps,
        grid_depth=path.depth,
        sup_w=sup_w,
        event_cutoff=cutoff,
        member=member,
        bound=bound,
        holds=holds,
    )
