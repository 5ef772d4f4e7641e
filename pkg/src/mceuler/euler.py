"""Euler-Maruyama trajectories and the drift-only blow-up demo.

The scheme is Y_{n+1} = Y_n + (T/N) mu(Y_n) + sigma(Y_n) dW_n.  For
superlinear drift this recursion can leave any bounded set in a handful
of steps once |Y| crosses roughly sqrt(2N/T), which is the whole reason
the restricted estimators exist.  Overflow is deliberately allowed to
saturate to inf/NaN; the trajectory records where finiteness was lost
instead of raising.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .brownian import BrownianPath, grid_index
from .models import SdeModel


@dataclass
class EulerTrajectory:
    model: SdeModel
    n_steps: int
    initial: float
    increments: np.ndarray
    values: np.ndarray  # length n_steps + 1, values[0] == initial
    first_nonfinite: Optional[int]  # step index, None if all finite

    @property
    def is_finite(self) -> bool:
        return self.first_nonfinite is None

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


def _first_nonfinite(values: np.ndarray) -> Optional[int]:
    bad = np.flatnonzero(~np.isfinite(values))
    return int(bad[0]) if bad.size else None


def euler_path(
    model: SdeModel,
    n_steps: int,
    incs: np.ndarray,
    xi: Optional[float] = None,
) -> EulerTrajectory:
    """Run the scheme over the given increments.

    incs must have length n_steps.  xi defaults to the model's
    deterministic initial value; models with a random initial need the
    realized value passed in explicitly.
    """
    incs = np.asarray(incs, dtype=np.float64)
    if incs.ndim != 1 or incs.shape[0] != n_steps:
        raise ValueError("need exactly n_steps=%d increments" % n_steps)
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    if xi is None:
        if model.has_random_initial:
            raise ValueError("model has a random initial value, pass xi")
        xi = model.initial_value()
    dt = model.horizon_T / n_steps
    values = euler_values_batch(model, dt, np.asarray([float(xi)]), incs[None, :])[0]
    return EulerTrajectory(
        model=model,
        n_steps=int(n_steps),
        initial=float(xi),
        increments=incs,
        values=values,
        first_nonfinite=_first_nonfinite(values),
    )


def euler_values_batch(
    model: SdeModel, dt: float, xi: np.ndarray, incs: np.ndarray
) -> np.ndarray:
    """(R, N+1) trajectory values for a batch of replicates.

    Models with a kernel id run on the selected backend; anything else
    steps through the model's own callables, vectorized across rows.
    """
    if model.kernel_kind is not None:
        c1, c2 = model.kernel_params
        return _kernels.euler_values_batch(model.kernel_kind, c1, c2, dt, xi, incs)
    out = np.empty((incs.shape[0], incs.shape[1] + 1), dtype=np.float64)
    y = xi.astype(np.float64, copy=True)
    out[:, 0] = y
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(incs.shape[1]):
            y = y + dt * np.asarray(model.mu(y)) + np.asarray(model.sigma(y)) * incs[:, n]
            out[:, n + 1] = y
    return out


def euler_terminal_batch(
    model: SdeModel, dt: float, xi: np.ndarray, incs: np.ndarray
) -> np.ndarray:
    """Terminal values only; saves the (R, N+1) allocation."""
    if model.kernel_kind is not None:
        c1, c2 = model.kernel_params
        return _kernels.euler_terminal_batch(model.kernel_kind, c1, c2, dt, xi, incs)
    y = xi.astype(np.float64, copy=True)
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(incs.shape[1]):
            y = y + dt * np.asarray(model.mu(y)) + np.asarray(model.sigma(y)) * incs[:, n]
    return y


def interpolate(traj: EulerTrajectory, t: float, path: BrownianPath) -> float:
    """Time-continuous Euler value at a dyadic grid time of path.

    Between scheme nodes the process moves with frozen coefficients:
    Ybar_t = Y_n + (t - t_n) mu(Y_n) + sigma(Y_n) (W_t - W_{t_n}).
    At scheme nodes the tabulated value is returned directly, so the
    interpolant agrees with the trajectory exactly there.
    """
    T = traj.model.horizon_T
    if path.horizon_T != T:
        raise ValueError("path horizon %r != model horizon %r" % (path.horizon_T, T))
    if not 0.0 <= t <= T:
        raise ValueError("t=%r outside [0, %r]" % (t, T))
    j = grid_index(path, t)  # raises off-grid
    n_steps = traj.n_steps
    n_grid = 2**path.depth
    if n_grid % n_steps != 0:
        raise ValueError(
            "scheme grid with %d steps is not nested in path depth %d"
            % (n_steps, path.depth)
        )
    stride = n_grid // n_steps
    if j % stride == 0:
        return float(traj.values[j // stride])
    n = j // stride
    t_n = n * (T / n_steps)
    y = float(traj.values[n])
    w_t = float(path.values[j])
    w_n = float(path.values[n * stride])
    mu = float(traj.model.mu(y))
    sig = float(traj.model.sigma(y))
    return y + (t - t_n) * mu + sig * (w_t - w_n)


@dataclass
class DivergenceDemo:
    model: SdeModel
    x0: float
    n_steps: int
    threshold: float
    steps_to_exceed: Optional[int]  # first step with |Y| >= threshold
    values: np.ndarray  # trajectory up to and including that step


def divergence_demo(
    model: SdeModel,
    x0: float,
    n_steps: int,
    threshold: float = 1e50,
) -> DivergenceDemo:
    """Iterate the noise-free scheme Y <- Y + (T/N) mu(Y) from x0.

    Demonstrates the deterministic double-exponential escape of the
    Euler recursion under superlinear drift: once |Y| is large the
    cubic term cubes it every step.  threshold must exceed |x0|.
    Overflow saturates to inf, which counts as exceeding.
    """
    if not threshold > abs(x0):
        raise ValueError("threshold must exceed |x0|")
    if n_steps < 1:
        raise ValueError("n_steps must be at least 1")
    dt = np.float64(model.horizon_T / n_steps)
    y = np.float64(x0)
    values = [float(y)]
    hit: Optional[int] = None
    with np.errstate(over="ignore", invalid="ignore"):
        for n in range(1, n_steps + 1):
            # feed the numpy scalar through so coefficient code written
            # with ** saturates instead of raising OverflowError
            y = y + dt * np.float64(model.mu(y))
            values.append(float(y))
            if not abs(y) < threshold:  # catches inf and NaN too
                hit = n
                break
    return DivergenceDemo(
        model=model,
        x0=float(x0),
        n_steps=int(n_steps),
        threshold=float(threshold),
        steps_to_exceed=hit,
        values=np.asarray(values, dtype=np.float64),
    )
