"""Scalar SDE model definitions and coefficient validation.

A model is dX_t = mu(X_t) dt + sigma(X_t) dW_t on [0, T] with a
deterministic or random initial value.  Coefficients are supplied with
analytic derivatives up to order four so that smoothness-based bounds
can be evaluated exactly rather than by finite differences.

The polynomial growth envelope L * (1 + |x|**delta) must dominate every
stored derivative, mu must satisfy a one-sided Lipschitz condition with
the same constant, and sigma must be globally Lipschitz.  Builtin
models record constants that make these bounds hold with room to
spare; validate_growth spot-checks them numerically on a grid.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from . import _kernels

CoeffFn = Callable[[Union[float, np.ndarray]], Union[float, np.ndarray]]


def _constfn(c: float) -> CoeffFn:
    # Elementwise constant that follows the input shape.
    c = float(c)

    def f(x):
        out = np.full(np.shape(x), c)
        return out if out.shape else c

    return f


@dataclass(frozen=True)
class SdeModel:
    """One scalar SDE with analytic coefficient derivatives.

    drift and diffusion hold the coefficient and its first four
    derivatives as elementwise callables (index = derivative order).
    growth_L and growth_delta parameterize the polynomial envelope,
    sup_mu_prime_unit is sup of |mu'| over [-1, 1], used by the event
    radius.  initial is either a float or a callable mapping one
    standard normal draw to a start value.

    kernel_kind/kernel_params select a compiled fast path when the
    model matches one of the builtin coefficient shapes; None means
    every consumer falls back to generic per-step evaluation.
    """

    name: str
    drift: Sequence[CoeffFn]
    diffusion: Sequence[CoeffFn]
    growth_L: float
    growth_delta: float
    sup_mu_prime_unit: float
    initial: Union[float, Callable[[float], float]]
    horizon_T: float = 1.0
    kernel_kind: Optional[int] = None
    kernel_params: tuple = (0.0, 0.0)

    def __post_init__(self):
        if len(self.drift) != 5 or len(self.diffusion) != 5:
            raise ValueError("drift and diffusion need derivative orders 0..4")
        if not self.growth_L > 0.0:
            raise ValueError("growth_L must be positive")
        if not self.growth_delta > 1.0:
            raise ValueError("growth_delta must exceed 1")
        if not self.horizon_T > 0.0:
            raise ValueError("horizon_T must be positive")

    def mu(self, x):
        return self.drift[0](x)

    def sigma(self, x):
        return self.diffusion[0](x)

    @property
    def mu_at_zero(self) -> float:
        return float(self.drift[0](0.0))

    @property
    def sigma_at_zero(self) -> float:
        return float(self.diffusion[0](0.0))

    @property
    def has_random_initial(self) -> bool:
        return callable(self.initial)

    def initial_value(self, z: Optional[float] = None) -> float:
        """Realize the initial value, consuming draw z when random."""
        if callable(self.initial):
            if z is None:
                raise ValueError("model has a random initial value, pass a draw")
            return float(self.initial(z))
        return float(self.initial)


def eval_coefficient(model: SdeModel, which: str, order: int, x):
    """Evaluate a coefficient derivative elementwise.

    which is "drift" or "sigma"; order is 0..4.  Scalar input gives a
    float back, array input an array of the same shape.
    """
    if which == "drift":
        fns = model.drift
    elif which == "sigma":
        fns = model.diffusion
    else:
        raise ValueError("which must be 'drift' or 'sigma', got %r" % which)
    if not 0 <= int(order) <= 4:
        raise ValueError("derivative order must be in 0..4, got %r" % order)
    out = fns[int(order)](x)
    if np.ndim(x) == 0:
        return float(out)
    return np.asarray(out, dtype=np.float64)


def cubic(sigma_bar: float = 1.0, x0: float = 0.0, T: float = 1.0) -> SdeModel:
    """dX = -X^3 dt + sigma_bar dW.

    The third drift derivative is the constant -6, so the growth
    constant is max(6, sigma_bar).  sup_{[-1,1]} |mu'| = 3.
    """
    sb = float(sigma_bar)
    if sb < 0.0:
        raise ValueError("sigma_bar must be nonnegative")
    drift = (
        lambda x: -(x * x * x),  # keep in sync with _kernels KIND_CUBIC
        lambda x: -3.0 * (x * x),
        lambda x: -6.0 * x,
        _constfn(-6.0),
        _constfn(0.0),
    )
    diffusion = (_constfn(sb), _constfn(0.0), _constfn(0.0), _constfn(0.0), _constfn(0.0))
    return SdeModel(
        name="cubic",
        drift=drift,
        diffusion=diffusion,
        growth_L=max(6.0, sb),
        growth_delta=3.0,
        sup_mu_prime_unit=3.0,
        initial=float(x0),
        horizon_T=float(T),
        kernel_kind=_kernels.KIND_CUBIC,
        kernel_params=(sb, 0.0),
    )


def ginzburg_landau(x0: float = 1.0, T: float = 1.0) -> SdeModel:
    """dX = (X/2 - X^3) dt + X dW.

    With X_0 = 1 and T = 1 the terminal value has the closed form
    exp(W_1) / sqrt(1 + 2 * int_0^1 exp(2 W_s) ds), which reference.py
    uses to build a high-accuracy second-moment target.
    """
    drift = (
        lambda x: 0.5 * x - x * x * x,  # keep in sync with _kernels KIND_GINZBURG_LANDAU
        lambda x: 0.5 - 3.0 * (x * x),
        lambda x: -6.0 * x,
        _constfn(-6.0),
        _constfn(0.0),
    )
    diffusion = (
        lambda x: np.positive(x) if np.ndim(x) else float(x),
        _constfn(1.0),
        _constfn(0.0),
        _constfn(0.0),
        _constfn(0.0),
    )
    return SdeModel(
        name="ginzburg_landau",
        drift=drift,
        diffusion=diffusion,
        growth_L=6.0,
        growth_delta=3.0,
        sup_mu_prime_unit=2.5,
        initial=float(x0),
        horizon_T=float(T),
        kernel_kind=_kernels.KIND_GINZBURG_LANDAU,
        kernel_params=(0.0, 0.0),
    )


def gbm(a: float = 0.5, b: float = 0.5, x0: float = 1.0, T: float = 1.0) -> SdeModel:
    """dX = a X dt + b X dW, geometric Brownian motion.

    Moments are closed form: E[X_T^p] = x0^p exp(p a T + p(p-1) b^2 T / 2),
    which makes this the exact-oracle model for estimator tests.  The
    coefficients are globally Lipschitz, so the growth constant is just
    max(|a|, |b|), floored at 1 to keep the envelope positive.
    """
    a = float(a)
    b = float(b)
    drift = (lambda x: a * x, _constfn(a), _constfn(0.0), _constfn(0.0), _constfn(0.0))
    diffusion = (lambda x: b * x, _constfn(b), _constfn(0.0), _constfn(0.0), _constfn(0.0))
    return SdeModel(
        name="gbm",
        drift=drift,
        diffusion=diffusion,
        growth_L=max(abs(a), abs(b), 1.0),
        growth_delta=3.0,
        sup_mu_prime_unit=abs(a),
        initial=float(x0),
        horizon_T=float(T),
        kernel_kind=_kernels.KIND_GBM,
        kernel_params=(a, b),
    )


BUILTIN_FACTORIES = {
    "cubic": cubic,
    "ginzburg_landau": ginzburg_landau,
    "gbm": gbm,
}


def get_model(name: str, **params) -> SdeModel:
    """Instantiate a builtin model by name with factory keyword params."""
    try:
        factory = BUILTIN_FACTORIES[name]
    except KeyError:
        raise ValueError(
            "unknown model %r, expected one of %s" % (name, sorted(BUILTIN_FACTORIES))
        ) from None
    return factory(**params)


def builtin_models() -> list:
    return [cubic(), ginzburg_landau(), gbm()]


@dataclass(frozen=True)
class GrowthViolation:
    kind: str  # "envelope", "one_sided_lipschitz", "sigma_lipschitz"
    which: str  # "drift" or "sigma" ("" for pair conditions)
    order: int  # derivative order, -1 for pair conditions
    x: float
    y: float  # second point for pair conditions, NaN otherwise
    lhs: float
    rhs: float


@dataclass
class ValidationReport:
    model: str
    grid_min: float
    grid_max: float
    grid_size: int
    pair_samples: int
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations


# Inequalities are mathematical statements checked in floats, so a hair
# of multiplicative slack keeps exact-equality cases (|mu'''| = 6 L at
# x = 0 for the cubic model) from flapping on rounding.
_SLACK = 1e-9


def validate_growth(
    model: SdeModel,
    grid: np.ndarray,
    pair_samples: int = 256,
    seed: int = 0,
) -> ValidationReport:
    """Numerically spot-check the model's stated regularity constants.

    On every grid point: |d^n mu|, |d^n sigma| <= L (1 + |x|^delta) for
    n = 0..4.  On sampled point pairs from [grid.min(), grid.max()]:
    the one-sided Lipschitz bound (x-y)(mu(x)-mu(y)) <= L (x-y)^2 and
    the global sigma Lipschitz bound |sigma(x)-sigma(y)| <= L |x-y|.
    The report only covers the tested range; it is evidence, not proof.
    """
    from .brownian import RandomStream

    grid = np.asarray(grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must be a 1-d array with at least 2 points")
    report = ValidationReport(
        model=model.name,
        grid_min=float(grid.min()),
        grid_max=float(grid.max()),
        grid_size=int(grid.size),
        pair_samples=int(pair_samples),
    )
    L = model.growth_L
    envelope = L * (1.0 + np.abs(grid) ** model.growth_delta)
    for which in ("drift", "sigma"):
        for order in range(5):
            vals = np.abs(eval_coefficient(model, which, order, grid))
            bad = np.flatnonzero(vals > envelope * (1.0 + _SLACK))
            for i in bad:
                report.violations.append(
                    GrowthViolation(
                        kind="envelope",
                        which=which,
                        order=order,
                        x=float(grid[i]),
                        y=float("nan"),
                        lhs=float(vals[i]),
                        rhs=float(envelope[i]),
                    )
                )

    stream = RandomStream(seed=seed, replicate=0)
    u = stream.uniforms_at(0, 2 * int(pair_samples))
    lo, hi = float(grid.min()), float(grid.max())
    xs = lo + (hi - lo) * u[:pair_samples]
    ys = lo + (hi - lo) * u[pair_samples:]
    mux = np.asarray(model.mu(xs), dtype=np.float64)
    muy = np.asarray(model.mu(ys), dtype=np.float64)
    sgx = np.asarray(model.sigma(xs), dtype=np.float64)
    sgy = np.asarray(model.sigma(ys), dtype=np.float64)

    one_sided = (xs - ys) * (mux - muy)
    bound = L * (xs - ys) ** 2
    bad = np.flatnonzero(one_sided > bound * (1.0 + _SLACK) + _SLACK)
    for i in bad:
        report.violations.append(
            GrowthViolation(
                kind="one_sided_lipschitz",
                which="",
                order=-1,
                x=float(xs[i]),
                y=float(ys[i]),
                lhs=float(one_sided[i]),
                rhs=float(bound[i]),
            )
        )

    sig_diff = np.abs(sgx - sgy)
    sig_bound = L * np.abs(xs - ys)
    bad = np.flatnonzero(sig_diff > sig_bound * (1.0 + _SLACK) + _SLACK)
    for i in bad:
        report.violations.append(
            GrowthViolation(
                kind="sigma_lipschitz",
                which="",
                order=-1,
                x=float(xs[i]),
                y=float(ys[i]),
                lhs=float(sig_diff[i]),
                rhs=float(sig_bound[i]),
            )
        )
    return report
