import numpy as np
import pytest

from mceuler.models import (
    SdeModel,
    builtin_models,
    cubic,
    eval_coefficient,
    gbm,
    get_model,
    ginzburg_landau,
    validate_growth,
)


def _fd(fn, x, h=1e-4):
    return (fn(x + h) - fn(x - h)) / (2.0 * h)


@pytest.mark.parametrize("model", builtin_models(), ids=lambda m: m.name)
@pytest.mark.parametrize("which", ["drift", "sigma"])
@pytest.mark.parametrize("order", [1, 2, 3, 4])
def test_derivatives_match_finite_differences(model, which, order):
    xs = np.linspace(-3.0, 3.0, 13)
    lower = lambda x: eval_coefficient(model, which, order - 1, x)
    analytic = eval_coefficient(model, which, order, xs)
    numeric = _fd(lower, xs)
    assert np.allclose(analytic, numeric, rtol=1e-5, atol=1e-6)


@pytest.mark.parametrize("model", builtin_models(), ids=lambda m: m.name)
def test_builtin_constants_validate_on_wide_grid(model):
    report = validate_growth(model, np.linspace(-10.0, 10.0, 401), pair_samples=500)
    assert report.passed, report.violations[:3]
    assert report.grid_min == -10.0 and report.grid_max == 10.0


@pytest.mark.parametrize("model", builtin_models(), ids=lambda m: m.name)
def test_sup_mu_prime_unit_covers_unit_interval(model):
    xs = np.linspace(-1.0, 1.0, 10_001)
    observed = np.abs(eval_coefficient(model, "drift", 1, xs)).max()
    assert observed <= model.sup_mu_prime_unit + 1e-12


def test_validate_growth_flags_understated_constant():
    # same cubic drift but with L too small for the third derivative
    base = cubic()
    lying = SdeModel(
        name="cubic_bad_L",
        drift=base.drift,
        diffusion=base.diffusion,
        growth_L=2.0,
        growth_delta=3.0,
        sup_mu_prime_unit=3.0,
        initial=0.0,
    )
    report = validate_growth(lying, np.linspace(-2.0, 2.0, 101))
    assert not report.passed
    kinds = {v.kind for v in report.violations}
    assert "envelope" in kinds


def test_validate_growth_flags_one_sided_violation():
    # upward-sloping cubic drift has no one-sided Lipschitz constant
    runaway = SdeModel(
        name="runaway",
        drift=(
            lambda x: x * x * x,
            lambda x: 3.0 * (x * x),
            lambda x: 6.0 * x,
            lambda x: np.full(np.shape(x), 6.0) if np.ndim(x) else 6.0,
            lambda x: np.zeros(np.shape(x)) if np.ndim(x) else 0.0,
        ),
        diffusion=cubic().diffusion,
        growth_L=6.0,
        growth_delta=3.0,
        sup_mu_prime_unit=3.0,
        initial=0.0,
    )
    report = validate_growth(runaway, np.linspace(-5.0, 5.0, 101), pair_samples=400)
    assert any(v.kind == "one_sided_lipschitz" for v in report.violations)


def test_cubic_parameters():
    m = cubic(sigma_bar=2.5, x0=0.25, T=2.0)
    assert m.mu(2.0) == -8.0
    assert m.sigma(123.0) == 2.5
    assert m.growth_L == 6.0  # max(6, 2.5)
    assert m.initial_value() == 0.25
    assert m.horizon_T == 2.0
    assert cubic(sigma_bar=9.0).growth_L == 9.0
    with pytest.raises(ValueError):
        cubic(sigma_bar=-1.0)


def test_ginzburg_landau_parameters():
    m = ginzburg_landau()
    assert m.mu(2.0) == 2.0 * 0.5 - 8.0
    assert m.sigma(3.0) == 3.0
    assert m.initial_value() == 1.0
    assert m.sup_mu_prime_unit == 2.5
    assert m.growth_L == 6.0


def test_gbm_parameters_and_floor():
    m = gbm(a=0.5, b=0.25)
    assert m.mu(4.0) == 2.0
    assert m.sigma(4.0) == 1.0
    assert m.growth_L == 1.0  # floored
    assert gbm(a=3.0, b=0.0).growth_L == 3.0
    assert gbm(a=0.0, b=0.0).growth_L == 1.0
    assert gbm(a=0.0, b=0.0).sup_mu_prime_unit == 0.0


def test_eval_coefficient_shapes_and_validation():
    m = cubic()
    assert isinstance(eval_coefficient(m, "drift", 0, 1.5), float)
    out = eval_coefficient(m, "drift", 3, np.zeros(7))
    assert out.shape == (7,) and (out == -6.0).all()
    with pytest.raises(ValueError):
        eval_coefficient(m, "volatility", 0, 1.0)
    with pytest.raises(ValueError):
        eval_coefficient(m, "drift", 5, 1.0)


def test_initial_value_paths():
    det = cubic(x0=0.5)
    assert not det.has_random_initial
    assert det.initial_value() == 0.5
    assert det.initial_value(z=3.0) == 0.5  # draw ignored when deterministic

    rand = SdeModel(
        name="random_start",
        drift=gbm().drift,
        diffusion=gbm().diffusion,
        growth_L=1.0,
        growth_delta=3.0,
        sup_mu_prime_unit=0.5,
        initial=lambda z: 1.0 + 0.1 * z,
    )
    assert rand.has_random_initial
    assert rand.initial_value(z=2.0) == 1.2
    with pytest.raises(ValueError):
        rand.initial_value()


def test_model_invariants_enforced():
    good = cubic()
    with pytest.raises(ValueError):
        SdeModel("m", good.drift[:3], good.diffusion, 6.0, 3.0, 3.0, 0.0)
    with pytest.raises(ValueError):
        SdeModel("m", good.drift, good.diffusion, 0.0, 3.0, 3.0, 0.0)
    with pytest.raises(ValueError):
        SdeModel("m", good.drift, good.diffusion, 6.0, 1.0, 3.0, 0.0)
    with pytest.raises(ValueError):
        SdeModel("m", good.drift, good.diffusion, 6.0, 3.0, 3.0, 0.0, horizon_T=-1.0)


def test_get_model_registry():
    assert get_model("cubic").name == "cubic"
    assert get_model("gbm", a=0.1, b=0.2).kernel_params == (0.1, 0.2)
    with pytest.raises(ValueError):
        get_model("heston")


def test_mu_at_zero_and_sigma_at_zero():
    assert cubic(sigma_bar=3.0).sigma_at_zero == 3.0
    assert cubic().mu_at_zero == 0.0
    assert ginzburg_landau().sigma_at_zero == 0.0
    assert gbm(a=2.0, b=1.0).mu_at_zero == 0.0
