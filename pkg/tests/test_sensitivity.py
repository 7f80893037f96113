"""Forward-mode derivatives vs central finite differences."""

import numpy as np
import pytest

from scmap.diffusion import DiffusionParams, block_forward
from scmap.errors import ArgumentError
from scmap.patch_graph import build_grid_graph
from scmap.sensitivity import (
    Dual,
    dual_sensitivity,
    dual_tanh,
    finite_difference,
    gradcheck,
    scalar_output,
)
from scmap.sensitivity import _dual_block  # mirror fidelity check


# --- Dual arithmetic ---------------------------------------------------------


def test_dual_sum_and_product_rules():
    x = Dual(3.0, 1.0)  # d/dx at x = 3
    y = x * x + 2.0 * x + 5.0
    assert y.val == 20.0
    assert y.dot == 8.0  # 2x + 2


def test_dual_quotient_rule():
    x = Dual(2.0, 1.0)
    y = 1.0 / x
    assert y.val == 0.5
    assert y.dot == -0.25  # -1/x^2


def test_dual_subtraction_both_sides():
    x = Dual(2.0, 1.0)
    assert (x - 1.0).dot == 1.0
    assert (1.0 - x).dot == -1.0
    assert (-x).dot == -1.0


def test_dual_matmul_product_rule():
    a = Dual(np.array([[1.0, 2.0], [3.0, 4.0]]), np.eye(2))
    b = Dual(np.array([[5.0], [6.0]]), np.array([[1.0], [1.0]]))
    y = a @ b
    assert y.val.tolist() == [[17.0], [39.0]]
    # a' b + a b'
    expected = np.eye(2) @ b.val + a.val @ b.dot
    assert y.dot.tolist() == expected.tolist()


def test_dual_structure_ops():
    a = Dual(np.arange(6.0).reshape(2, 3), np.ones((2, 3)))
    assert a.T.val.shape == (3, 2) and a.T.dot.shape == (3, 2)
    assert a.reshape(6).val.tolist() == list(range(6))
    m = a.mean(axis=(0, 1))
    assert m.val == 2.5 and m.dot == 1.0


def test_dual_tanh_derivative():
    x = Dual(0.7, 1.0)
    y = dual_tanh(x)
    t = np.tanh(0.7)
    assert y.val == t
    assert y.dot == pytest.approx(1.0 - t * t, rel=1e-15)


def test_dual_lift_constants_have_zero_derivative():
    c = Dual.lift(4.2)
    assert c.val == 4.2 and c.dot == 0.0
    assert Dual.lift(c) is c


# --- mirror fidelity ----------------------------------------------------------


def test_dual_values_match_production_block_bitwise(rng):
    # the mirror repeats the production ops in the same order, so its value
    # channel must agree bit for bit, not just approximately
    g = build_grid_graph(3, 3)
    attn = rng.random((3, 3))
    sem = 0.5 + rng.random((3, 3, 4))
    params = DiffusionParams(num_layers=1, lam=(0.8,), beta=(0.4,), alpha=0.01, iterations=3)
    prod_attn, prod_sem = block_forward(attn, sem, params, g, 0)
    da, ds = _dual_block(
        Dual(attn, np.zeros_like(attn)),
        Dual(sem, np.zeros_like(sem)),
        g,
        params,
        Dual(0.8, 1.0),
        Dual(0.4, 0.0),
    )
    assert np.array_equal(da.val, prod_attn)
    assert np.array_equal(ds.val, prod_sem)


# --- exact-zero cases -----------------------------------------------------------


def test_unused_extra_parameter_has_zero_derivative(rng):
    g = build_grid_graph(2, 2)
    attn = rng.random((2, 2))
    sem = rng.random((2, 2, 3))
    params = DiffusionParams(num_layers=1, lam=(0.9, 0.7), beta=(0.5, 0.5))
    assert dual_sensitivity(attn, sem, params, g, "lambda", 1) == 0.0
    assert dual_sensitivity(attn, sem, params, g, "beta", 1) == 0.0


def test_beta_derivative_zero_when_attention_is_zero(rng):
    # zero attention diffuses to zero; the shrink is stationary in beta there
    g = build_grid_graph(2, 2)
    sem = rng.random((2, 2, 3))
    params = DiffusionParams(num_layers=2, lam=(0.9, 0.8), beta=(0.5, 0.6))
    for layer in range(2):
        assert dual_sensitivity(np.zeros((2, 2)), sem, params, g, "beta", layer) == 0.0
        assert finite_difference(np.zeros((2, 2)), sem, params, g, "beta", layer) == 0.0


# --- agreement with finite differences -------------------------------------------


def _random_fixture(seed, h=3, w=3, c=3, layers=2):
    r = np.random.default_rng(seed)
    attn = r.random((h, w))
    sem = 0.5 + r.random((h, w, c))
    params = DiffusionParams(
        num_layers=layers,
        lam=tuple(0.8 + 0.4 * r.random(layers)),
        beta=tuple(0.3 + 0.4 * r.random(layers)),
        alpha=0.01,
        iterations=3,
    )
    return attn, sem, params, build_grid_graph(h, w)


@pytest.mark.parametrize("seed", [0, 1, 2, 3])
def test_gradcheck_agrees_on_random_fixtures(seed):
    attn, sem, params, g = _random_fixture(seed)
    rows = gradcheck(attn, sem, params, g)
    assert len(rows) == 4  # 2 targets x 2 layers
    for name, dual, fd, rel, ok in rows:
        assert ok, f"{name}: dual={dual} fd={fd} rel={rel}"


def test_gradcheck_covers_both_signs_and_classes():
    attn, sem, params, g = _random_fixture(7)
    appendix = DiffusionParams(
        num_layers=params.num_layers,
        lam=params.lam,
        beta=params.beta,
        alpha=params.alpha,
        iterations=params.iterations,
        laplacian_sign="appendix",
    )
    for p in (params, appendix):
        for cls in (0, 2):
            for name, dual, fd, rel, ok in gradcheck(attn, sem, p, g, class_idx=cls):
                assert ok, f"{name} cls={cls}: rel={rel}"


def test_gradcheck_raw_filter_mode():
    attn, sem, params, g = _random_fixture(11)
    raw = DiffusionParams(
        num_layers=params.num_layers,
        lam=params.lam,
        beta=params.beta,
        alpha=params.alpha,
        iterations=params.iterations,
        filter_input="raw",
    )
    for name, dual, fd, rel, ok in gradcheck(attn, sem, raw, g):
        assert ok, f"{name}: rel={rel}"


def test_fd_error_shrinks_with_step():
    attn, sem, params, g = _random_fixture(5)
    exact = dual_sensitivity(attn, sem, params, g, "lambda", 0)
    coarse = abs(finite_difference(attn, sem, params, g, "lambda", 0, h=1e-2) - exact)
    fine = abs(finite_difference(attn, sem, params, g, "lambda", 0, h=1e-3) - exact)
    # central differences are O(h^2); two decades of h gives ~1e4, allow slack
    assert fine < coarse / 4


def test_gradcheck_row_names():
    attn, sem, params, g = _random_fixture(9, layers=2)
    names = [r[0] for r in gradcheck(attn, sem, params, g)]
    assert names == ["lambda[0]", "lambda[1]", "beta[0]", "beta[1]"]


# --- validation -------------------------------------------------------------------


def test_sensitivity_validation():
    attn, sem, params, g = _random_fixture(13)
    with pytest.raises(ArgumentError):
        dual_sensitivity(attn, sem, params, g, "gamma", 0)
    with pytest.raises(ArgumentError):
        dual_sensitivity(attn, sem, params, g, "lambda", 5)
    with pytest.raises(ArgumentError):
        finite_difference(attn, sem, params, g, "lambda", 0, h=0.0)
    with pytest.raises(ArgumentError):
        scalar_output(attn, sem, params, g, class_idx=99)


def test_fd_rejects_beta_leaving_domain():
    attn, sem, _, g = _random_fixture(17)
    params = DiffusionParams(num_layers=1, lam=(1.0,), beta=(0.9999,))
    with pytest.raises(ArgumentError):
        finite_difference(attn, sem, params, g, "beta", 0, h=1e-3)
