import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sublab import expr
from sublab.expr import EvaluationError, ParseError, parse_map
from sublab.fixtures import builtin_corpus

PLANE = "domain 2\ncodomain 1\nF1 = x1*x2 + sin(x1)\n"


def test_evaluate_simple_map():
    fm = parse_map(PLANE)
    assert fm.domain_dim == 2 and fm.codomain_dim == 1
    assert expr.evaluate(fm, [1.0, 2.0])[0] == pytest.approx(2.0 + math.sin(1.0), abs=1e-15)


def test_params_bound_at_evaluation():
    fm = parse_map("domain 1\ncodomain 1\nparam a\nF1 = a*x1 # scaled\n")
    assert expr.evaluate(fm, [3.0], {"a": 2.0})[0] == 6.0
    assert expr.evaluate(fm, [3.0], {"a": -1.0})[0] == -3.0
    with pytest.raises(EvaluationError, match="unbound"):
        expr.evaluate(fm, [3.0], {})


@pytest.mark.parametrize("source, line, col, fragment", [
    ("domain 2\ncodomain 1\nF1 = x1 + x3\n", 3, 11, "exceeds domain"),
    ("domain 2\ncodomain 1\nF1 = y + x1\n", 3, 6, "undeclared"),
    ("domain 2\ncodomain 1\nF1 = x1 $ x2\n", 3, 9, "unexpected character"),
    ("domain 2\ncodomain 1\nF1 = (x1 + x2\n", 3, 14, "expected ')'"),
    ("domain 2\ncodomain 2\nF1 = x1\n", 3, 1, "dimension mismatch"),
    ("domain 2\ncodomain 1\nF2 = x1\n", 3, 1, "expected F1"),
    ("codomain 1\nF1 = x1\n", 1, 1, "missing domain"),
    ("domain 2\ncodomain 1\nG1 = x1\n", 3, 1, "unrecognised"),
])
def test_parse_errors_carry_position(source, line, col, fragment):
    with pytest.raises(ParseError) as info:
        parse_map(source)
    assert (info.value.line, info.value.col) == (line, col)
    assert fragment in str(info.value)


@pytest.mark.parametrize("body, point", [
    ("log(x1)", [0.0, 1.0]),
    ("sqrt(x1)", [-1.0, 1.0]),
    ("1/x1", [0.0, 1.0]),
])
def test_domain_errors_name_the_component(body, point):
    fm = parse_map(f"domain 2\ncodomain 2\nF1 = x2\nF2 = {body}\n")
    with pytest.raises(EvaluationError) as info:
        expr.jacobian(fm, point)
    assert info.value.component == 2


def _central_jacobian(fm, p, params, h=1e-6):
    cols = []
    for j in range(fm.domain_dim):
        e = np.zeros(fm.domain_dim)
        e[j] = h
        cols.append((expr.evaluate(fm, p + e, params) - expr.evaluate(fm, p - e, params)) / (2 * h))
    return np.column_stack(cols)


@pytest.mark.parametrize("fx", builtin_corpus(), ids=lambda f: f.name)
def test_jacobian_matches_finite_differences(fx):
    fm = fx.map
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        p = rng.uniform(-2, 2, fm.domain_dim)
        if fx.regular and not fx.regular(p):
            continue
        worst = max(worst, np.abs(expr.jacobian(fm, p, fx.params) - _central_jacobian(fm, p, fx.params)).max())
    assert worst <= 1e-6


def test_directional_agrees_with_jacobian():
    fm = parse_map("domain 3\ncodomain 2\nF1 = exp(x1)*cos(x2)\nF2 = x3/(1 + x1*x1)\n")
    p, u = np.array([0.3, -0.7, 1.1]), np.array([1.0, 2.0, -0.5])
    dv = expr.directional(fm, p, {}, u)
    np.testing.assert_allclose(dv.value, expr.evaluate(fm, p))
    np.testing.assert_allclose(dv.derivative, expr.jacobian(fm, p) @ u, atol=1e-14)


def test_second_derivative_against_hessian_oracle():
    # F = x1^2 x2 + sin(x2) x3: Hessian entries written out by hand
    fm = parse_map("domain 3\ncodomain 1\nF1 = x1*x1*x2 + sin(x2)*x3\n")
    p = np.array([0.4, 1.3, -0.8])
    x1, x2, x3 = p
    hess = np.array([[2 * x2, 2 * x1, 0.0],
                     [2 * x1, -math.sin(x2) * x3, math.cos(x2)],
                     [0.0, math.cos(x2), 0.0]])
    rng = np.random.default_rng(1)
    for _ in range(10):
        u, v = rng.normal(size=3), rng.normal(size=3)
        got = expr.directional_second(fm, p, {}, u, v)[0]
        assert got == pytest.approx(u @ hess @ v, abs=1e-13)
        assert got == pytest.approx(expr.directional_second(fm, p, {}, v, u)[0], abs=1e-13)


def test_directional_second_rejects_zero_direction():
    fm = parse_map(PLANE)
    with pytest.raises(ValueError):
        expr.directional_second(fm, [1.0, 1.0], {}, [0.0, 0.0], [1.0, 0.0])


def test_evaluation_is_deterministic():
    fm = builtin_corpus()[4].map
    p = np.linspace(-1, 1, 8)
    a = expr.jacobian(fm, p, {"alpha": 0.3, "beta": 1.1})
    b = expr.jacobian(fm, p, {"alpha": 0.3, "beta": 1.1})
    assert a.tobytes() == b.tobytes()


# expression trees built by hypothesis, checked against Python's own evaluator
_leaf = st.sampled_from(["x1", "x2", "x3", "0.5", "2", "1.25"])


def _combine(children):
    binary = st.tuples(children, st.sampled_from(["+", "-", "*"]), children).map(
        lambda t: f"({t[0]} {t[1]} {t[2]})")
    unary = st.tuples(st.sampled_from(["sin", "cos", "-"]), children).map(
        lambda t: f"-({t[1]})" if t[0] == "-" else f"{t[0]}({t[1]})")
    return binary | unary


expressions = st.recursive(_leaf, _combine, max_leaves=12)


@given(body=expressions,
       point=st.lists(st.floats(-2, 2, allow_nan=False), min_size=3, max_size=3))
def test_random_expressions_match_python(body, point):
    fm = parse_map(f"domain 3\ncodomain 1\nF1 = {body}\n")
    env = {"x1": point[0], "x2": point[1], "x3": point[2], "sin": math.sin, "cos": math.cos}
    want = eval(body, {"__builtins__": {}}, env)
    got = expr.evaluate(fm, point)[0]
    assert got == pytest.approx(want, rel=1e-12, abs=1e-12)


@given(body=expressions,
       point=st.lists(st.floats(-1.5, 1.5, allow_nan=False), min_size=3, max_size=3))
def test_random_expressions_dual_derivative(body, point):
    fm = parse_map(f"domain 3\ncodomain 1\nF1 = {body}\n")
    p = np.array(point)
    jac = expr.jacobian(fm, p)
    fd = _central_jacobian(fm, p, {}, h=1e-5)
    scale = 1.0 + np.abs(jac).max()
    assert np.abs(jac - fd).max() <= 1e-5 * scale
