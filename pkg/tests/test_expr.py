import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from otclock import expr as ex
from otclock.errors import ModelParseError

SPECIES = {"X", "Y"}
PARAMS = {"k", "d"}


def parse(text):
    return ex.parse_expr(text, SPECIES, PARAMS)


def test_parse_classifies_names():
    tree = parse("k * X + d * Y")
    assert ex.species_names(tree) == {"X", "Y"}
    assert ex.param_names(tree) == {"k", "d"}


def test_precedence_and_associativity():
    # a - b - c is (a - b) - c
    t = parse("6 - 3 - 2")
    assert ex.evaluate(t, {}, {}, 1.0, 0) == 1.0
    # a / b * c is (a / b) * c
    t = parse("8 / 4 * 2")
    assert ex.evaluate(t, {}, {}, 1.0, 0) == 4.0
    # power binds tighter than * and is right-associative
    t = parse("2 * 3 ^ 2")
    assert ex.evaluate(t, {}, {}, 1.0, 0) == 18.0
    t = parse("2 ^ 3 ^ 2")
    assert ex.evaluate(t, {}, {}, 1.0, 0) == 512.0
    t = parse("-2 ^ 2")
    assert ex.evaluate(t, {}, {}, 1.0, 0) == -4.0  # power binds tighter than unary minus


def test_omega_light_and_functions():
    t = parse("omega * light_time + floor(2.7) + H(0) + H(0.1)")
    assert ex.evaluate(t, {}, {}, 50.0, 1) == 50.0 + 2.0 + 0.0 + 1.0
    assert ex.evaluate(t, {}, {}, 50.0, 0) == 3.0
    assert ex.uses_light(t)
    assert not ex.uses_light(parse("k * X"))


def test_heaviside_is_strict():
    t = parse("H(X)")
    assert ex.evaluate(t, {"X": 0.0}, {}, 1.0, 0) == 0.0
    assert ex.evaluate(t, {"X": -1.0}, {}, 1.0, 0) == 0.0
    assert ex.evaluate(t, {"X": 1e-300}, {}, 1.0, 0) == 1.0


def test_time_is_reserved():
    with pytest.raises(ModelParseError, match="light_time"):
        parse("k * time")


def test_undeclared_name_has_position():
    with pytest.raises(ModelParseError, match="undeclared name 'Z'"):
        parse("k * Z")
    try:
        ex.parse_expr("k * Z", SPECIES, PARAMS, line=7)
    except ModelParseError as e:
        assert e.line == 7
        assert e.column == 5


@pytest.mark.parametrize("bad", ["k +", "(k", "k ) ", "1..2", "k @ X", "k ** X"])
def test_syntax_errors(bad):
    with pytest.raises(ModelParseError):
        parse(bad)


@pytest.mark.parametrize("text", [
    "k * X",
    "k * omega * light_time",
    "omega * (k + X * d / omega) / (1 + (d / omega * Y) ^ k)",
    "-X + 2.5e-3 ^ d - floor(X / 3)",
    "H(X - Y) * k",
])
def test_print_parse_round_trip(text):
    tree = parse(text)
    assert parse(ex.to_text(tree)) == tree


@given(x=st.floats(0, 1e6), y=st.floats(0, 1e6),
       k=st.floats(1e-6, 1e3), d=st.floats(1e-6, 1e3))
def test_evaluate_matches_python(x, y, k, d):
    tree = parse("k * X + d * Y / (1 + X)")
    got = ex.evaluate(tree, {"X": x, "Y": y}, {"k": k, "d": d}, 1.0, 0)
    assert got == k * x + d * y / (1 + x)


def test_python_source_matches_interpreter():
    tree = parse("omega * (k + X * d / omega) / (1 + (d / omega * Y) ^ k)")
    src = ex.to_python_source(tree, {"X": 0, "Y": 1}, {"k": 0, "d": 1}, 2)
    env = {"np": np, "_H": lambda v: 1.0 if v > 0 else 0.0}
    fn = eval(f"lambda state, p, light, s0, s1: {src}", env)
    rng = np.random.default_rng(1)
    for _ in range(50):
        x, y = rng.uniform(0, 100, 2)
        k, d = rng.uniform(0.1, 3, 2)
        omega = rng.uniform(1, 100)
        want = ex.evaluate(tree, {"X": x, "Y": y}, {"k": k, "d": d}, omega, 0)
        got = fn(None, np.array([k, d, omega]), 0.0, x, y)
        assert got == want  # same operation order: bit-identical


def test_const_round_trip_is_exact():
    v = 0.085759993119922787
    tree = parse(repr(v))
    assert tree == ex.Const(v)
    assert ex.to_text(tree) == repr(v)
