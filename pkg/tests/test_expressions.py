"""Expression language: grammar, errors, evaluation and printing."""
import numpy as np
import pytest

from crossdiff.expressions import (
    BinOp,
    Call,
    EvaluationError,
    ExpressionSyntaxError,
    Neg,
    Num,
    Pi,
    UnknownIdentifierError,
    Var,
    evaluate,
    evaluate_array,
    parse,
    to_string,
)


def test_parse_constant():
    assert parse("0.5") == Num(0.5)


def test_precedence_tree():
    tree = parse("0.5+0.2*cos(2*pi*x)")
    assert tree == BinOp("+", Num(0.5),
                         BinOp("*", Num(0.2),
                               Call("cos", BinOp("*", BinOp("*", Num(2.0), Pi()), Var()))))


def test_incomplete_expression_offset():
    with pytest.raises(ExpressionSyntaxError) as err:
        parse("2*x +")
    assert err.value.offset == 5


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as err:
        parse("2*y")
    assert err.value.offset == 2
    with pytest.raises(UnknownIdentifierError):
        parse("tan(x)")


def test_syntax_errors():
    for text, offset in (("(1+2", 4), ("1+*2", 2), ("sin x", 4), ("", 0), ("1 2", 2)):
        with pytest.raises(ExpressionSyntaxError) as err:
            parse(text)
        assert err.value.offset == offset, text


def test_eval_examples():
    assert evaluate(parse("0.5+0.2*cos(2*pi*x)"), 0.0) == pytest.approx(0.7, abs=1e-15)
    assert evaluate(parse("0.5+0.2*cos(2*pi*x)"), 0.25) == pytest.approx(0.5, abs=1e-15)
    assert evaluate(parse("x^2"), 3.0) == pytest.approx(9.0, abs=0)


def test_eval_operators():
    assert evaluate(parse("2^3^2"), 0.0) == 64.0  # left-assoc power
    assert evaluate(parse("8/4/2"), 0.0) == 1.0
    assert evaluate(parse("2-3-4"), 0.0) == -5.0
    assert evaluate(parse("-x^2"), 3.0) == -9.0
    assert evaluate(parse("(-x)^2"), 3.0) == 9.0
    assert evaluate(parse("exp(0)"), 0.5) == 1.0
    assert evaluate(parse("1e-2 + 1"), 0.0) == pytest.approx(1.01, abs=1e-15)


def test_division_by_zero():
    with pytest.raises(EvaluationError):
        evaluate(parse("1/x"), 0.0)
    with pytest.raises(EvaluationError):
        evaluate_array(parse("1/x"), np.array([0.5, 0.0]))


def test_array_matches_scalar():
    ast = parse("0.3*sin(2*pi*x) + x^2/(1+x)")
    xs = np.linspace(0.0, 1.0, 57)
    arr = evaluate_array(ast, xs)
    scalars = np.array([evaluate(ast, float(x)) for x in xs])
    assert np.allclose(arr, scalars, atol=1e-15)


def _random_tree(rng, depth):
    if depth == 0:
        choice = rng.integers(0, 3)
        if choice == 0:
            return Num(float(np.round(rng.uniform(0.0, 3.0), 4)))
        return Var() if choice == 1 else Pi()
    op = rng.integers(0, 7)
    if op < 4:
        sym = "+-*/"[op]
        left = _random_tree(rng, depth - 1)
        right = _random_tree(rng, depth - 1)
        return BinOp(sym, left, right)
    if op == 4:
        return Neg(_random_tree(rng, depth - 1))
    if op == 5:
        return BinOp("^", _random_tree(rng, depth - 1), Num(float(rng.integers(0, 3))))
    return Call(("sin", "cos", "exp")[rng.integers(0, 3)], _random_tree(rng, depth - 1))


def _oracle_eval(node, x):
    """Independent tree walker (no parser involvement)."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return x
    if isinstance(node, Pi):
        return float(np.pi)
    if isinstance(node, Neg):
        return -_oracle_eval(node.child, x)
    if isinstance(node, Call):
        import math

        return {"sin": math.sin, "cos": math.cos, "exp": math.exp}[node.func](
            _oracle_eval(node.arg, x))
    a, b = _oracle_eval(node.left, x), _oracle_eval(node.right, x)
    if node.op == "+":
        return a + b
    if node.op == "-":
        return a - b
    if node.op == "*":
        return a * b
    if node.op == "/":
        return a / b
    return a**b


def test_random_trees_print_parse_eval():
    rng = np.random.default_rng(23)
    checked = 0
    while checked < 1000:
        tree = _random_tree(rng, int(rng.integers(1, 7)))
        text = to_string(tree)
        reparsed = parse(text)
        x = float(rng.uniform(0.05, 1.0))
        try:
            expect = _oracle_eval(tree, x)
        except (ZeroDivisionError, OverflowError, ValueError):
            continue
        if not np.isfinite(expect) or abs(expect) > 1e12:
            continue
        try:
            got = evaluate(reparsed, x)
        except EvaluationError:
            continue
        assert got == pytest.approx(expect, rel=1e-12, abs=1e-12), text
        # idempotence of the canonical printout
        assert parse(to_string(reparsed)) == reparsed
        checked += 1
