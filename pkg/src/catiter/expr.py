"""Safe evaluation of the small expression language used in configs.

Numbers may be written as arithmetic over literals, ``pi``, ``e``, ``inf``
and the functions ``sqrt``, ``sin``, ``cos``; schedule families are calls
such as ``power(1, 1, 2)`` or ``one_minus(harmonic(1, 2))``.
"""

from __future__ import annotations

import ast
import math
import operator
from typing import Any, Callable, Mapping

_CONSTS = {"pi": math.pi, "e": math.e, "inf": math.inf}
_FUNCS = {"sqrt": math.sqrt, "sin": math.sin, "cos": math.cos}
_BINOPS = {
    ast.Add: operator.add,
    ast.Sub: operator.sub,
    ast.Mult: operator.mul,
    ast.Div: operator.truediv,
    ast.Pow: operator.pow,
}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


class ExpressionError(ValueError):
    pass


def _eval(node: ast.AST, calls: Mapping[str, Callable]) -> Any:
    if isinstance(node, ast.Expression):
        return _eval(node.body, calls)
    if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)) and not isinstance(node.value, bool):
        return node.value
    if isinstance(node, ast.Name):
        if node.id in _CONSTS:
            return _CONSTS[node.id]
        raise ExpressionError(f"unknown name {node.id!r}")
    if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
        return _BINOPS[type(node.op)](_eval(node.left, calls), _eval(node.right, calls))
    if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
        return _UNOPS[type(node.op)](_eval(node.operand, calls))
    if isinstance(node, (ast.List, ast.Tuple)):
        return [_eval(e, calls) for e in node.elts]
    if isinstance(node, ast.Call) and isinstance(node.func, ast.Name):
        name = node.func.id
        fn = calls.get(name) or _FUNCS.get(name)
        if fn is None:
            raise ExpressionError(f"unknown function {name!r}")
        args = [_eval(a, calls) for a in node.args]
        kwargs = {kw.arg: _eval(kw.value, calls) for kw in node.keywords if kw.arg}
        return fn(*args, **kwargs)
    raise ExpressionError(f"unsupported syntax: {ast.dump(node)[:60]}")


def evaluate(text: str, calls: Mapping[str, Callable] | None = None) -> Any:
    try:
        tree = ast.parse(text.strip(), mode="eval")
    except SyntaxError as exc:
        raise ExpressionError(f"cannot parse {text!r}: {exc.msg}") from exc
    try:
        return _eval(tree, calls or {})
    except (TypeError, ZeroDivisionError, OverflowError) as exc:
        raise ExpressionError(f"cannot evaluate {text!r}: {exc}") from exc


def number(value: Any) -> float:
    """Coerce a config value (number or expression string) to float."""
    if isinstance(value, bool):
        raise ExpressionError(f"expected a number, got {value!r}")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        out = evaluate(value)
        if isinstance(out, (int, float)):
            return float(out)
    raise ExpressionError(f"expected a number, got {value!r}")
