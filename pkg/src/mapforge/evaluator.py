"""Interpreter for mapping-function bodies and DSL expressions.

Values are plain Python objects: ``int``, ``tuple`` of ints,
:class:`ProcessorSpace`, :class:`ProcIndex`, and :class:`TaskHandle`.
Arithmetic is exact integer math; ``/`` truncates toward zero and ``%``
is the matching remainder (all in-range indices are nonnegative, where
this equals floor semantics).  Tuple-tuple operators are elementwise
and require equal lengths; tuple-int broadcasts the scalar.

Evaluation is pure: identical (function, task, environment) inputs
always produce the identical processor index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Union

from .ast import (
    Attr, BinOp, Call, Expr, FuncDef, IntLit, LocalAssign, MachineExpr,
    MapperProgram, MethodCall, Name, ReturnStmt, Splat, Subscript, Ternary,
    TupleLit,
)
from .machine import MachineModel, ProcIndex, ProcessorSpace, SpaceError, machine_space


class EvalError(ValueError):
    """Raised when a mapping function cannot be evaluated."""


@dataclass
class TaskHandle:
    name: str
    ipoint: tuple[int, ...]
    ispace: tuple[int, ...]
    parent: Optional["TaskHandle"] = None
    processor: Optional[ProcIndex] = None


Value = Union[int, tuple, ProcessorSpace, ProcIndex, TaskHandle]


@dataclass
class EvalEnv:
    machine: MachineModel
    globals: dict[str, Value] = field(default_factory=dict)
    functions: dict[str, FuncDef] = field(default_factory=dict)
    locals: dict[str, Value] = field(default_factory=dict)

    def resolve(self, name: str) -> Value:
        if name in self.locals:
            return self.locals[name]
        if name in self.globals:
            return self.globals[name]
        raise EvalError(f"{name} not found")

    def with_locals(self, local_bindings: dict[str, Value]) -> "EvalEnv":
        return EvalEnv(self.machine, self.globals, self.functions, local_bindings)


def build_env(program: MapperProgram, machine: MachineModel) -> EvalEnv:
    """Evaluate a program's top-level bindings into an environment."""
    env = EvalEnv(machine, functions=program.functions)
    for name, binding in program.bindings.items():
        env.globals[name] = eval_expr(binding.expr, env)
    return env


# --------------------------------------------------------------------------
# Integer semantics: / truncates toward zero, % is the matching remainder.
# --------------------------------------------------------------------------


def idiv(a: int, b: int) -> int:
    if b == 0:
        raise EvalError("division by zero")
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def imod(a: int, b: int) -> int:
    return a - idiv(a, b) * b


_ARITH = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "/": idiv,
    "%": imod,
}

_COMPARE = {
    "==": lambda a, b: int(a == b),
    "!=": lambda a, b: int(a != b),
    "<": lambda a, b: int(a < b),
    ">": lambda a, b: int(a > b),
    "<=": lambda a, b: int(a <= b),
    ">=": lambda a, b: int(a >= b),
}


def _binary(op: str, lhs: Value, rhs: Value) -> Value:
    if op in _COMPARE:
        if isinstance(lhs, int) and isinstance(rhs, int):
            return _COMPARE[op](lhs, rhs)
        raise EvalError(f"comparison {op} requires integers")
    fn = _ARITH[op]
    if isinstance(lhs, int) and isinstance(rhs, int):
        return fn(lhs, rhs)
    if isinstance(lhs, tuple) and isinstance(rhs, tuple):
        if len(lhs) != len(rhs):
            raise EvalError(
                f"tuple length mismatch: {len(lhs)} vs {len(rhs)} for operator {op}")
        return tuple(fn(a, b) for a, b in zip(lhs, rhs))
    if isinstance(lhs, tuple) and isinstance(rhs, int):
        return tuple(fn(a, rhs) for a in lhs)
    if isinstance(lhs, int) and isinstance(rhs, tuple):
        return tuple(fn(lhs, b) for b in rhs)
    raise EvalError(f"operator {op} is not defined for {_kind(lhs)} and {_kind(rhs)}")


def _kind(value: Value) -> str:
    if isinstance(value, bool):
        return "bool"
    if isinstance(value, int):
        return "int"
    if isinstance(value, tuple):
        return "tuple"
    if isinstance(value, ProcessorSpace):
        return "space"
    if isinstance(value, ProcIndex):
        return "processor"
    if isinstance(value, TaskHandle):
        return "task"
    return type(value).__name__


def _expect_int(value: Value, what: str) -> int:
    if isinstance(value, int):
        return value
    raise EvalError(f"{what} must be an integer, got {_kind(value)}")


def _expect_tuple(value: Value, what: str) -> tuple:
    if isinstance(value, tuple):
        return value
    raise EvalError(f"{what} must be a tuple, got {_kind(value)}")


# --------------------------------------------------------------------------
# Expression evaluation
# --------------------------------------------------------------------------


def eval_expr(expr: Expr, env: EvalEnv) -> Value:
    if isinstance(expr, IntLit):
        return expr.value
    if isinstance(expr, Name):
        return env.resolve(expr.ident)
    if isinstance(expr, TupleLit):
        return tuple(_expect_int(eval_expr(e, env), "tuple element")
                     for e in expr.items)
    if isinstance(expr, MachineExpr):
        return machine_space(env.machine, expr.kind)
    if isinstance(expr, BinOp):
        return _binary(expr.op, eval_expr(expr.lhs, env), eval_expr(expr.rhs, env))
    if isinstance(expr, Ternary):
        cond = _expect_int(eval_expr(expr.cond, env), "ternary condition")
        return eval_expr(expr.then if cond else expr.other, env)
    if isinstance(expr, Attr):
        return _eval_attr(expr, env)
    if isinstance(expr, MethodCall):
        return _eval_method(expr, env)
    if isinstance(expr, Subscript):
        return _eval_subscript(expr, env)
    if isinstance(expr, Call):
        func = env.functions.get(expr.func)
        if func is None:
            raise EvalError(f"{expr.func} not found")
        args = [eval_expr(a, env) for a in expr.args]
        return call_function(func, args, env)
    if isinstance(expr, Splat):
        raise EvalError("splat is only allowed inside an index access")
    raise EvalError(f"cannot evaluate expression node {type(expr).__name__}")


def _eval_attr(expr: Attr, env: EvalEnv) -> Value:
    base = eval_expr(expr.base, env)
    if isinstance(base, ProcessorSpace):
        if expr.name == "size":
            return base.dims
        raise EvalError(f"processor spaces have no attribute .{expr.name}")
    if isinstance(base, TaskHandle):
        if expr.name == "ipoint":
            return base.ipoint
        if expr.name == "ispace":
            return base.ispace
        if expr.name == "parent":
            if base.parent is None:
                raise EvalError(f"task {base.name} has no parent")
            return base.parent
        raise EvalError(f"tasks have no attribute .{expr.name}")
    raise EvalError(f"values of kind {_kind(base)} have no attribute .{expr.name}")


def _eval_method(expr: MethodCall, env: EvalEnv) -> Value:
    base = eval_expr(expr.base, env)
    args = [eval_expr(a, env) for a in expr.args]
    if isinstance(base, ProcessorSpace):
        try:
            if expr.method == "split":
                return base.split(_expect_int(args[0], "split dimension"),
                                  _expect_int(args[1], "split factor"))
            if expr.method == "merge":
                return base.merge(_expect_int(args[0], "merge dimension"),
                                  _expect_int(args[1], "merge dimension"))
            if expr.method == "swap":
                return base.swap(_expect_int(args[0], "swap dimension"),
                                 _expect_int(args[1], "swap dimension"))
            if expr.method == "slice":
                return base.slice(_expect_int(args[0], "slice dimension"),
                                  _expect_int(args[1], "slice bound"),
                                  _expect_int(args[2], "slice bound"))
            if expr.method == "decompose":
                shape = _expect_tuple(args[1], "decompose shape")
                return base.decompose(_expect_int(args[0], "decompose dimension"),
                                      shape)
        except IndexError:
            raise EvalError(f"wrong number of arguments for .{expr.method}()")
        raise EvalError(f"processor spaces have no method .{expr.method}()")
    if isinstance(base, TaskHandle):
        if expr.method == "processor":
            if len(args) != 1 or not isinstance(args[0], ProcessorSpace):
                raise EvalError(".processor() takes a processor space argument")
            if base.processor is None:
                raise EvalError(f"task {base.name} is not mapped to a processor yet")
            return args[0].index_of(base.processor)
        raise EvalError(f"tasks have no method .{expr.method}()")
    raise EvalError(f"values of kind {_kind(base)} have no method .{expr.method}()")


def _eval_subscript(expr: Subscript, env: EvalEnv) -> Value:
    base = eval_expr(expr.base, env)
    flat: list[int] = []
    for index_expr in expr.indices:
        if isinstance(index_expr, Splat):
            value = eval_expr(index_expr.value, env)
            flat.extend(_expect_tuple(value, "splat operand"))
        else:
            flat.append(_expect_int(eval_expr(index_expr, env), "subscript"))
    if isinstance(base, ProcessorSpace):
        if len(flat) != base.rank:
            raise EvalError(
                f"space of size {base.dims} takes {base.rank} subscripts, "
                f"got {len(flat)}")
        return base.lookup(tuple(flat))
    if isinstance(base, tuple):
        if len(flat) != 1:
            raise EvalError("tuples take exactly one subscript")
        i = flat[0]
        if not 0 <= i < len(base):
            raise EvalError(f"tuple index {i} out of range for length {len(base)}")
        return base[i]
    raise EvalError(f"cannot index a value of kind {_kind(base)}")


# --------------------------------------------------------------------------
# Mapping-function invocation
# --------------------------------------------------------------------------


def call_function(func: FuncDef, args: list[Value], env: EvalEnv) -> Value:
    if len(args) != len(func.params):
        raise EvalError(
            f"call to {func.name} has {len(args)} arguments, "
            f"expected {len(func.params)}")
    local_bindings = {p.name: v for p, v in zip(func.params, args)}
    body_env = env.with_locals(local_bindings)
    for stmt in func.body:
        if isinstance(stmt, LocalAssign):
            body_env.locals[stmt.name] = eval_expr(stmt.expr, body_env)
        elif isinstance(stmt, ReturnStmt):
            return eval_expr(stmt.expr, body_env)
    raise EvalError(f"function {func.name} returned no value")


def mapping_args(func: FuncDef, task: TaskHandle) -> list[Value]:
    """Adapt a task to the function's calling convention.

    Both conventions are supported: a single Task parameter, or the
    (Tuple ipoint, Tuple ispace) pair.
    """
    kinds = [p.kind for p in func.params]
    if kinds == ["Task"]:
        return [task]
    if kinds == ["Tuple", "Tuple"]:
        return [task.ipoint, task.ispace]
    raise EvalError(
        f"function {func.name} must take (Task task) or "
        f"(Tuple ipoint, Tuple ispace) parameters")


def eval_mapping(func: FuncDef, task: TaskHandle, env: EvalEnv) -> ProcIndex:
    """Run one mapping function on one launch point."""
    try:
        result = call_function(func, mapping_args(func, task), env)
    except SpaceError as exc:
        raise EvalError(str(exc)) from exc
    if not isinstance(result, ProcIndex):
        raise EvalError(
            f"mapping function {func.name} must return a processor, "
            f"got {_kind(result)}")
    return result


# --------------------------------------------------------------------------
# Built-in mapping function library
# --------------------------------------------------------------------------

_BUILTIN_FILES = ("common_mappings.dsl", "matmul_mappings.dsl", "block3d.dsl")


def corpus_path(*parts: str) -> Path:
    """Path of a bundled corpus file or directory."""
    return Path(resources.files("mapforge") / "corpus").joinpath(*parts)


def builtin_program() -> MapperProgram:
    """All bundled mapping functions and their transformation preludes,
    merged into one program."""
    from .parser import parse_valid

    statements = []
    for filename in _BUILTIN_FILES:
        text = corpus_path("builtins", filename).read_text()
        statements.extend(parse_valid(text).statements)
    return MapperProgram(tuple(statements))


def builtin_library() -> dict[str, FuncDef]:
    """Bundled mapping functions by name."""
    return builtin_program().functions
