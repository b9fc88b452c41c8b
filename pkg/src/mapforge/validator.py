"""Semantic checks for parsed mapper programs.

``validate`` returns an empty list iff the program is well-formed:
every IndexTaskMap/SingleTaskMap names a defined function, every
variable resolves to a parameter, a prior local, or a top-level
binding, mapping entry points return a processor-space subscript,
alignment constraints are powers of two, and there is no recursion.

The checks use a small four-valued type inference (int / tuple / space
/ proc / task / unknown); anything that cannot be decided statically
is left to evaluation time.
"""

from __future__ import annotations

from .ast import (
    Align, AssignStmt, Attr, BinOp, Call, Diagnostic, Expr, FuncDef,
    IndexTaskMapStmt, InstanceLimitStmt, LayoutStmt, LocalAssign,
    MachineExpr, MapperProgram, MethodCall, Name, RegionStmt, ReturnStmt,
    SingleTaskMapStmt, Splat, Subscript, TaskStmt, Ternary, TupleLit,
)

SPACE_METHODS = ("split", "merge", "swap", "slice", "decompose")
TASK_ATTRS = ("ipoint", "ispace", "parent")

_COMPARISONS = ("==", "!=", "<", ">", "<=", ">=")


def _pos(node) -> tuple[int, int]:
    pos = getattr(node, "pos", None)
    return pos if pos else (1, 1)


def _error(node, message: str) -> Diagnostic:
    line, col = _pos(node)
    return Diagnostic("error", line, col, message)


# --------------------------------------------------------------------------
# Name collection helpers (also used by the binder when emitting programs)
# --------------------------------------------------------------------------


def expr_names(expr: Expr) -> set[str]:
    """All variable and function names referenced by an expression."""
    if isinstance(expr, Name):
        return {expr.ident}
    if isinstance(expr, Call):
        names = {expr.func}
        for arg in expr.args:
            names |= expr_names(arg)
        return names
    if isinstance(expr, TupleLit):
        return set().union(*(expr_names(e) for e in expr.items)) if expr.items else set()
    if isinstance(expr, Attr):
        return expr_names(expr.base)
    if isinstance(expr, MethodCall):
        names = expr_names(expr.base)
        for arg in expr.args:
            names |= expr_names(arg)
        return names
    if isinstance(expr, BinOp):
        return expr_names(expr.lhs) | expr_names(expr.rhs)
    if isinstance(expr, Subscript):
        names = expr_names(expr.base)
        for idx in expr.indices:
            names |= expr_names(idx)
        return names
    if isinstance(expr, Splat):
        return expr_names(expr.value)
    if isinstance(expr, Ternary):
        return expr_names(expr.cond) | expr_names(expr.then) | expr_names(expr.other)
    return set()


def free_names(func: FuncDef) -> set[str]:
    """Names a function body needs from the enclosing program scope."""
    bound = {p.name for p in func.params}
    free: set[str] = set()
    for stmt in func.body:
        expr = stmt.expr
        free |= expr_names(expr) - bound
        if isinstance(stmt, LocalAssign):
            bound.add(stmt.name)
    return free


def called_functions(func: FuncDef) -> set[str]:
    names: set[str] = set()

    def walk(expr: Expr):
        if isinstance(expr, Call):
            names.add(expr.func)
            for a in expr.args:
                walk(a)
        elif isinstance(expr, TupleLit):
            for e in expr.items:
                walk(e)
        elif isinstance(expr, (Attr, Splat)):
            walk(expr.base if isinstance(expr, Attr) else expr.value)
        elif isinstance(expr, MethodCall):
            walk(expr.base)
            for a in expr.args:
                walk(a)
        elif isinstance(expr, BinOp):
            walk(expr.lhs)
            walk(expr.rhs)
        elif isinstance(expr, Subscript):
            walk(expr.base)
            for i in expr.indices:
                walk(i)
        elif isinstance(expr, Ternary):
            walk(expr.cond)
            walk(expr.then)
            walk(expr.other)

    for stmt in func.body:
        walk(stmt.expr)
    return names


# --------------------------------------------------------------------------
# Type inference
# --------------------------------------------------------------------------

_PARAM_TYPES = {"Task": "task", "Tuple": "tuple", "int": "int"}


class _Inference:
    def __init__(self, program: MapperProgram, diagnostics: list[Diagnostic]):
        self.program = program
        self.functions = program.functions
        self.diagnostics = diagnostics
        self._return_cache: dict[str, str] = {}
        self.global_types: dict[str, str] = {}
        for stmt in program.statements:
            if isinstance(stmt, AssignStmt):
                self.global_types[stmt.name] = self.infer(stmt.expr,
                                                          self.global_types)

    def func_return_type(self, func: FuncDef) -> str:
        if func.name in self._return_cache:
            return self._return_cache[func.name]
        self._return_cache[func.name] = "unknown"  # cycle guard
        env = dict(self.global_types)
        for p in func.params:
            env[p.name] = _PARAM_TYPES[p.kind]
        rtype = "unknown"
        for stmt in func.body:
            if isinstance(stmt, LocalAssign):
                env[stmt.name] = self.infer(stmt.expr, env)
            elif isinstance(stmt, ReturnStmt):
                rtype = self.infer(stmt.expr, env)
                break
        self._return_cache[func.name] = rtype
        return rtype

    def infer(self, expr: Expr, env: dict[str, str]) -> str:
        from .ast import IntLit

        if isinstance(expr, IntLit):
            return "int"
        if isinstance(expr, TupleLit):
            return "tuple"
        if isinstance(expr, MachineExpr):
            return "space"
        if isinstance(expr, Name):
            return env.get(expr.ident, "unknown")
        if isinstance(expr, BinOp):
            if expr.op in _COMPARISONS:
                return "int"
            lhs = self.infer(expr.lhs, env)
            rhs = self.infer(expr.rhs, env)
            if "tuple" in (lhs, rhs):
                return "tuple"
            if lhs == rhs == "int":
                return "int"
            return "unknown"
        if isinstance(expr, Attr):
            base = self.infer(expr.base, env)
            if base == "space":
                if expr.name == "size":
                    return "tuple"
                self.diagnostics.append(_error(
                    expr.base, f"processor spaces have no attribute .{expr.name}"))
                return "unknown"
            if base == "task":
                if expr.name in ("ipoint", "ispace"):
                    return "tuple"
                if expr.name == "parent":
                    return "task"
                self.diagnostics.append(_error(
                    expr.base, f"tasks have no attribute .{expr.name}"))
                return "unknown"
            return "unknown"
        if isinstance(expr, MethodCall):
            base = self.infer(expr.base, env)
            for arg in expr.args:
                self.infer(arg, env)
            if base == "space":
                if expr.method in SPACE_METHODS:
                    return "space"
                self.diagnostics.append(_error(
                    expr.base, f"processor spaces have no method .{expr.method}()"))
                return "unknown"
            if base == "task":
                if expr.method == "processor":
                    return "tuple"
                self.diagnostics.append(_error(
                    expr.base, f"tasks have no method .{expr.method}()"))
                return "unknown"
            return "unknown"
        if isinstance(expr, Subscript):
            base = self.infer(expr.base, env)
            for idx in expr.indices:
                inner = idx.value if isinstance(idx, Splat) else idx
                self.infer(inner, env)
            if base == "space":
                return "proc"
            if base == "tuple":
                return "int"
            if base in ("int", "proc", "task"):
                self.diagnostics.append(_error(
                    expr.base, f"cannot index a value of kind {base}"))
            return "unknown"
        if isinstance(expr, Splat):
            return self.infer(expr.value, env)
        if isinstance(expr, Ternary):
            self.infer(expr.cond, env)
            then = self.infer(expr.then, env)
            other = self.infer(expr.other, env)
            return then if then == other else "unknown"
        if isinstance(expr, Call):
            for arg in expr.args:
                self.infer(arg, env)
            func = self.functions.get(expr.func)
            if func is None:
                return "unknown"  # undefined-name check reports this
            return self.func_return_type(func)
        return "unknown"


# --------------------------------------------------------------------------
# validate
# --------------------------------------------------------------------------


def validate(program: MapperProgram) -> list[Diagnostic]:
    diagnostics: list[Diagnostic] = []
    functions: dict[str, FuncDef] = {}
    global_names: set[str] = set()

    for stmt in program.statements:
        if isinstance(stmt, FuncDef):
            if stmt.name in functions:
                diagnostics.append(_error(
                    stmt, f"function {stmt.name} defined more than once"))
            functions[stmt.name] = stmt
            global_names.add(stmt.name)
        elif isinstance(stmt, AssignStmt):
            global_names.add(stmt.name)

    # Statement-local structural checks.
    for stmt in program.statements:
        if isinstance(stmt, TaskStmt):
            seen = set()
            for proc in stmt.procs:
                if proc in seen:
                    diagnostics.append(_error(stmt, f"duplicate processor kind {proc}"))
                seen.add(proc)
        elif isinstance(stmt, RegionStmt):
            seen = set()
            for mem in stmt.memories:
                if mem in seen:
                    diagnostics.append(_error(stmt, f"duplicate memory kind {mem}"))
                seen.add(mem)
        elif isinstance(stmt, InstanceLimitStmt):
            if stmt.limit < 1:
                diagnostics.append(_error(stmt, "instance limit must be at least 1"))
        elif isinstance(stmt, LayoutStmt):
            soa = [c for c in stmt.constraints if c in ("SOA", "AOS")]
            order = [c for c in stmt.constraints if c in ("C_order", "F_order")]
            aligns = [c for c in stmt.constraints if isinstance(c, Align)]
            if len(soa) > 1:
                diagnostics.append(_error(
                    stmt, "conflicting layout constraints: at most one of SOA, AOS"))
            if len(order) > 1:
                diagnostics.append(_error(
                    stmt, "conflicting layout constraints: at most one of C_order, F_order"))
            if len(aligns) > 1:
                diagnostics.append(_error(
                    stmt, "conflicting layout constraints: at most one Align"))
            for align in aligns:
                if align.bytes < 1 or align.bytes & (align.bytes - 1):
                    diagnostics.append(_error(
                        stmt, f"alignment must be a power of two, got {align.bytes}"))

    # Name resolution in top-level bindings and function bodies.
    for stmt in program.statements:
        if isinstance(stmt, AssignStmt):
            for name in sorted(expr_names(stmt.expr) - global_names):
                diagnostics.append(_error(stmt, f"{name} not found"))
        elif isinstance(stmt, FuncDef):
            bound = {p.name for p in stmt.params}
            for body_stmt in stmt.body:
                missing = expr_names(body_stmt.expr) - bound - global_names
                for name in sorted(missing):
                    diagnostics.append(_error(body_stmt, f"{name} not found"))
                if isinstance(body_stmt, LocalAssign):
                    bound.add(body_stmt.name)

    # Call arity.
    def check_calls(expr: Expr, owner):
        if isinstance(expr, Call):
            func = functions.get(expr.func)
            if func is not None and len(expr.args) != len(func.params):
                diagnostics.append(_error(
                    owner,
                    f"call to {expr.func} has {len(expr.args)} arguments, "
                    f"expected {len(func.params)}"))
        for child in _children(expr):
            check_calls(child, owner)

    for stmt in program.statements:
        if isinstance(stmt, FuncDef):
            for body_stmt in stmt.body:
                check_calls(body_stmt.expr, body_stmt)
        elif isinstance(stmt, AssignStmt):
            check_calls(stmt.expr, stmt)

    # Recursion is rejected: mapping functions must terminate.
    recursive = _find_recursion(functions)
    for name in sorted(recursive):
        diagnostics.append(_error(functions[name], f"recursive mapping function {name}"))

    # Mapping entry points must exist and return a space subscript.
    inference = None if recursive else _Inference(program, diagnostics)
    for stmt in program.statements:
        if isinstance(stmt, (IndexTaskMapStmt, SingleTaskMapStmt)):
            kind = "IndexTaskMap" if isinstance(stmt, IndexTaskMapStmt) else "SingleTaskMap"
            func = functions.get(stmt.func_name)
            if func is None:
                diagnostics.append(_error(stmt, f"{kind}'s function undefined"))
                continue
            if not _entry_signature_ok(func):
                diagnostics.append(_error(
                    stmt,
                    f"function {func.name} must take (Task task) or "
                    f"(Tuple ipoint, Tuple ispace) parameters"))
            if not any(isinstance(b, ReturnStmt) for b in func.body):
                diagnostics.append(_error(
                    func, f"function {func.name} must return a processor"))
            elif inference is not None:
                rtype = inference.func_return_type(func)
                if rtype not in ("proc", "unknown"):
                    diagnostics.append(_error(
                        func,
                        f"function {func.name} must return a processor "
                        f"(a machine space subscript), not a {rtype}"))

    return diagnostics


def _entry_signature_ok(func: FuncDef) -> bool:
    kinds = [p.kind for p in func.params]
    return kinds == ["Task"] or kinds == ["Tuple", "Tuple"]


def _children(expr: Expr):
    if isinstance(expr, Call):
        return expr.args
    if isinstance(expr, TupleLit):
        return expr.items
    if isinstance(expr, Attr):
        return (expr.base,)
    if isinstance(expr, MethodCall):
        return (expr.base, *expr.args)
    if isinstance(expr, BinOp):
        return (expr.lhs, expr.rhs)
    if isinstance(expr, Subscript):
        return (expr.base, *expr.indices)
    if isinstance(expr, Splat):
        return (expr.value,)
    if isinstance(expr, Ternary):
        return (expr.cond, expr.then, expr.other)
    return ()


def _find_recursion(functions: dict[str, FuncDef]) -> set[str]:
    calls = {name: called_functions(f) & functions.keys() for name, f in functions.items()}
    recursive: set[str] = set()

    def visit(name: str, stack: tuple[str, ...]):
        if name in stack:
            recursive.update(stack[stack.index(name):])
            return
        for callee in calls.get(name, ()):
            visit(callee, stack + (name,))

    for name in functions:
        visit(name, ())
    return recursive
