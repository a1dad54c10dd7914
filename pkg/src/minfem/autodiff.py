"""Tape-based automatic differentiation for array energy functionals.

An energy is recorded once as a flat sequence of array primitives (the
tape); replays evaluate it on new inputs.  Gradients use reverse
accumulation over the tape.  Hessian-vector products push dual numbers
(value plus a stack of directional tangents) through both the forward and
the reverse sweep, which differentiates the gradient exactly in the given
directions; several directions are propagated at once through a trailing
tangent axis.

The primitive set is exactly what the benchmark energies need: scatter-set
into a fixed vector, gather by an index matrix, elementwise arithmetic,
scalar powers, log, abs, row/full sums, dot products, and products against
constant matrices.  ``abs`` differentiates with sign(x), taking the value
0 at x = 0.  Non-finite values propagate through replays without raising;
the caller decides.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

__all__ = [
    "Program",
    "Recorder",
    "Var",
    "log",
    "dot",
    "evaluate",
    "gradient",
    "hessian_vector_product",
]


# ---------------------------------------------------------------------------
# dual numbers with a trailing tangent axis


class _Dual:
    """Array value paired with tangents of shape ``val.shape + (k,)``."""

    __slots__ = ("val", "dot")

    def __init__(self, val, dot):
        self.val = val
        self.dot = dot


def _x(p):
    # align a plain operand with the trailing tangent axis
    return p[..., None] if isinstance(p, np.ndarray) else p


def _val(a):
    return a.val if isinstance(a, _Dual) else a


def _add(a, b):
    if isinstance(a, _Dual):
        if isinstance(b, _Dual):
            return _Dual(a.val + b.val, a.dot + b.dot)
        return _Dual(a.val + b, a.dot)
    if isinstance(b, _Dual):
        return _Dual(a + b.val, b.dot)
    return a + b


def _sub(a, b):
    if isinstance(a, _Dual):
        if isinstance(b, _Dual):
            return _Dual(a.val - b.val, a.dot - b.dot)
        return _Dual(a.val - b, a.dot)
    if isinstance(b, _Dual):
        return _Dual(a - b.val, -b.dot)
    return a - b


def _neg(a):
    if isinstance(a, _Dual):
        return _Dual(-a.val, -a.dot)
    return -a


def _mul(a, b):
    if isinstance(a, _Dual):
        if isinstance(b, _Dual):
            return _Dual(a.val * b.val, a.dot * _x(b.val) + b.dot * _x(a.val))
        return _Dual(a.val * b, a.dot * _x(b))
    if isinstance(b, _Dual):
        return _Dual(a * b.val, b.dot * _x(a))
    return a * b


def _div(a, b):
    if not isinstance(b, _Dual):
        if isinstance(a, _Dual):
            return _Dual(a.val / b, a.dot / _x(b))
        return a / b
    if isinstance(a, _Dual):
        val = a.val / b.val
        return _Dual(val, (a.dot - b.dot * _x(val)) / _x(b.val))
    val = a / b.val
    return _Dual(val, -(b.dot * _x(val)) / _x(b.val))


def _pow(a, e):
    if not isinstance(a, _Dual):
        return a**e
    if e == 0.0:  # constant: avoid 0 * x**-1 at x = 0
        return _Dual(a.val**e, np.zeros_like(a.dot))
    if e == 1.0:
        return _Dual(a.val**e, a.dot)
    return _Dual(a.val**e, a.dot * _x(e * a.val ** (e - 1.0)))


def _log(a):
    if not isinstance(a, _Dual):
        return np.log(a)
    return _Dual(np.log(a.val), a.dot / _x(a.val))


def _abs(a):
    if not isinstance(a, _Dual):
        return np.abs(a)
    return _Dual(np.abs(a.val), a.dot * _x(np.sign(a.val)))


def _sum_all(a):
    if not isinstance(a, _Dual):
        return float(np.sum(a))
    k = a.dot.shape[-1]
    return _Dual(float(np.sum(a.val)), a.dot.reshape(-1, k).sum(axis=0))


def _sum_rows(a):
    if not isinstance(a, _Dual):
        return a.sum(axis=1)
    return _Dual(a.val.sum(axis=1), a.dot.sum(axis=1))


def _take(a, idx):
    if not isinstance(a, _Dual):
        return a[idx]
    return _Dual(a.val[idx], a.dot[idx])


def _put(base, idx, vals):
    # base with vals written at idx; tangents follow the same placement
    if not isinstance(base, _Dual) and not isinstance(vals, _Dual):
        out = base.copy()
        out[idx] = vals
        return out
    bval = _val(base)
    out = bval.copy()
    out[idx] = _val(vals)
    k = (vals.dot if isinstance(vals, _Dual) else base.dot).shape[-1]
    if isinstance(base, _Dual):
        dot = base.dot.copy()
    else:
        dot = np.zeros(bval.shape + (k,))
    dot[idx] = vals.dot if isinstance(vals, _Dual) else 0.0
    return _Dual(out, dot)


def _zero_at(g, idx):
    if not isinstance(g, _Dual):
        out = g.copy()
        out[idx] = 0.0
        return out
    val = g.val.copy()
    val[idx] = 0.0
    dot = g.dot.copy()
    dot[idx] = 0.0
    return _Dual(val, dot)


def _scatter_add(g, idx, base_shape):
    # adjoint of gather: accumulate g back through idx
    if not isinstance(g, _Dual):
        out = np.zeros(base_shape)
        np.add.at(out, idx, g)
        return out
    val = np.zeros(base_shape)
    np.add.at(val, idx, g.val)
    dot = np.zeros(base_shape + (g.dot.shape[-1],))
    np.add.at(dot, idx, g.dot)
    return _Dual(val, dot)


def _bcast_rows(g, n_cols):
    # adjoint of a row sum: repeat g across axis 1
    if not isinstance(g, _Dual):
        return np.broadcast_to(g[:, None], (g.shape[0], n_cols))
    shape = (g.val.shape[0], n_cols)
    return _Dual(
        np.broadcast_to(g.val[:, None], shape),
        np.broadcast_to(g.dot[:, None, :], shape + (g.dot.shape[-1],)),
    )


def _bcast_full(g, shape):
    # adjoint of a full sum: spread the scalar g over shape
    if not isinstance(g, _Dual):
        return np.broadcast_to(np.asarray(g), shape)
    return _Dual(
        np.broadcast_to(np.asarray(g.val), shape),
        np.broadcast_to(g.dot, shape + (g.dot.shape[-1],)),
    )


def _vdot(a, b):
    # 1-D dot product, scalar result
    if not isinstance(a, _Dual) and not isinstance(b, _Dual):
        return float(a @ b)
    val = float(_val(a) @ _val(b))
    dot = 0.0
    if isinstance(a, _Dual):
        dot = dot + _val(b) @ a.dot
    if isinstance(b, _Dual):
        dot = dot + _val(a) @ b.dot
    return _Dual(val, dot)


def _matmul(a, m):
    # product of a (possibly dual) array with a constant matrix or vector
    if not isinstance(a, _Dual):
        return a @ m
    val = a.val @ m
    if a.val.ndim == 2 and m.ndim == 2:
        dot = np.einsum("abk,bc->ack", a.dot, m)
    elif a.val.ndim == 2:
        dot = np.einsum("abk,b->ak", a.dot, m)
    else:
        dot = np.einsum("bk,bc->ck", a.dot, m)
    return _Dual(val, dot)


def _outer_vec(g, w):
    # adjoint of (E,3) @ w -> (E,): spread g over the columns of w
    if not isinstance(g, _Dual):
        return g[:, None] * w
    return _Dual(g.val[:, None] * w, g.dot[:, None, :] * w[None, :, None])


# ---------------------------------------------------------------------------
# tape


@dataclass(frozen=True)
class Instr:
    op: str
    out: int
    args: tuple[int, ...]
    aux: Any = None


class Var:
    """Handle to a tape slot during recording."""

    __slots__ = ("rec", "slot", "shape")
    __array_ufunc__ = None  # keep numpy from absorbing us in mixed expressions

    def __init__(self, rec: "Recorder", slot: int, shape: tuple):
        self.rec = rec
        self.slot = slot
        self.shape = shape

    def __add__(self, other):
        return self.rec._binary("add", self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return self.rec._binary("sub", self, other)

    def __rsub__(self, other):
        return self.rec._binary("sub", other, self)

    def __mul__(self, other):
        return self.rec._binary("mul", self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self.rec._binary("div", self, other)

    def __rtruediv__(self, other):
        return self.rec._binary("div", other, self)

    def __neg__(self):
        return self.rec._unary("neg", self)

    def __abs__(self):
        return self.rec._unary("abs", self)

    def __pow__(self, exponent):
        if isinstance(exponent, Var) or not np.isscalar(exponent):
            raise TypeError("power exponent must be a plain real number")
        return self.rec._unary("pow", self, aux=float(exponent))

    def __matmul__(self, other):
        if isinstance(other, Var):
            raise TypeError("matrix products support only constant right operands")
        other = np.asarray(other, dtype=float)
        if len(self.shape) == 1 and other.ndim == 1:
            return self.rec._dot(self, other)
        return self.rec._matmul(self, other)

    def __rmatmul__(self, other):
        # plain_vector @ var is a 1-D dot product
        return self.rec._dot(other, self)

    def __getitem__(self, idx):
        return self.rec._gather(self, idx)

    def sum(self, axis: int | None = None) -> "Var":
        if axis is None:
            return self.rec._unary("sum", self)
        if axis == 1:
            return self.rec._unary("sum_rows", self)
        raise ValueError("sum supports axis=None or axis=1")


class Recorder:
    """Records an array program over one input vector.

    The recording replays each primitive on a sample input so that shapes
    are concrete; the recorded values are discarded.
    """

    def __init__(self, n_inputs: int, sample_input: np.ndarray | None = None):
        self.n_inputs = int(n_inputs)
        if sample_input is None:
            sample_input = np.zeros(self.n_inputs)
        sample_input = np.asarray(sample_input, dtype=float)
        if sample_input.shape != (self.n_inputs,):
            raise ValueError("sample_input must be a vector of length n_inputs")
        self._instrs: list[Instr] = []
        self._values: list[Any] = [sample_input]
        self._diff: set[int] = {0}
        self._consts: dict[int, np.ndarray | float] = {}
        self._named: dict[str, int] = {}
        self._const_cache: dict[int, int] = {}
        self._const_keepalive: list = []  # ids in the cache must stay live
        self.input_var = Var(self, 0, (self.n_inputs,))

    # -- slot management ----------------------------------------------------

    def constant(self, value, name: str | None = None) -> Var:
        """Register a constant array or scalar as a tape slot."""
        key = id(value)
        if name is None and key in self._const_cache:
            slot = self._const_cache[key]
            return Var(self, slot, np.shape(self._values[slot]))
        if isinstance(value, (int, float, np.floating, np.integer)):
            stored: np.ndarray | float = float(value)
        else:
            stored = np.asarray(value, dtype=float)
        slot = len(self._values)
        self._values.append(stored)
        self._consts[slot] = stored
        self._const_cache[key] = slot
        self._const_keepalive.append(value)
        if name is not None:
            if name in self._named:
                raise ValueError(f"duplicate constant name {name!r}")
            self._named[name] = slot
        return Var(self, slot, np.shape(stored))

    def _as_var(self, operand) -> Var:
        if isinstance(operand, Var):
            if operand.rec is not self:
                raise ValueError("operands recorded on different tapes")
            return operand
        return self.constant(operand)

    def _emit(self, op: str, args: tuple[Var, ...], aux=None) -> Var:
        slots = tuple(a.slot for a in args)
        out = len(self._values)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            value = _FORWARD[op]([self._values[s] for s in slots], aux)
        self._values.append(value)
        self._instrs.append(Instr(op, out, slots, aux))
        if any(s in self._diff for s in slots):
            self._diff.add(out)
        return Var(self, out, np.shape(value))

    # -- primitives ---------------------------------------------------------

    def _binary(self, op: str, a, b) -> Var:
        return self._emit(op, (self._as_var(a), self._as_var(b)))

    def _unary(self, op: str, a: Var, aux=None) -> Var:
        return self._emit(op, (a,), aux)

    def _gather(self, a: Var, idx) -> Var:
        idx = np.asarray(idx)
        if idx.dtype.kind not in "iu":
            raise TypeError("gather index must be an integer array")
        return self._emit("take", (a,), idx)

    def _matmul(self, a: Var, m: np.ndarray) -> Var:
        return self._emit("matmul", (a, self.constant(m)))

    def _dot(self, a, b) -> Var:
        return self._emit("dot", (self._as_var(a), self._as_var(b)))

    def scatter(self, base, idx, vals) -> Var:
        """base with vals written at positions idx (out-of-place)."""
        idx = np.asarray(idx)
        return self._emit("put", (self._as_var(base), self._as_var(vals)), idx)

    def log(self, a: Var) -> Var:
        return self._unary("log", a)

    def build(self, output: Var) -> "Program":
        """Freeze the tape with ``output`` as the scalar result."""
        if np.shape(self._values[output.slot]) != ():
            raise ValueError("program output must be a scalar")
        return Program(
            instrs=tuple(self._instrs),
            n_slots=len(self._values),
            n_inputs=self.n_inputs,
            input_slot=0,
            output_slot=output.slot,
            consts=dict(self._consts),
            named=dict(self._named),
            diff=frozenset(self._diff),
        )


def log(a):
    """Natural log; records on the tape when given a Var."""
    if isinstance(a, Var):
        return a.rec.log(a)
    return np.log(a)


def dot(a, b):
    """1-D dot product; records on the tape when either side is a Var."""
    if isinstance(a, Var):
        return a.rec._dot(a, b)
    if isinstance(b, Var):
        return b.rec._dot(a, b)
    return float(np.dot(a, b))


# ---------------------------------------------------------------------------
# replay rules

_FORWARD: dict[str, Callable] = {
    "add": lambda v, aux: _add(v[0], v[1]),
    "sub": lambda v, aux: _sub(v[0], v[1]),
    "mul": lambda v, aux: _mul(v[0], v[1]),
    "div": lambda v, aux: _div(v[0], v[1]),
    "neg": lambda v, aux: _neg(v[0]),
    "abs": lambda v, aux: _abs(v[0]),
    "pow": lambda v, aux: _pow(v[0], aux),
    "log": lambda v, aux: _log(v[0]),
    "sum": lambda v, aux: _sum_all(v[0]),
    "sum_rows": lambda v, aux: _sum_rows(v[0]),
    "take": lambda v, aux: _take(v[0], aux),
    "put": lambda v, aux: _put(v[0], aux, v[1]),
    "dot": lambda v, aux: _vdot(v[0], v[1]),
    "matmul": lambda v, aux: _matmul(v[0], _val(v[1])),
}


def _vjp(instr: Instr, ws: list, g) -> list[tuple[int, Any]]:
    """Adjoint contributions of one instruction, as (slot, value) pairs."""
    op, args, aux = instr.op, instr.args, instr.aux
    a = ws[args[0]]
    if op == "add":
        return [(args[0], g), (args[1], g)]
    if op == "sub":
        return [(args[0], g), (args[1], _neg(g))]
    if op == "mul":
        return [(args[0], _mul(g, ws[args[1]])), (args[1], _mul(g, a))]
    if op == "div":
        b = ws[args[1]]
        da = _div(g, b)
        return [(args[0], da), (args[1], _neg(_mul(da, ws[instr.out])))]
    if op == "neg":
        return [(args[0], _neg(g))]
    if op == "abs":
        return [(args[0], _mul(g, np.sign(_val(a))))]
    if op == "pow":
        return [(args[0], _mul(g, _mul(_pow(a, aux - 1.0), aux)))]
    if op == "log":
        return [(args[0], _div(g, a))]
    if op == "sum":
        return [(args[0], _bcast_full(g, np.shape(_val(a))))]
    if op == "sum_rows":
        return [(args[0], _bcast_rows(g, np.shape(_val(a))[1]))]
    if op == "take":
        return [(args[0], _scatter_add(g, aux, np.shape(_val(a))))]
    if op == "put":
        return [(args[0], _zero_at(g, aux)), (args[1], _take(g, aux))]
    if op == "dot":
        return [(args[0], _mul(g, ws[args[1]])), (args[1], _mul(g, a))]
    if op == "matmul":
        m = _val(ws[args[1]])
        if m.ndim == 2:
            return [(args[0], _matmul(g, m.T))]
        return [(args[0], _outer_vec(g, m))]
    raise AssertionError(f"unknown op {op}")


# ---------------------------------------------------------------------------
# program


@dataclass(frozen=True, eq=False)
class Program:
    """A recorded scalar-valued array program over one input vector."""

    instrs: tuple[Instr, ...]
    n_slots: int
    n_inputs: int
    input_slot: int
    output_slot: int
    consts: dict[int, np.ndarray | float]
    named: dict[str, int]
    diff: frozenset[int]

    # -- constants ----------------------------------------------------------

    def rebind(self, name: str, value: np.ndarray) -> "Program":
        """New program sharing this tape with a named constant replaced."""
        if name not in self.named:
            raise KeyError(f"program has no constant named {name!r}")
        slot = self.named[name]
        old = self.consts[slot]
        value = np.asarray(value, dtype=float)
        if value.shape != np.shape(old):
            raise ValueError(
                f"constant {name!r} has shape {np.shape(old)}, got {value.shape}"
            )
        consts = dict(self.consts)
        consts[slot] = value
        return Program(
            instrs=self.instrs,
            n_slots=self.n_slots,
            n_inputs=self.n_inputs,
            input_slot=self.input_slot,
            output_slot=self.output_slot,
            consts=consts,
            named=self.named,
            diff=self.diff,
        )

    def signature(self) -> bytes:
        """Deterministic byte serialization of the tape and constants."""
        payload = (
            self.instrs,
            self.n_slots,
            self.n_inputs,
            self.input_slot,
            self.output_slot,
            sorted(self.consts.items(), key=lambda kv: kv[0]),
            sorted(self.named.items()),
        )
        return pickle.dumps(payload)

    # -- replays ------------------------------------------------------------

    def _check_input(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if u.shape != (self.n_inputs,):
            raise ValueError(f"input must have shape ({self.n_inputs},), got {u.shape}")
        return u

    def _forward(self, u_value) -> list:
        ws: list = [None] * self.n_slots
        for slot, value in self.consts.items():
            ws[slot] = value
        ws[self.input_slot] = u_value
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for ins in self.instrs:
                ws[ins.out] = _FORWARD[ins.op]([ws[s] for s in ins.args], ins.aux)
        return ws

    def _reverse(self, ws, seed):
        adj: list = [None] * self.n_slots
        adj[self.output_slot] = seed
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            for ins in reversed(self.instrs):
                g = adj[ins.out]
                if g is None:
                    continue
                for slot, contrib in _vjp(ins, ws, g):
                    if slot not in self.diff:
                        continue
                    cur = adj[slot]
                    adj[slot] = contrib if cur is None else _add(cur, contrib)
        return adj[self.input_slot]

    def evaluate(self, u) -> float:
        """Replay the program, returning the scalar value J(u)."""
        u = self._check_input(u)
        return float(_val(self._forward(u)[self.output_slot]))

    def value_and_gradient(self, u) -> tuple[float, np.ndarray]:
        """J(u) and its exact gradient in one forward/reverse sweep."""
        u = self._check_input(u)
        ws = self._forward(u)
        grad = self._reverse(ws, 1.0)
        if grad is None:
            grad = np.zeros(self.n_inputs)
        return float(_val(ws[self.output_slot])), np.array(grad, dtype=float)

    def gradient(self, u) -> np.ndarray:
        """Exact gradient of J at u."""
        return self.value_and_gradient(u)[1]

    def hessian_vector_product(self, u, s) -> np.ndarray:
        """Exact H(u) @ s for one direction (n,) or stacked directions (n, k)."""
        u = self._check_input(u)
        s = np.asarray(s, dtype=float)
        single = s.ndim == 1
        if single:
            s = s[:, None]
        if s.shape[0] != self.n_inputs:
            raise ValueError(
                f"direction must have leading dimension {self.n_inputs}, got {s.shape}"
            )
        ws = self._forward(_Dual(u, s))
        grad = self._reverse(ws, 1.0)
        if grad is None or not isinstance(grad, _Dual):
            out = np.zeros((self.n_inputs, s.shape[1]))
        else:
            out = np.array(grad.dot, dtype=float)
        return out[:, 0] if single else out


# module-level conveniences mirroring the operation surface


def evaluate(program: Program, u) -> float:
    return program.evaluate(u)


def gradient(program: Program, u) -> np.ndarray:
    return program.gradient(u)


def hessian_vector_product(program: Program, u, s) -> np.ndarray:
    return program.hessian_vector_product(u, s)
