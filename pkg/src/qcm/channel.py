"""Channels as Choi operators on output factors tensor dual input factors.

A channel from ``A`` to ``B`` is stored as

    rho_{B|A} = sum_ij E(|i><j|_A) (x) |i><j|_{A*}

on ``B (x) A*`` and normalized so that ``Tr_B rho_{B|A} = I_{A*}``.  The
dual basis of ``A*`` is identified with the computational basis, so a
basis change ``U`` on ``A`` shows up as ``conj(U)`` on ``A*``.

Contractions follow the linking operator convention: every operand is
padded with identities, multiplied in the written order, then traced.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg

from .tensor import (
    HERMITICITY_TOL,
    LabelError,
    Operator,
    Space,
    System,
    align,
    dual,
    is_dual,
    kron,
    multiply,
    partial_trace,
    projector,
    union_space,
)

CP_TOL = 1e-10
TP_TOL = 1e-9


class InvalidChannelError(ValueError):
    pass


def _input_space(inputs) -> Space:
    """Normalize an input structure to dual labels."""
    if isinstance(inputs, Space):
        factors = inputs.factors
    else:
        factors = Space.of(*inputs).factors
    return Space(tuple(f if is_dual(f.name) else f.dual for f in factors))


def _plain_space(space) -> Space:
    if not isinstance(space, Space):
        space = Space.of(*space)
    return Space(tuple(f.dual if is_dual(f.name) else f for f in space.factors))


@dataclass(frozen=True)
class ChannelDefects:
    hermiticity: float
    min_eigenvalue: float
    trace_preservation: float

    def ok(self, cp_tol: float = CP_TOL, tp_tol: float = TP_TOL) -> bool:
        return (
            self.hermiticity <= HERMITICITY_TOL * 10
            and self.min_eigenvalue >= -cp_tol
            and self.trace_preservation <= tp_tol
        )


@dataclass(frozen=True, eq=False)
class ChoiOperator:
    """Choi operator with output factors first, then dual input factors."""

    op: Operator
    outputs: Space
    inputs: Space
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        outputs = _plain_space(self.outputs)
        inputs = _input_space(self.inputs)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "op", align(self.op, outputs + inputs))
        if self.check:
            d = self.defects()
            if not d.ok():
                raise InvalidChannelError(
                    f"not a valid channel {list(outputs.names)}|{list(inputs.names)}: "
                    f"hermiticity {d.hermiticity:.2e}, min eigenvalue {d.min_eigenvalue:.2e}, "
                    f"trace preservation {d.trace_preservation:.2e}"
                )

    @classmethod
    def from_matrix(cls, data, outputs, inputs, check: bool = True) -> "ChoiOperator":
        outputs = _plain_space(outputs)
        inputs = _input_space(inputs)
        return cls(Operator(outputs + inputs, data), outputs, inputs, check)

    @property
    def d_in(self) -> int:
        return self.inputs.total_dim

    @property
    def d_out(self) -> int:
        return self.outputs.total_dim

    @property
    def data(self) -> np.ndarray:
        return self.op.data

    def defects(self) -> ChannelDefects:
        herm = float(np.max(np.abs(self.op.data - self.op.data.conj().T)))
        h = (self.op.data + self.op.data.conj().T) / 2
        w = np.linalg.eigvalsh(h)
        tp = np.linalg.norm(partial_trace(self.op, self.outputs.names).data - np.eye(self.d_in))
        return ChannelDefects(herm, float(w[0]), float(tp))

    def relabel(self, mapping: dict[str, str]) -> "ChoiOperator":
        """Rename systems; keys and values are plain (non-dual) names."""

        def ren(f: System) -> System:
            if is_dual(f.name):
                base = dual(f.name)
                return System(dual(mapping.get(base, base)), f.dim)
            return System(mapping.get(f.name, f.name), f.dim)

        outputs = Space(tuple(ren(f) for f in self.outputs))
        inputs = Space(tuple(ren(f) for f in self.inputs))
        return ChoiOperator(Operator(outputs + inputs, self.op.data), outputs, inputs, check=False)

    def __repr__(self):
        return f"ChoiOperator({list(self.outputs.names)}|{list(self.inputs.names)})"


@dataclass(frozen=True)
class KrausSet:
    """Kraus operators, each ``d_out x d_in`` in the product bases."""

    operators: tuple[np.ndarray, ...]
    outputs: Space
    inputs: Space

    def __post_init__(self):
        outputs = _plain_space(self.outputs)
        inputs = _plain_space(self.inputs)
        ops = tuple(np.array(k, dtype=complex) for k in self.operators)
        for k in ops:
            if k.shape != (outputs.total_dim, inputs.total_dim):
                raise ValueError(f"Kraus operator shape {k.shape} does not match "
                                 f"{outputs.total_dim}x{inputs.total_dim}")
        object.__setattr__(self, "operators", ops)
        object.__setattr__(self, "outputs", outputs)
        object.__setattr__(self, "inputs", inputs)

    def completeness(self) -> float:
        s = sum(k.conj().T @ k for k in self.operators)
        return float(np.linalg.norm(s - np.eye(self.inputs.total_dim)))

    def apply(self, rho: np.ndarray) -> np.ndarray:
        return sum(k @ rho @ k.conj().T for k in self.operators)


@dataclass(frozen=True)
class UnitaryGate:
    matrix: np.ndarray
    inputs: Space
    outputs: Space

    def __post_init__(self):
        inputs = _plain_space(self.inputs)
        outputs = _plain_space(self.outputs)
        u = np.array(self.matrix, dtype=complex)
        if inputs.total_dim != outputs.total_dim or u.shape != (outputs.total_dim, inputs.total_dim):
            raise ValueError("unitary must be square between spaces of equal dimension")
        u.setflags(write=False)
        object.__setattr__(self, "matrix", u)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "outputs", outputs)

    def unitarity_defect(self) -> float:
        return float(np.linalg.norm(self.matrix.conj().T @ self.matrix - np.eye(self.matrix.shape[0])))


def choi_from_kraus(k: KrausSet, tol: float = 1e-10) -> ChoiOperator:
    if k.completeness() > tol:
        raise InvalidChannelError(f"Kraus set is not trace preserving (defect {k.completeness():.2e})")
    # vec(K) in row-major order is sum_i K|i> (x) |i>, the Choi vector of K
    vecs = np.stack([op.reshape(-1) for op in k.operators], axis=1)
    data = vecs @ vecs.conj().T
    return ChoiOperator.from_matrix(data, k.outputs, k.inputs)


def choi_from_map(
    channel: Callable[[np.ndarray], np.ndarray],
    outputs,
    inputs,
    basis: np.ndarray | None = None,
    check: bool = True,
) -> ChoiOperator:
    """Build the Choi operator term by term from a linear map on matrices.

    ``basis`` holds an orthonormal basis of the input space as columns; the
    matching dual basis vectors are their complex conjugates.
    """
    outputs = _plain_space(outputs)
    inputs = _input_space(inputs)
    d = inputs.total_dim
    basis = np.eye(d, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    data = np.zeros((outputs.total_dim * d, outputs.total_dim * d), dtype=complex)
    for i in range(d):
        for j in range(d):
            e_ij = np.outer(basis[:, i], basis[:, j].conj())
            f_ij = np.outer(basis[:, i].conj(), basis[:, j])
            data += np.kron(channel(e_ij), f_ij)
    return ChoiOperator.from_matrix(data, outputs, inputs, check=check)


def choi_from_unitary(u: UnitaryGate, tol: float = 1e-10) -> ChoiOperator:
    if u.unitarity_defect() > tol:
        raise InvalidChannelError(f"matrix is not unitary (defect {u.unitarity_defect():.2e})")
    return choi_from_kraus(KrausSet((u.matrix,), u.outputs, u.inputs))


def kraus_from_choi(ch: ChoiOperator, cutoff: float = 1e-12) -> KrausSet:
    """Canonical Kraus operators from the eigendecomposition of the Choi operator."""
    w, v = np.linalg.eigh((ch.data + ch.data.conj().T) / 2)
    order = np.argsort(w)[::-1]
    ops = []
    for idx in order:
        if w[idx] <= cutoff:
            continue
        ops.append(np.sqrt(w[idx]) * v[:, idx].reshape(ch.d_out, ch.d_in))
    if not ops:
        raise InvalidChannelError("Choi operator has no positive spectrum")
    return KrausSet(tuple(ops), ch.outputs, ch.inputs.dualized())


def linking_operator(label: System | str, dim: int | None = None) -> Operator:
    """tau^id = sum_lm |l><m|_{A*} (x) |l><m|_A."""
    if not isinstance(label, System):
        label = System(label, dim)
    d = label.dim
    v = np.eye(d, dtype=complex).reshape(-1)
    return Operator(Space((label.dual, label)), np.outer(v, v))


def link(second: Operator, first: Operator, over: Iterable[str]) -> Operator:
    """Tr_{X X*}(second tau_X first) for every plain label X in ``over``.

    ``second`` carries ``X*`` factors and ``first`` carries ``X`` factors.
    """
    over = list(over)
    taus = []
    for name in over:
        dims = []
        if dual(name) in second.space:
            dims.append(second.space.system(dual(name)).dim)
        if name in first.space:
            dims.append(first.space.system(name).dim)
        if not dims:
            raise LabelError(f"cannot link over {name!r}: absent from both operands")
        taus.append(linking_operator(System(name, dims[0])))
    tau = kron(*taus) if taus else None
    ops = [second, tau, first] if tau is not None else [second, first]
    prod = multiply(*ops, space=union_space(*ops))
    return partial_trace(prod, [n for x in over for n in (x, dual(x))])


def apply_channel(ch: ChoiOperator, state: Operator) -> Operator:
    """rho_B = Tr_{A A*}(rho_{B|A} tau_A rho_A)."""
    names = [dual(n) for n in ch.inputs.names]
    if set(names) != set(state.names):
        raise LabelError(f"state on {list(state.names)} does not match channel inputs {names}")
    for f in state.space:
        if ch.inputs.system(dual(f.name)).dim != f.dim:
            raise LabelError(f"dimension mismatch on {f.name!r}")
    out = link(ch.op, state, names)
    return align(out, ch.outputs)


def compose(second: ChoiOperator, first: ChoiOperator) -> ChoiOperator:
    """Sequential composition; outputs of ``first`` feed matching inputs of ``second``."""
    fed = [n for n in first.outputs.names if dual(n) in second.inputs]
    if set(fed) != set(first.outputs.names) or set(dual(n) for n in fed) != set(second.inputs.names):
        raise LabelError(
            f"cannot compose {second!r} after {first!r}: outputs and inputs must match by label"
        )
    out = link(second.op, first.op, fed)
    return ChoiOperator(out, second.outputs, first.inputs)


def link_channels(second: ChoiOperator, first: ChoiOperator) -> ChoiOperator:
    """Partial composition: feed whichever outputs of ``first`` that ``second`` consumes.

    Unconsumed outputs of ``first`` and unfed inputs of ``second`` stay open.
    """
    fed = [n for n in first.outputs.names if dual(n) in second.inputs]
    out = link(second.op, first.op, fed)
    outputs = Space(second.outputs.factors + tuple(f for f in first.outputs if f.name not in fed))
    inputs = Space(tuple(f for f in second.inputs if dual(f.name) not in fed) + first.inputs.factors)
    return ChoiOperator(out, outputs, inputs)


def marginal_channel(ch: ChoiOperator, keep: Iterable[str]) -> ChoiOperator:
    keep = list(keep)
    for name in keep:
        ch.outputs.index(name)
    drop = [n for n in ch.outputs.names if n not in keep]
    op = partial_trace(ch.op, drop)
    outputs = Space(tuple(f for f in ch.outputs if f.name in keep))
    return ChoiOperator(op, outputs, ch.inputs, check=False)


def feed_states(ch: ChoiOperator, states: Operator) -> ChoiOperator:
    """Fix some inputs of ``ch`` to the given state (on plain labels)."""
    names = list(states.names)
    out = link(ch.op, states, names)
    inputs = Space(tuple(f for f in ch.inputs if dual(f.name) not in names))
    return ChoiOperator(out, ch.outputs, inputs)


def complete_to_unitary(columns: np.ndarray, positions: Sequence[int], dim: int) -> np.ndarray:
    """Unitary whose columns at ``positions`` are the given orthonormal ``columns``."""
    cols = np.asarray(columns, dtype=complex)
    u = np.zeros((dim, dim), dtype=complex)
    u[:, list(positions)] = cols
    rest = [i for i in range(dim) if i not in set(positions)]
    if rest:
        comp = scipy.linalg.null_space(cols.conj().T)
        if comp.shape[1] != len(rest):
            raise ValueError("columns are not orthonormal enough to complete")
        u[:, rest] = comp
    return u


def isometry_from_kraus(kraus: Sequence[np.ndarray], env_dim: int) -> np.ndarray:
    """Stinespring isometry A -> B (x) E, rows ordered (b, e)."""
    d_out, d_in = kraus[0].shape
    if len(kraus) > env_dim:
        raise ValueError("environment too small for the Kraus rank")
    iso = np.zeros((d_out, env_dim, d_in), dtype=complex)
    for e, k in enumerate(kraus):
        iso[:, e, :] = k
    return iso.reshape(d_out * env_dim, d_in)


def _ancilla_dim(d_in: int, d_out: int, rank: int) -> int:
    t = 1
    while (d_in * t) % d_out or (d_in * t) // d_out < rank:
        t += 1
    return t


def stinespring_dilation(
    ch: ChoiOperator, ancilla: str = "lambda", environment: str = "env"
) -> tuple[UnitaryGate, Operator]:
    """Unitary U on inputs (x) ancilla -> outputs (x) environment with ancilla in |0>.

    The ancilla is the smallest one with ``d_in d_anc = d_out d_env`` and
    room for the Kraus rank; columns outside the ``|0>`` ancilla sector are
    an arbitrary orthonormal completion.
    """
    kraus = kraus_from_choi(ch).operators
    d_in, d_out = ch.d_in, ch.d_out
    d_anc = _ancilla_dim(d_in, d_out, len(kraus))
    d_env = d_in * d_anc // d_out
    iso = isometry_from_kraus(kraus, d_env)
    positions = [a * d_anc for a in range(d_in)]
    u = complete_to_unitary(iso, positions, d_in * d_anc)
    inputs = ch.inputs.dualized() + Space.of((ancilla, d_anc))
    outputs = ch.outputs + Space.of((environment, d_env))
    state = np.zeros(d_anc, dtype=complex)
    state[0] = 1
    return UnitaryGate(u, inputs, outputs), projector(Space.of((ancilla, d_anc)), state)


def dephase(ch: ChoiOperator, tol: float = 1e-10) -> tuple[ChoiOperator, bool]:
    """Drop off-diagonal entries in the computational product basis."""
    diag = np.diag(np.diag(ch.data))
    off = float(np.linalg.norm(ch.data - diag))
    return ChoiOperator(Operator(ch.op.space, diag), ch.outputs, ch.inputs, check=False), off <= tol

