"""Standard channels, gates and small models used throughout the examples."""

from __future__ import annotations

import numpy as np

from .channel import (
    ChoiOperator,
    KrausSet,
    UnitaryGate,
    choi_from_kraus,
    link_channels,
    marginal_channel,
)
from .sampling import random_channel, random_state
from .model import Qcm, QcmNode, build_sigma, implied_channel, marginalize_node
from .tensor import Operator, Space, commutator_norm, embed, union_space

H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
X = np.array([[0, 1], [1, 0]], dtype=complex)
Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
Z = np.diag([1.0, -1.0]).astype(complex)
I2 = np.eye(2, dtype=complex)
CNOT = np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex)
PLUS = np.array([1, 1], dtype=complex) / np.sqrt(2)
MINUS = np.array([1, -1], dtype=complex) / np.sqrt(2)


def ket(*bits: int) -> np.ndarray:
    v = np.zeros(2 ** len(bits), dtype=complex)
    v[int("".join(map(str, bits)), 2) if bits else 0] = 1
    return v


def ry(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2), np.sin(angle / 2)
    return np.array([[c, -s], [s, c]], dtype=complex)


def copy_kraus(k: int, coherent: bool) -> list[np.ndarray]:
    """Qubit copy to ``k`` outputs: measured (one Kraus per branch) or coherent (a single isometry)."""
    branches = [np.outer(ket(*([b] * k)), ket(b)) for b in (0, 1)]
    return [branches[0] + branches[1]] if coherent else branches


def copy_channel(k: int = 2, coherent: bool = False, outputs=None, source: str = "A") -> ChoiOperator:
    names = outputs or ["B", "C", "D", "E", "F"][:k]
    return choi_from_kraus(
        KrausSet(tuple(copy_kraus(k, coherent)), Space.of(*[(n, 2) for n in names]), Space.of((source, 2)))
    )


def incoherent_copy(k: int = 2) -> ChoiOperator:
    """|0> -> |0..0>, |1> -> |1..1> with the branch recorded."""
    return copy_channel(k, coherent=False)


def coherent_copy(k: int = 2) -> ChoiOperator:
    """|0> -> |0..0>, |1> -> |1..1> as one isometry (GHZ-type Choi operator)."""
    return copy_channel(k, coherent=True)


def quantum_cnot(control: str = "A", target: str = "lambda", outputs=("B", "C")) -> UnitaryGate:
    return UnitaryGate(CNOT, Space.of((control, 2), (target, 2)), Space.of((outputs[0], 2), (outputs[1], 2)))


def classical_cnot(control: str = "X", target: str = "lambda", outputs=("Y", "Z")) -> ChoiOperator:
    """Permutation x, l -> x, x XOR l on classical bits, as a diagonal Choi operator."""
    data = np.zeros((16, 16))
    for x in (0, 1):
        for lam in (0, 1):
            idx = (x * 2 + (x ^ lam)) * 4 + x * 2 + lam
            data[idx, idx] = 1
    outs = Space.of((outputs[0], 2), (outputs[1], 2))
    ins = Space.of((control, 2), (target, 2))
    return ChoiOperator.from_matrix(data, outs, ins)


def product_unitary(a: np.ndarray, b: np.ndarray, inputs=("A", "D"), outputs=("B", "C")) -> UnitaryGate:
    da, db = a.shape[0], b.shape[0]
    return UnitaryGate(np.kron(a, b), Space.of((inputs[0], da), (inputs[1], db)),
                       Space.of((outputs[0], da), (outputs[1], db)))


def state_channel(name: str, rho: np.ndarray) -> ChoiOperator:
    """A root node: a channel with trivial input."""
    rho = np.asarray(rho, dtype=complex)
    d = rho.shape[0]
    return ChoiOperator(Operator(Space.of((name, d)), rho), Space.of((name, d)), Space())


def pure(name: str, vec) -> ChoiOperator:
    v = np.asarray(vec, dtype=complex).reshape(-1)
    return state_channel(name, np.outer(v, v.conj()))


def fork_model(rho_bc: ChoiOperator, rho_a: np.ndarray) -> Qcm:
    """Common-cause fork A -> B, A -> C built from the marginals of rho_{BC|A}."""
    a = rho_bc.inputs.names[0][:-1]
    b, c = rho_bc.outputs.names
    da = rho_bc.d_in
    nodes = (QcmNode(a, da), QcmNode(b, rho_bc.outputs.dims[0]), QcmNode(c, rho_bc.outputs.dims[1]))
    channels = {
        a: state_channel(a, rho_a),
        b: marginal_channel(rho_bc, [b]),
        c: marginal_channel(rho_bc, [c]),
    }
    return Qcm(nodes, ((a, b), (a, c)), channels)


def incoherent_fork(rho_a: np.ndarray | None = None) -> Qcm:
    return fork_model(incoherent_copy(), np.eye(2) / 2 if rho_a is None else rho_a)


def coherent_fork_channel() -> ChoiOperator:
    """CNOT on A = (system, ancilla); B is the control wire, C the target wire."""
    return choi_from_kraus(KrausSet((CNOT,), Space.of(("B", 2), ("C", 2)), Space.of(("A", 4))))


def coherent_fork(system_state=None) -> Qcm:
    """Coherent copy as a model: the root holds the system and a |0> ancilla fed to a CNOT."""
    psi = PLUS if system_state is None else np.asarray(system_state, dtype=complex)
    v = np.kron(psi, ket(0))
    return fork_model(coherent_fork_channel(), np.outer(v, v.conj()))


def chain_model(rho_a: np.ndarray, channel_ba: ChoiOperator) -> Qcm:
    da = channel_ba.d_in
    db = channel_ba.d_out
    return Qcm((QcmNode("A", da), QcmNode("B", db)), (("A", "B"),),
               {"A": state_channel("A", rho_a), "B": channel_ba})


def identity_channel(out: str = "B", inp: str = "A", d: int = 2) -> ChoiOperator:
    return choi_from_kraus(KrausSet((np.eye(d),), Space.of((out, d)), Space.of((inp, d))))


def confounder_model(rho_a: ChoiOperator, rho_b_a: ChoiOperator, rho_c_ba: ChoiOperator) -> Qcm:
    """A -> B, A -> C, B -> C."""
    da, db, dc = rho_a.d_out, rho_b_a.d_out, rho_c_ba.d_out
    return Qcm(
        (QcmNode("A", da), QcmNode("B", db), QcmNode("C", dc)),
        (("A", "B"), ("A", "C"), ("B", "C")),
        {"A": rho_a, "B": rho_b_a, "C": rho_c_ba},
    )


def generic_confounder(rng: np.random.Generator, d: int = 2) -> Qcm:
    """Random channels on every node; they generically fail to commute on A*."""
    rho_a = state_channel("A", random_state(Space.of(("A", d)), rng).data)
    rho_b = random_channel(Space.of(("B", d)), Space.of(("A", d)), rng)
    rho_c = random_channel(Space.of(("C", d)), Space.of(("B", d), ("A", d)), rng)
    return confounder_model(rho_a, rho_b, rho_c)


def decomposable_confounder(rng: np.random.Generator) -> Qcm:
    """A = A_L (x) A_R with B reading only A_L and C reading B and A_R."""
    rho_a = state_channel("A", random_state(Space.of(("A", 4)), rng).data)
    b_l = random_channel(Space.of(("B", 2)), Space.of(("L", 2)), rng)
    c_r = random_channel(Space.of(("C", 2)), Space.of(("B", 2), ("R", 2)), rng)
    # rho_{B|A} = rho_{B|L} (x) I_{R*}, with A* = L* (x) R*
    tb = np.kron(b_l.data, np.eye(2)).reshape(2, 2, 2, 2, 2, 2)  # B, L*, R* | B, L*, R*
    rho_b = ChoiOperator.from_matrix(tb.reshape(8, 8), Space.of(("B", 2)), Space.of(("A", 4)))
    tc = np.kron(c_r.data, np.eye(2)).reshape([2] * 8)  # C, B*, R*, L* rows then cols
    tc = tc.transpose(0, 1, 3, 2, 4, 5, 7, 6).reshape(16, 16)
    rho_c = ChoiOperator.from_matrix(tc, Space.of(("C", 2)), Space.of(("B", 2), ("A", 4)))
    return confounder_model(rho_a, rho_b, rho_c)


ENVIRONMENT_ANGLE = np.pi / 3


def environment_model(angle: float = ENVIRONMENT_ANGLE) -> Qcm:
    """Confounder A, B, C with a qubit environment lambda in |0>.

    The first interaction rotates lambda by Ry(angle), copies A onto it with
    a CNOT and applies H to A; the A wire becomes B.  The second interaction
    is a CNOT from the environment onto B whose target wire becomes C.
    """
    u1 = (np.kron(H, I2) @ CNOT @ np.kron(I2, ry(angle)))
    gate1 = choi_from_kraus(KrausSet((u1,), Space.of(("B", 2), ("E", 2)), Space.of(("A", 2), ("lambda", 2))))
    rho_b = marginal_channel(gate1, ["B"])
    rho_e = marginal_channel(gate1, ["E"])
    # CNOT with control E and target B; C is the target wire
    swap_cnot = np.array([[1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0], [0, 1, 0, 0]], dtype=complex)
    gate2 = choi_from_kraus(KrausSet((swap_cnot,), Space.of(("C", 2), ("E2", 2)), Space.of(("B", 2), ("E", 2))))
    rho_c_be = marginal_channel(gate2, ["C"])
    rho_c = link_channels(rho_c_be, rho_e)
    nodes = (QcmNode("lambda", 2), QcmNode("A", 2), QcmNode("B", 2), QcmNode("C", 2))
    edges = (("lambda", "B"), ("A", "B"), ("lambda", "C"), ("A", "C"), ("B", "C"))
    return Qcm(nodes, edges, {
        "lambda": pure("lambda", ket(0)),
        "A": state_channel("A", np.eye(2) / 2),
        "B": rho_b,
        "C": rho_c,
    })


def environment_violation(angle: float = ENVIRONMENT_ANGLE) -> float:
    """Commutator of the channels implied by sigma after removing lambda."""
    state = marginalize_node(build_sigma(environment_model(angle)), "lambda")
    rb = implied_channel(state, "B", ["A"])
    rc = implied_channel(state, "C", ["B", "A"])
    space = union_space(rb.op, rc.op)
    return commutator_norm(embed(rb.op, space), embed(rc.op, space))
