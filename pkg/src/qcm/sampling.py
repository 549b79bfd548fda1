"""Seeded random unitaries, channels and independence-structured channels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import unitary_group

from .channel import ChoiOperator, KrausSet, choi_from_kraus
from .classical import Cpd, Variable
from .qci import channel_from_table
from .tensor import Operator, Space


def haar_unitary(d: int, rng: np.random.Generator) -> np.ndarray:
    if d == 1:
        return np.exp(2j * np.pi * rng.random()) * np.ones((1, 1))
    return unitary_group.rvs(d, random_state=rng)


def random_kraus(d_in: int, d_out: int, rank: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Kraus operators of a channel with Kraus rank at most ``rank``."""
    if d_out * rank < d_in:
        raise ValueError("rank too small for a trace-preserving map")
    iso = haar_unitary(d_out * rank, rng)[:, :d_in].reshape(d_out, rank, d_in)
    return [iso[:, e, :] for e in range(rank)]


def random_channel(outputs, inputs, rng: np.random.Generator, rank: int | None = None) -> ChoiOperator:
    outputs = Space.of(*outputs) if not isinstance(outputs, Space) else outputs
    inputs = Space.of(*inputs) if not isinstance(inputs, Space) else inputs
    d_in, d_out = inputs.total_dim, outputs.total_dim
    rank = rank or d_in * d_out
    return choi_from_kraus(KrausSet(tuple(random_kraus(d_in, d_out, rank, rng)), outputs, inputs))


def random_state(space, rng: np.random.Generator, rank: int | None = None) -> Operator:
    space = Space.of(*space) if not isinstance(space, Space) else space
    d = space.total_dim
    rank = rank or d
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return Operator(space, rho / np.trace(rho))


@dataclass(frozen=True, eq=False)
class Condition4Sample:
    channel: ChoiOperator
    blocks: tuple[tuple[int, int], ...]
    rotation: np.ndarray


def _block_structures(d_max: int) -> list[tuple[tuple[int, int], ...]]:
    """All multisets of (n, m) with sum n*m <= d_max, as sorted tuples."""
    pairs = [(n, m) for n in range(1, d_max + 1) for m in range(1, d_max + 1) if n * m <= d_max]
    out = set()

    def grow(prefix, total):
        if prefix:
            out.add(tuple(sorted(prefix)))
        for p in pairs:
            if total + p[0] * p[1] <= d_max and (not prefix or p >= prefix[-1]):
                grow(prefix + [p], total + p[0] * p[1])

    grow([], 0)
    return sorted(out)


def random_condition4_channel(rng: np.random.Generator, d_max: int = 6, d_b: int = 2, d_c: int = 2,
                              blocks=None, labels=("B", "C", "A")) -> Condition4Sample:
    """sum_i rho_{B|L_i} (x) rho_{C|R_i} on a random block structure, input rotated by a Haar unitary."""
    if blocks is None:
        structures = [s for s in _block_structures(d_max) if sum(n * m for n, m in s) >= 2]
        blocks = structures[int(rng.integers(len(structures)))]
    blocks = tuple(tuple(b) for b in blocks)
    d = sum(n * m for n, m in blocks)
    tensor = np.zeros((d_b, d_c, d, d_b, d_c, d), dtype=complex)
    off = 0
    for n, m in blocks:
        # one Kraus operator above the minimum keeps rho_{B|L} from factoring through a smaller space
        rank_b = int(rng.integers(-(-n // d_b) + 1, n * d_b + 1)) if n > 1 else int(rng.integers(1, d_b + 1))
        rank_c = int(rng.integers(-(-m // d_c), m * d_c + 1))
        kb = random_kraus(n, d_b, rank_b, rng)
        kc = random_kraus(m, d_c, rank_c, rng)
        lb = sum(np.outer(k.reshape(-1), k.reshape(-1).conj()) for k in kb).reshape(d_b, n, d_b, n)
        rc = sum(np.outer(k.reshape(-1), k.reshape(-1).conj()) for k in kc).reshape(d_c, m, d_c, m)
        t = np.einsum("bxcy,dres->bdxrceys", lb, rc).reshape(d_b, d_c, n * m, d_b, d_c, n * m)
        tensor[:, :, off:off + n * m, :, :, off:off + n * m] = t
        off += n * m
    u = haar_unitary(d, rng)
    # a basis change G on the input acts as conj(G) on the dual factor
    w = np.kron(np.eye(d_b * d_c), u.conj())
    data = w @ tensor.reshape(d_b * d_c * d, -1) @ w.conj().T
    b, c, a = labels
    ch = ChoiOperator.from_matrix(data, Space.of((b, d_b), (c, d_c)), Space.of((a, d)))
    return Condition4Sample(ch, tuple(sorted(blocks)), u)


def random_generic_channel(rng: np.random.Generator, d_a: int | None = None, d_b: int = 2, d_c: int = 2,
                           labels=("B", "C", "A")) -> ChoiOperator:
    d_a = d_a or int(rng.integers(2, 7))
    b, c, a = labels
    return random_channel(Space.of((b, d_b), (c, d_c)), Space.of((a, d_a)), rng)


def random_unitary_fork(rng: np.random.Generator) -> ChoiOperator:
    """Choi operator of a Haar-random two-qubit unitary with inputs A, D and outputs B, C."""
    u = haar_unitary(4, rng)
    return choi_from_kraus(KrausSet((u,), Space.of(("B", 2), ("C", 2)), Space.of(("A", 2), ("D", 2))))


def random_diagonal_channel(rng: np.random.Generator, d_x: int = 2, d_y: int = 2, d_z: int = 2,
                            independent: bool | None = None) -> ChoiOperator:
    """Diagonal Choi operator of a random P(YZ|X); optionally forced to be a product."""
    if independent is None:
        independent = bool(rng.integers(2))
    if independent:
        py = rng.dirichlet(np.ones(d_y), size=d_x).T
        pz = rng.dirichlet(np.ones(d_z), size=d_x).T
        table = py[:, None, :] * pz[None, :, :]
    else:
        table = rng.dirichlet(np.ones(d_y * d_z), size=d_x).T.reshape(d_y, d_z, d_x)
    p = Cpd((Variable("B", d_y), Variable("C", d_z)), (Variable("A", d_x),), table)
    return channel_from_table(p)
