"""Quantum conditional independence of channel outputs given the input.

Four views of the same property are implemented: the product form
``rho_{BC|A} = rho_{B|A} rho_{C|A}``, vanishing conditional mutual
information of the normalized Choi state, a decomposition of the input
space into a direct sum of tensor products, and a unitary dilation with
one private ancilla per output.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .algebra import DecompositionFailed, wedderburn_blocks
from .channel import (
    ChoiOperator,
    KrausSet,
    UnitaryGate,
    choi_from_kraus,
    complete_to_unitary,
    dephase,
    isometry_from_kraus,
    kraus_from_choi,
    marginal_channel,
)
from .classical import Cpd, NotConditionallyIndependent, Variable, ci_check
from .tensor import (
    LabelError,
    Operator,
    Space,
    System,
    align,
    commutator_norm,
    dual,
    embed,
    is_dual,
    kron,
    partial_trace,
    permute_systems,
    reduced_entropy,
)

DEFAULT_TOL = 1e-8

__all__ = [
    "DEFAULT_TOL",
    "DecompositionFailed",
    "NotConditionallyIndependent",
    "NotDiagonal",
    "FactorizationResult",
    "SubspaceDecomposition",
    "CommonCauseWitness",
    "DilationWitness",
    "MultiDecomposition",
    "no_causal_influence",
    "qci_factorization_check",
    "conditional_mutual_information",
    "state_cmi",
    "find_decomposition",
    "common_cause_dilation",
    "multi_qci_check",
    "multi_find_decomposition",
    "classical_reduction_check",
    "diagonal_table",
    "channel_from_table",
]


class NotDiagonal(ValueError):
    pass


def _split(ch: ChoiOperator, left: Sequence[str] | None) -> tuple[list[str], list[str]]:
    names = list(ch.outputs.names)
    if len(names) < 2:
        raise LabelError(f"need at least two outputs, got {names}")
    left = [names[0]] if left is None else list(left)
    for n in left:
        ch.outputs.index(n)
    right = [n for n in names if n not in left]
    if not left or not right:
        raise LabelError("both output groups must be non-empty")
    return left, right


@dataclass(frozen=True)
class FactorizationResult:
    passed: bool
    defect: float
    commutator: float

    def __iter__(self):
        return iter((self.passed, self.defect, self.commutator))


def qci_factorization_check(ch: ChoiOperator, tol: float = DEFAULT_TOL,
                            left: Sequence[str] | None = None) -> FactorizationResult:
    """Compare rho_{BC|A} with the product of its two marginals."""
    left, right = _split(ch, left)
    space = ch.op.space
    rb = embed(marginal_channel(ch, left).op, space)
    rc = embed(marginal_channel(ch, right).op, space)
    defect = float(np.linalg.norm(ch.data - rb.data @ rc.data))
    comm = commutator_norm(rb, rc)
    return FactorizationResult(defect <= tol and comm <= tol, defect, comm)


def state_cmi(rho: Operator, x: Sequence[str], y: Sequence[str], z: Sequence[str]) -> float:
    """I(X:Y|Z) in bits for a density operator; factors outside X, Y, Z are traced."""
    x, y, z = list(x), list(y), list(z)
    return (
        reduced_entropy(rho, x + z)
        + reduced_entropy(rho, y + z)
        - reduced_entropy(rho, x + y + z)
        - reduced_entropy(rho, z)
    )


def conditional_mutual_information(ch: ChoiOperator, left: Sequence[str] | None = None,
                                   right: Sequence[str] | None = None) -> float:
    """I(B:C|A) of the trace-one operator rho_{BC|A} / d_A, the dual input playing A."""
    left, rest = _split(ch, left)
    right = rest if right is None else list(right)
    rho = ch.op.scale(1 / ch.d_in)
    return state_cmi(rho, left, right, list(ch.inputs.names))


def _unitary_output_marginal(u: UnitaryGate, keep: Sequence[str]) -> Operator:
    """Choi operator of U traced over the outputs outside ``keep``, without building the full Choi."""
    outs = u.outputs
    keep = list(keep)
    for n in keep:
        outs.index(n)
    order = keep + [n for n in outs.names if n not in keep]
    dims = outs.dims
    perm = [outs.index(n) for n in order]
    t = u.matrix.reshape(dims + (u.inputs.total_dim,)).transpose(perm + [len(dims)])
    dk = int(np.prod([outs.system(n).dim for n in keep], dtype=np.int64))
    t = t.reshape(dk, -1, u.inputs.total_dim)
    m = np.einsum("toi,soj->tisj", t, t.conj()).reshape(dk * u.inputs.total_dim, -1)
    space = outs.subspace(keep) + u.inputs.dualized()
    return Operator(space, m)


def no_causal_influence(u_choi: ChoiOperator | UnitaryGate, from_label: str, to_label,
                        tol: float = DEFAULT_TOL) -> tuple[bool, float]:
    """Does input ``from_label`` leave the marginal channel onto ``to_label`` unaffected?

    ``u_choi`` may be a unitary Choi operator or the unitary itself.
    """
    to = [to_label] if isinstance(to_label, str) else list(to_label)
    src = from_label if is_dual(from_label) else dual(from_label)
    if isinstance(u_choi, UnitaryGate):
        m = _unitary_output_marginal(u_choi, to)
    else:
        for n in to:
            u_choi.outputs.index(n)
        m = partial_trace(u_choi.op, [n for n in u_choi.outputs.names if n not in to])
    m.space.index(src)
    d = m.space.system(src).dim
    reduced = partial_trace(m, [src]).scale(1 / d)
    rebuilt = embed(reduced, m.space)
    residual = float(np.linalg.norm(m.data - rebuilt.data))
    return residual <= tol, residual


@dataclass(frozen=True, eq=False)
class SubspaceDecomposition:
    """H_A = (+)_i L_i (x) R_i.

    Columns of ``basis`` are the adapted basis of H_A: block ``i`` occupies
    ``offsets[i] : offsets[i] + n_i m_i`` with local index ``l * m_i + r``.
    """

    basis: np.ndarray
    blocks: tuple[tuple[int, int], ...]
    input_space: Space

    @property
    def basis_change(self) -> UnitaryGate:
        return UnitaryGate(self.basis, self.input_space, self.input_space)

    @property
    def dual_basis(self) -> np.ndarray:
        """The same decomposition expressed on the stored dual factor."""
        return self.basis.conj()

    @property
    def offsets(self) -> tuple[int, ...]:
        out, k = [], 0
        for n, m in self.blocks:
            out.append(k)
            k += n * m
        return tuple(out)

    def block_columns(self, i: int) -> np.ndarray:
        n, m = self.blocks[i]
        off = self.offsets[i]
        return self.basis[:, off:off + n * m]


@dataclass(frozen=True, eq=False)
class CommonCauseWitness:
    decomposition: SubspaceDecomposition
    left_channels: tuple[ChoiOperator, ...]
    right_channels: tuple[ChoiOperator, ...]
    left: tuple[str, ...]
    right: tuple[str, ...]
    residual: float
    source: ChoiOperator = field(repr=False)

    @property
    def blocks(self) -> tuple[tuple[int, int], ...]:
        return self.decomposition.blocks

    def reconstruct(self) -> ChoiOperator:
        return _reconstruct(self.source, self.left, self.right, self.decomposition,
                            self.left_channels, self.right_channels)


def _compress(qd: np.ndarray, rho: Operator, outputs: Sequence[str], inputs: Space) -> np.ndarray:
    """(I (x) Q^dag) rho (I (x) Q) for Q acting on the dual input."""
    dout = int(np.prod([rho.space.system(n).dim for n in outputs], dtype=np.int64))
    r = align(rho, rho.space.subspace(list(outputs)) + inputs).data
    big = np.kron(np.eye(dout), qd)
    return big.conj().T @ r @ big


def _component_tables(ch, left, right, dec):
    rb = marginal_channel(ch, left).op
    rc = marginal_channel(ch, right).op
    dB = int(np.prod([ch.outputs.system(n).dim for n in left], dtype=np.int64))
    dC = int(np.prod([ch.outputs.system(n).dim for n in right], dtype=np.int64))
    lefts, rights = [], []
    for i, (n, m) in enumerate(dec.blocks):
        qd = dec.block_columns(i).conj()
        cb = _compress(qd, rb, left, ch.inputs).reshape(dB, n, m, dB, n, m)
        cc = _compress(qd, rc, right, ch.inputs).reshape(dC, n, m, dC, n, m)
        lefts.append(np.einsum("bxrcyr->bxcy", cb).reshape(dB * n, dB * n) / m)
        rights.append(np.einsum("cxrdxs->crds", cc).reshape(dC * m, dC * m) / n)
    return lefts, rights, dB, dC


def _block_operator(dB, dC, blocks, lefts, rights):
    """sum_i rho_{B|L_i} (x) rho_{C|R_i} in block coordinates on B C A*."""
    d = sum(n * m for n, m in blocks)
    out = np.zeros((dB, dC, d, dB, dC, d), dtype=complex)
    off = 0
    for (n, m), lb, rc in zip(blocks, lefts, rights):
        t = np.einsum("bxcy,dres->bdxrceys", lb.reshape(dB, n, dB, n), rc.reshape(dC, m, dC, m))
        out[:, :, off:off + n * m, :, :, off:off + n * m] = t.reshape(dB, dC, n * m, dB, dC, n * m)
        off += n * m
    return out.reshape(dB * dC * d, dB * dC * d)


def _reconstruct(ch, left, right, dec, left_channels, right_channels) -> ChoiOperator:
    dB = left_channels[0].d_out
    dC = right_channels[0].d_out
    blk = _block_operator(dB, dC, dec.blocks, [c.data for c in left_channels], [c.data for c in right_channels])
    w = np.kron(np.eye(dB * dC), dec.dual_basis)
    data = w @ blk @ w.conj().T
    space = ch.outputs.subspace(list(left) + list(right)) + ch.inputs
    return ChoiOperator(Operator(space, data), space.subspace(list(left) + list(right)), ch.inputs, check=False)


def _fingerprint(mat: np.ndarray) -> tuple:
    return tuple(np.round(np.linalg.eigvalsh((mat + mat.conj().T) / 2), 6))


def _input_label(ch: ChoiOperator) -> str:
    return "".join(dual(n) for n in ch.inputs.names)


def find_decomposition(ch: ChoiOperator, tol: float = DEFAULT_TOL, left: Sequence[str] | None = None,
                       seed: int = 0, check_cmi: bool = True) -> CommonCauseWitness:
    """Direct-sum-of-tensor-products witness for conditional independence.

    The algebra generated by the output slices of rho_{B|A} is split into
    its simple blocks; rho_{C|A} then lives in the commutant.
    """
    left, right = _split(ch, left)
    if check_cmi:
        cmi = conditional_mutual_information(ch, left, right)
        if cmi > tol:
            raise NotConditionallyIndependent(f"I(B:C|A) = {cmi:.6g} exceeds {tol:g}")
    rng = np.random.default_rng(seed)
    dA = ch.d_in
    rb = marginal_channel(ch, left)
    dB = rb.d_out
    t = rb.data.reshape(dB, dA, dB, dA)
    gens = [t[b, :, c, :] for b in range(dB) for c in range(dB)]
    blocks = wedderburn_blocks(gens, rng)
    # the algebra lives on A*; the physical basis of H_A is its conjugate
    basis = np.hstack([b.basis for b in blocks]).conj()
    dec = SubspaceDecomposition(basis, tuple((b.n, b.m) for b in blocks), ch.inputs.dualized())
    lefts, rights, dB, dC = _component_tables(ch, left, right, dec)

    keys = [(n, m, _fingerprint(lb), _fingerprint(rc)) for (n, m), lb, rc in zip(dec.blocks, lefts, rights)]
    order = sorted(range(len(keys)), key=lambda i: keys[i])
    cols = [dec.block_columns(i) for i in order]
    dec = SubspaceDecomposition(np.hstack(cols), tuple(dec.blocks[i] for i in order), dec.input_space)
    lefts = [lefts[i] for i in order]
    rights = [rights[i] for i in order]

    label = _input_label(ch)
    left_space = ch.outputs.subspace(left)
    right_space = ch.outputs.subspace(right)
    lcs, rcs = [], []
    for i, ((n, m), lb, rc) in enumerate(zip(dec.blocks, lefts, rights)):
        lin = Space.of((f"{label}_L{i}*", n))
        rin = Space.of((f"{label}_R{i}*", m))
        lcs.append(ChoiOperator(Operator(left_space + lin, lb), left_space, lin, check=False))
        rcs.append(ChoiOperator(Operator(right_space + rin, rc), right_space, rin, check=False))
    rec = _reconstruct(ch, left, right, dec, lcs, rcs)
    target = permute_systems(ch.op, rec.op.names)
    residual = float(np.linalg.norm(rec.data - target.data))
    if residual > tol:
        raise DecompositionFailed(f"reconstruction residual {residual:.3e} exceeds {tol:g}", residual)
    for c in lcs + rcs:
        if not c.defects().ok(cp_tol=max(tol, 1e-10), tp_tol=max(tol, 1e-9)):
            raise DecompositionFailed("a component is not a valid channel", residual)
    return CommonCauseWitness(dec, tuple(lcs), tuple(rcs), tuple(left), tuple(right), residual, ch)


@dataclass(frozen=True, eq=False)
class DilationWitness:
    """U on lambda_B (x) A (x) lambda_C -> B (x) F (x) C with both ancillas in |0>."""

    u: UnitaryGate
    ancilla_states: dict
    no_influence: dict
    reproduction_residual: float
    commutator: float
    v_full: np.ndarray = field(repr=False)
    w_full: np.ndarray = field(repr=False)
    witness: CommonCauseWitness = field(repr=False)

    @property
    def unitarity_defect(self) -> float:
        return self.u.unitarity_defect()

    def passes(self, tol: float = DEFAULT_TOL) -> bool:
        return (
            self.unitarity_defect <= 1e-10
            and all(r <= tol for r in self.no_influence.values())
            and self.reproduction_residual <= tol
        )


def _multiplicity(dims: Sequence[int], d_out: int, ranks: Sequence[int]) -> int:
    t = 1
    while any((t * n) % d_out or (t * n) // d_out < r for n, r in zip(dims, ranks)):
        t += 1
    return t


def common_cause_dilation(ch: ChoiOperator, tol: float = DEFAULT_TOL, left: Sequence[str] | None = None,
                          seed: int = 0, ancillas: tuple[str, str] = ("lambda_B", "lambda_C"),
                          junk: str = "F") -> DilationWitness:
    """Unitary dilation where lambda_B only reaches B and lambda_C only reaches C.

    Per block, V_i acts on lambda_B (x) L_i and W_i on R_i (x) lambda_C; both
    are Stinespring completions of the block's component channels.
    """
    wit = find_decomposition(ch, tol, left, seed)
    dec = wit.decomposition
    dB = wit.left_channels[0].d_out
    dC = wit.right_channels[0].d_out
    dA = ch.d_in
    kb = [kraus_from_choi(c).operators for c in wit.left_channels]
    kc = [kraus_from_choi(c).operators for c in wit.right_channels]
    ns = [n for n, _ in dec.blocks]
    ms = [m for _, m in dec.blocks]
    tB = _multiplicity(ns, dB, [len(k) for k in kb])
    tC = _multiplicity(ms, dC, [len(k) for k in kc])
    js = [tB * n // dB for n in ns]
    ks = [tC * m // dC for m in ms]
    dF = sum(j * k for j, k in zip(js, ks))
    N = tB * dA * tC

    v_full = np.zeros((N, N), dtype=complex)
    w_full = np.zeros((N, N), dtype=complex)
    pi = np.zeros((dB * dF * dC, N))
    g_all = np.arange(N).reshape(tB, dA, tC)
    doff = 0
    for i, ((n, m), off) in enumerate(zip(dec.blocks, dec.offsets)):
        j, k = js[i], ks[i]
        iso_b = isometry_from_kraus(kb[i], j)  # rows (b, j)
        vi = complete_to_unitary(iso_b, range(n), tB * n)
        iso_c = isometry_from_kraus(kc[i], k).reshape(dC, k, m).transpose(1, 0, 2).reshape(k * dC, m)
        wi = complete_to_unitary(iso_c, [r * tC for r in range(m)], m * tC)
        g = g_all[:, off:off + n * m, :].reshape(tB, n, m, tC)
        for r in range(m):
            for q in range(tC):
                idx = g[:, :, r, q].reshape(-1)
                v_full[np.ix_(idx, idx)] = vi
        for p in range(tB):
            for l in range(n):
                idx = g[p, l].reshape(-1)
                w_full[np.ix_(idx, idx)] = wi
        p_, l_, r_, q_ = np.indices((tB, n, m, tC)).reshape(4, -1)
        flat_b = p_ * n + l_
        b, jj = flat_b // j, flat_b % j
        flat_c = r_ * tC + q_
        s, c = flat_c // dC, flat_c % dC
        out = b * (dF * dC) + (doff + jj * k + s) * dC + c
        pi[out, g[p_, l_, r_, q_]] = 1
        doff += j * k

    s_in = np.kron(np.kron(np.eye(tB), dec.basis.conj().T), np.eye(tC))
    u_mat = pi @ w_full @ v_full @ s_in
    la, lc = ancillas
    in_space = Space.of((la, tB)) + ch.inputs.dualized() + Space.of((lc, tC))
    left_space = ch.outputs.subspace(wit.left)
    right_space = ch.outputs.subspace(wit.right)
    out_space = left_space + Space.of((junk, dF)) + right_space
    u = UnitaryGate(u_mat, in_space, out_space)

    influence = {
        f"{la}->{','.join(wit.right)}": no_causal_influence(u, la, list(wit.right), tol)[1],
        f"{lc}->{','.join(wit.left)}": no_causal_influence(u, lc, list(wit.left), tol)[1],
    }
    reproduced = _feed_zero_ancillas(u, tB, dA, tC, dB, dF, dC, ch, left_space + right_space)
    target = permute_systems(ch.op, reproduced.op.names)
    residual = float(np.linalg.norm(reproduced.data - target.data))
    comm = float(np.linalg.norm(v_full @ w_full - w_full @ v_full))
    zero_b = np.zeros((tB, tB)); zero_b[0, 0] = 1
    zero_c = np.zeros((tC, tC)); zero_c[0, 0] = 1
    states = {la: Operator(Space.of((la, tB)), zero_b), lc: Operator(Space.of((lc, tC)), zero_c)}
    return DilationWitness(u, states, influence, residual, comm, v_full, w_full, wit)


def _feed_zero_ancillas(u, tB, dA, tC, dB, dF, dC, ch, out_space) -> ChoiOperator:
    """Kraus operators (I (x) <f| (x) I) U (|0> (x) I (x) |0>) -> Choi."""
    cols = u.matrix.reshape(dB, dF, dC, tB, dA, tC)[:, :, :, 0, :, 0]
    kraus = tuple(cols[:, f, :, :].reshape(dB * dC, dA) for f in range(dF))
    return choi_from_kraus(KrausSet(kraus, out_space, ch.inputs))


def multi_qci_check(ch: ChoiOperator, tol: float = DEFAULT_TOL) -> tuple[bool, list[float]]:
    """I(B_i : rest | A) for every output; when all vanish, also check the k-fold product form."""
    names = list(ch.outputs.names)
    if len(names) < 2:
        raise LabelError("need at least two outputs")
    cmis = [conditional_mutual_information(ch, [n]) for n in names]
    if any(c > tol for c in cmis):
        return False, cmis
    space = ch.op.space
    margs = [embed(marginal_channel(ch, [n]).op, space) for n in names]
    for a in range(len(margs)):
        for b in range(a + 1, len(margs)):
            if commutator_norm(margs[a], margs[b]) > tol:
                return False, cmis
    prod = margs[0].data
    for mg in margs[1:]:
        prod = prod @ mg.data
    return float(np.linalg.norm(prod - ch.data)) <= tol, cmis


@dataclass(frozen=True, eq=False)
class MultiDecomposition:
    """H_A = (+)_i A_i^1 (x) ... (x) A_i^k with rho = sum_i (x)_j rho_{B_j|A_i^j}."""

    basis: np.ndarray
    blocks: tuple[tuple[int, ...], ...]
    channels: tuple[tuple[ChoiOperator, ...], ...]
    residual: float


def _multi_dual(ch: ChoiOperator, tol: float, rng: np.random.Generator):
    """Returns (dual-frame basis, [(dims, channels)]) for a channel with one input factor."""
    names = list(ch.outputs.names)
    d = ch.d_in
    if len(names) == 1:
        return np.eye(d, dtype=complex), [((d,), [ch])]
    wit = find_decomposition(ch, tol, [names[0]], seed=int(rng.integers(2**31)))
    dec = wit.decomposition
    cols, leaves = [], []
    for i, (n, m) in enumerate(dec.blocks):
        wd = dec.block_columns(i).conj()
        sub_basis, sub_leaves = _multi_dual(wit.right_channels[i], tol, rng)
        rot = wd @ np.kron(np.eye(n), sub_basis)
        sizes = [int(np.prod(dims)) for dims, _ in sub_leaves]
        offs = np.cumsum([0] + sizes)
        for (dims, chans), so, sz in zip(sub_leaves, offs, sizes):
            perm = [l * m + so + x for l in range(n) for x in range(sz)]
            cols.append(rot[:, perm])
            leaves.append(((n,) + tuple(dims), [wit.left_channels[i]] + list(chans)))
    return np.hstack(cols), leaves


def multi_find_decomposition(ch: ChoiOperator, tol: float = DEFAULT_TOL, seed: int = 0) -> MultiDecomposition:
    """Peel off one output at a time and decompose the remaining factor recursively."""
    ok, cmis = multi_qci_check(ch, tol)
    if not ok:
        raise NotConditionallyIndependent(f"outputs are not independent given the input (CMIs {cmis})")
    flat_in = Space.of((_input_label(ch) + "*", ch.d_in))
    flat = ChoiOperator(Operator(ch.outputs + flat_in, ch.data), ch.outputs, flat_in, check=False)
    rng = np.random.default_rng(seed)
    basis_dual, leaves = _multi_dual(flat, tol, rng)

    names = list(ch.outputs.names)
    dout = ch.d_out
    total = np.zeros((dout, ch.d_in, dout, ch.d_in), dtype=complex)
    off = 0
    channels = []
    for i, (dims, chans) in enumerate(leaves):
        relabeled = [c.relabel({dual(c.inputs.names[0]): f"{_input_label(ch)}_{i}_{j}"})
                     for j, c in enumerate(chans)]
        channels.append(tuple(relabeled))
        prod = relabeled[0].op
        for c in relabeled[1:]:
            prod = kron(prod, c.op)
        order = names + [c.inputs.names[0] for c in relabeled]
        sz = int(np.prod(dims))
        blk = permute_systems(prod, order).data.reshape(dout, sz, dout, sz)
        total[:, off:off + sz, :, off:off + sz] = blk
        off += sz
    w = np.kron(np.eye(dout), basis_dual)
    rec = w @ total.reshape(dout * ch.d_in, -1) @ w.conj().T
    residual = float(np.linalg.norm(rec - ch.data))
    if residual > tol:
        raise DecompositionFailed(f"nested reconstruction residual {residual:.3e}", residual)
    return MultiDecomposition(basis_dual.conj(), tuple(d for d, _ in leaves), tuple(channels), residual)


def diagonal_table(ch: ChoiOperator) -> Cpd:
    """The classical table P(outputs | inputs) on the diagonal of a Choi operator."""
    dims = ch.outputs.dims + ch.inputs.dims
    table = np.real(np.diag(ch.data)).reshape(dims)
    targets = tuple(Variable(f.name, f.dim) for f in ch.outputs)
    conds = tuple(Variable(dual(f.name), f.dim) for f in ch.inputs)
    return Cpd(targets, conds, np.clip(table, 0, None), check=False)


def channel_from_table(p: Cpd) -> ChoiOperator:
    """Diagonal Choi operator of a classical conditional table."""
    outputs = Space(tuple(System(v.name, v.card) for v in p.targets))
    inputs = Space(tuple(System(dual(v.name), v.card) for v in p.conditions))
    return ChoiOperator(Operator(outputs + inputs, np.diag(p.table.reshape(-1))), outputs, inputs)


def classical_reduction_check(ch: ChoiOperator, tol: float = DEFAULT_TOL) -> bool:
    """For a diagonal channel, the quantum and classical independence verdicts coincide."""
    diag, invariant = dephase(ch, tol)
    if not invariant:
        raise NotDiagonal("channel is not invariant under dephasing")
    quantum = qci_factorization_check(ch, tol).passed
    table = diagonal_table(ch)
    if len(table.targets) != 2:
        raise LabelError("classical reduction needs exactly two outputs")
    return quantum == ci_check(table, tol)
