import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qcm.algebra import DecompositionFailed
from qcm.channel import KrausSet, choi_from_kraus, choi_from_unitary, kraus_from_choi, marginal_channel
from qcm.classical import Cpd, NotConditionallyIndependent, Variable, ci_check
from qcm.constructions import CNOT, coherent_copy, classical_cnot, incoherent_copy, product_unitary, quantum_cnot
from qcm.qci import (
    NotDiagonal,
    channel_from_table,
    classical_reduction_check,
    common_cause_dilation,
    conditional_mutual_information,
    diagonal_table,
    find_decomposition,
    multi_find_decomposition,
    multi_qci_check,
    no_causal_influence,
    qci_factorization_check,
)
from qcm.sampling import (
    haar_unitary,
    random_channel,
    random_condition4_channel,
    random_diagonal_channel,
    random_generic_channel,
    random_kraus,
    random_unitary_fork,
)
from qcm.tensor import LabelError, Space

TOL = 1e-8
BC = Space.of(("B", 2), ("C", 2))


def block_sum_kraus(blocks_kraus, d, rng):
    """Kraus set of sum_i (x)_j rho_{B_j|A_i^j}: block i is reached through a random isometry."""
    u = haar_unitary(d, rng)
    ops, off = [], 0
    for factors in blocks_kraus:
        dims = [f[0].shape[1] for f in factors]
        size = int(np.prod(dims))
        q = u[:, off:off + size]
        for combo in np.ndindex(*[len(f) for f in factors]):
            k = factors[0][combo[0]]
            for f, c in zip(factors[1:], combo[1:]):
                k = np.kron(k, f[c])
            ops.append(k @ q.conj().T)
        off += size
    return ops


def nested_channel(structure, rng, d_out=2, names=("B", "C", "D")):
    d = sum(int(np.prod(s)) for s in structure)
    blocks = [[random_kraus(n, d_out, max(1, -(-n // d_out)) + 1, rng) for n in s] for s in structure]
    ops = block_sum_kraus(blocks, d, rng)
    outs = Space.of(*[(n, d_out) for n in names[:len(structure[0])]])
    return choi_from_kraus(KrausSet(tuple(ops), outs, Space.of(("A", d))))


def product_with_state(rng, d_a=3):
    ks = random_kraus(d_a, 2, 2, rng)
    psi = rng.normal(size=(2, 1)) + 1j * rng.normal(size=(2, 1))
    psi /= np.linalg.norm(psi)
    return choi_from_kraus(KrausSet(tuple(np.kron(k, psi) for k in ks), BC, Space.of(("A", d_a))))


def rotate_input(ch, g):
    k = kraus_from_choi(ch)
    return choi_from_kraus(KrausSet(tuple(op @ g for op in k.operators), k.outputs, k.inputs))


class TestNoCausalInfluence:
    def test_classical_cnot_target_does_not_reach_copy(self):
        ok, res = no_causal_influence(classical_cnot(), "lambda", "Y")
        assert ok and res <= 1e-12

    def test_quantum_cnot_back_action(self):
        ok, res = no_causal_influence(choi_from_unitary(quantum_cnot()), "lambda", "B")
        assert not ok and res > 0.5

    def test_product_unitary_no_coupling(self, rng):
        u = product_unitary(haar_unitary(2, rng), haar_unitary(2, rng))
        assert no_causal_influence(choi_from_unitary(u), "A", "C")[0]
        assert no_causal_influence(choi_from_unitary(u), "D", "B")[0]
        assert not no_causal_influence(choi_from_unitary(u), "A", "B")[0]

    def test_gate_and_choi_paths_agree(self, rng):
        u = product_unitary(haar_unitary(2, rng), haar_unitary(2, rng))
        gate = u.__class__(CNOT @ u.matrix, u.inputs, u.outputs)
        for frm, to in [("A", "B"), ("A", "C"), ("D", "B"), ("D", "C")]:
            r1 = no_causal_influence(gate, frm, to)[1]
            r2 = no_causal_influence(choi_from_unitary(gate), frm, to)[1]
            assert r1 == pytest.approx(r2, abs=1e-10)

    def test_missing_label(self):
        with pytest.raises(LabelError):
            no_causal_influence(classical_cnot(), "Q", "Y")


class TestFactorization:
    def test_incoherent_copy(self):
        r = qci_factorization_check(incoherent_copy())
        assert r.passed and r.defect <= 1e-12

    def test_coherent_copy(self):
        passed, defect, _ = qci_factorization_check(coherent_copy())
        assert not passed and defect > 0.1

    @pytest.mark.parametrize("seed", range(5))
    def test_unitary_fork(self, seed):
        assert qci_factorization_check(random_unitary_fork(np.random.default_rng(seed)), 1e-9).passed

    def test_one_output_rejected(self, rng):
        with pytest.raises(LabelError):
            qci_factorization_check(random_channel(Space.of(("B", 2)), Space.of(("A", 2)), rng))


class TestCmi:
    def test_examples(self, rng):
        assert conditional_mutual_information(coherent_copy()) == pytest.approx(1.0, abs=1e-9)
        assert abs(conditional_mutual_information(incoherent_copy())) <= 1e-9
        assert abs(conditional_mutual_information(product_with_state(rng))) <= 1e-9

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 2**31))
    def test_non_negative_and_monotone(self, seed):
        rng = np.random.default_rng(seed)
        outs = Space.of(("B", 2), ("C1", 2), ("C2", 2))
        ch = random_channel(outs, Space.of(("A", int(rng.integers(1, 4)))), rng, rank=int(rng.integers(1, 4)))
        full = conditional_mutual_information(ch, ["B"], ["C1", "C2"])
        part = conditional_mutual_information(marginal_channel(ch, ["B", "C1"]), ["B"], ["C1"])
        assert part >= -1e-9
        assert full >= part - 1e-9


class TestDecomposition:
    def test_incoherent_copy_blocks(self):
        w = find_decomposition(incoherent_copy())
        assert w.blocks == ((1, 1), (1, 1))
        assert w.residual <= 1e-10

    def test_unitary_single_block(self):
        cnot = choi_from_kraus(KrausSet((CNOT,), BC, Space.of(("A", 2), ("D", 2))))
        w = find_decomposition(cnot)
        assert w.blocks == ((2, 2),)

    def test_rejects_coherent_copy(self):
        with pytest.raises(NotConditionallyIndependent):
            find_decomposition(coherent_copy())

    @pytest.mark.parametrize("seed", range(10))
    def test_generator_round_trip(self, seed):
        s = random_condition4_channel(np.random.default_rng(seed))
        w = find_decomposition(s.channel)
        assert tuple(sorted(w.blocks)) == s.blocks
        assert w.residual <= TOL
        assert np.linalg.norm(w.reconstruct().data - s.channel.data) <= TOL
        basis = w.decomposition.basis
        assert np.allclose(basis.conj().T @ basis, np.eye(basis.shape[0]), atol=1e-10)
        for c in w.left_channels + w.right_channels:
            assert c.defects().ok(cp_tol=1e-9, tp_tol=1e-8)

    @pytest.mark.parametrize("structure", [[(1, 2), (2, 1)], [(2, 2), (1, 1)], [(1, 1), (1, 1), (1, 1)]])
    def test_independent_kraus_generator(self, rng, structure):
        # block sums assembled from Kraus operators, independent of the sampler
        w = find_decomposition(nested_channel(structure, rng, names=("B", "C")))
        assert sorted(w.blocks) == sorted(structure)

    @settings(max_examples=15, deadline=None)
    @given(st.integers(0, 2**31))
    def test_blocks_invariant_under_input_rotation(self, seed):
        rng = np.random.default_rng(seed)
        s = random_condition4_channel(rng, d_max=5)
        g = haar_unitary(s.channel.d_in, rng)
        rotated = rotate_input(s.channel, g)
        assert find_decomposition(rotated).blocks == find_decomposition(s.channel).blocks


class TestDilation:
    def test_incoherent_copy(self):
        dil = common_cause_dilation(incoherent_copy())
        assert dil.passes(1e-8)
        assert len(dil.witness.blocks) == 2
        assert dil.commutator <= 1e-10

    def test_unitary_channel_is_trivially_dilated(self):
        cnot = choi_from_kraus(KrausSet((CNOT,), BC, Space.of(("A", 2), ("D", 2))))
        dil = common_cause_dilation(cnot)
        assert dil.passes()
        assert dil.u.inputs.system("lambda_B").dim == 1
        assert dil.u.inputs.system("lambda_C").dim == 1

    @pytest.mark.parametrize("seed", range(8))
    def test_soundness_on_generator(self, seed):
        dil = common_cause_dilation(random_condition4_channel(np.random.default_rng(seed)).channel)
        assert dil.unitarity_defect <= 1e-10
        assert max(dil.no_influence.values()) <= 1e-8
        assert dil.reproduction_residual <= 1e-8
        assert dil.commutator <= 1e-10

    @pytest.mark.parametrize("seed", range(8))
    def test_completeness_generic_raises(self, seed):
        ch = random_generic_channel(np.random.default_rng(seed))
        with pytest.raises((NotConditionallyIndependent, DecompositionFailed)):
            common_cause_dilation(ch)

    def test_ancilla_influences_certified_independently(self):
        dil = common_cause_dilation(incoherent_copy())
        assert no_causal_influence(choi_from_unitary(dil.u), "lambda_B", "C")[0]
        assert no_causal_influence(choi_from_unitary(dil.u), "lambda_C", "B")[0]


@pytest.mark.parametrize("seed", range(12))
def test_equivalence_on_mixed_corpus(seed):
    rng = np.random.default_rng(seed)
    ch = random_condition4_channel(rng).channel if seed % 2 else random_generic_channel(rng)
    fact = qci_factorization_check(ch, TOL).passed
    cmi = conditional_mutual_information(ch) <= TOL
    try:
        dec = find_decomposition(ch, TOL, check_cmi=False).residual <= TOL
    except DecompositionFailed:
        dec = False
    assert fact == cmi == dec == bool(seed % 2)


class TestMulti:
    def test_two_outputs_match_pair_check(self):
        ok, cmis = multi_qci_check(incoherent_copy())
        assert ok and max(cmis) <= 1e-9

    def test_three_output_incoherent(self):
        ch = incoherent_copy(3)
        assert multi_qci_check(ch)[0]
        md = multi_find_decomposition(ch)
        assert md.blocks == ((1, 1, 1), (1, 1, 1))
        assert md.residual <= 1e-8

    def test_three_output_coherent(self):
        ok, cmis = multi_qci_check(coherent_copy(3))
        assert not ok
        assert np.allclose(cmis, 1.0, atol=1e-9)

    def test_product_of_three_is_one_block(self, rng):
        ks = [random_kraus(2, 2, 2, rng) for _ in range(3)]
        ops = [np.kron(np.kron(a, b), c) for a in ks[0] for b in ks[1] for c in ks[2]]
        outs = Space.of(("B", 2), ("C", 2), ("D", 2))
        ch = choi_from_kraus(KrausSet(tuple(ops), outs, Space.of(("A1", 2), ("A2", 2), ("A3", 2))))
        md = multi_find_decomposition(ch)
        assert md.blocks == ((2, 2, 2),)

    @pytest.mark.parametrize("structure", [[(1, 2, 1), (1, 1, 1)], [(2, 1, 1), (1, 1, 2)]])
    def test_nested_round_trip(self, rng, structure):
        ch = nested_channel(structure, rng)
        md = multi_find_decomposition(ch)
        assert sorted(md.blocks) == sorted(structure)
        assert md.residual <= 1e-8


class TestClassicalReduction:
    def test_incoherent_copy_agrees(self):
        assert classical_reduction_check(incoherent_copy())
        assert ci_check(diagonal_table(incoherent_copy()))

    def test_correlated_noise_both_false(self):
        table = np.zeros((2, 2, 2))
        table[0, 0, :] = table[1, 1, :] = 0.5
        p = Cpd((Variable("B", 2), Variable("C", 2)), (Variable("A", 2),), table)
        ch = channel_from_table(p)
        assert not ci_check(p)
        assert not qci_factorization_check(ch).passed
        assert classical_reduction_check(ch)

    def test_not_diagonal(self):
        with pytest.raises(NotDiagonal):
            classical_reduction_check(coherent_copy())

    @pytest.mark.parametrize("seed", range(10))
    def test_random_diagonal_agrees(self, seed):
        ch = random_diagonal_channel(np.random.default_rng(seed))
        assert qci_factorization_check(ch).passed == ci_check(diagonal_table(ch), 1e-8)
