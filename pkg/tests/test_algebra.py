import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import block_diag
from scipy.stats import unitary_group

from conftest import random_hermitian
from qcm.algebra import (
    cluster_eigenspaces,
    commutant_basis,
    wedderburn_blocks,
)


def hidden_algebra(structure, rng, count=3):
    """Random Hermitian generators of (+) M_n (x) I_m, hidden behind a Haar rotation."""
    d = sum(n * m for n, m in structure)
    u = unitary_group.rvs(d, random_state=rng) if d > 1 else np.eye(1)
    gens = []
    for _ in range(count):
        parts = [np.kron(random_hermitian(rng, n), np.eye(m)) for n, m in structure]
        gens.append(u @ block_diag(*parts) @ u.conj().T)
    return gens


def test_commutant_of_scalars_is_everything():
    assert len(commutant_basis([np.eye(3)])) == 9


def test_commutant_of_diagonal_generic_is_diagonal():
    basis = commutant_basis([np.diag([0.0, 1.0, 2.0])])
    assert len(basis) == 3
    for b in basis:
        assert np.allclose(b, np.diag(np.diag(b)))


def test_commutant_of_full_algebra_is_scalars(rng):
    gens = [random_hermitian(rng, 3) for _ in range(2)]
    basis = commutant_basis(gens)
    assert len(basis) == 1
    b = basis[0] / basis[0][0, 0]
    assert np.allclose(b, np.eye(3))


def test_cluster_eigenspaces_groups_degenerate_values():
    groups = cluster_eigenspaces(np.diag([1.0, 1.0, 2.0, 3.0, 3.0]))
    assert [g.shape[1] for g in groups] == [2, 1, 2]


@pytest.mark.parametrize(
    "structure",
    [
        [(1, 1), (1, 1)],
        [(2, 1)],
        [(1, 2)],
        [(2, 2)],
        [(1, 1), (2, 1)],
        [(2, 1), (1, 2)],
        [(3, 1), (1, 1), (1, 1)],
        [(2, 2), (1, 1)],
    ],
)
def test_recovers_hidden_blocks(rng, structure):
    gens = hidden_algebra(structure, rng)
    blocks = wedderburn_blocks(gens, rng)
    assert sorted((b.n, b.m) for b in blocks) == sorted(structure)
    q = np.hstack([b.basis for b in blocks])
    d = q.shape[0]
    assert np.allclose(q.conj().T @ q, np.eye(d), atol=1e-8)
    for g in gens:
        rotated = q.conj().T @ g @ q
        start = 0
        for b in blocks:
            size = b.n * b.m
            piece = rotated[start:start + size, start:start + size]
            x = piece.reshape(b.n, b.m, b.n, b.m)[:, 0, :, 0]
            assert np.allclose(piece, np.kron(x, np.eye(b.m)), atol=1e-7)
            off = rotated[start:start + size].copy()
            off[:, start:start + size] = 0
            assert np.allclose(off, 0, atol=1e-7)
            start += size


def test_empty_generators_give_one_block(rng):
    blocks = wedderburn_blocks([np.zeros((2, 2))], rng)
    assert [(b.n, b.m) for b in blocks] == [(1, 2)]


structures = st.lists(st.tuples(st.integers(1, 2), st.integers(1, 2)), min_size=1, max_size=3).filter(
    lambda s: sum(n * m for n, m in s) <= 7
)


@settings(max_examples=25, deadline=None)
@given(structures, st.integers(0, 2**31))
def test_block_multiset_is_basis_independent(structure, seed):
    rng = np.random.default_rng(seed)
    gens = hidden_algebra(structure, rng)
    blocks = wedderburn_blocks(gens, rng)
    assert sorted((b.n, b.m) for b in blocks) == sorted(structure)
    assert sum(b.n ** 2 for b in blocks) == sum(n ** 2 for n, m in structure)
    assert sum(b.m ** 2 for b in blocks) == len(commutant_basis(gens))
