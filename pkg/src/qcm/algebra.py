"""Block structure of finite-dimensional matrix *-algebras.

Given a self-adjoint generating set ``S`` of ``d x d`` matrices, the unital
algebra it generates is unitarily equivalent to

    (+)_i  M_{n_i} (x) I_{m_i}

and its commutant to ``(+)_i I_{n_i} (x) M_{m_i}``.  ``wedderburn_blocks``
finds that basis: central blocks come from the eigenspaces of a random
Hermitian central element, and each block is factored through the
eigenspaces of a random Hermitian element of the compressed commutant.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

NULL_TOL = 1e-9
GAP_TOL = 1e-7


class DecompositionFailed(RuntimeError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


@dataclass(frozen=True)
class AlgebraBlock:
    n: int
    m: int
    basis: np.ndarray  # d x (n*m), columns indexed (a, r) -> a*m + r


def _null_space(mat: np.ndarray, tol: float) -> np.ndarray:
    if mat.size == 0:
        return np.eye(mat.shape[1], dtype=complex)
    _, s, vh = np.linalg.svd(mat)
    scale = max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol * scale))
    return vh[rank:].conj().T


def commutant_basis(generators: Sequence[np.ndarray], tol: float = NULL_TOL) -> list[np.ndarray]:
    """Basis of {X : [X, S] = 0 for all S}."""
    d = generators[0].shape[0] if generators else 1
    eye = np.eye(d)
    # row-major vec: vec(X S) = (I (x) S^T) vec X, vec(S X) = (S (x) I) vec X
    rows = [np.kron(eye, s.T) - np.kron(s, eye) for s in generators]
    mat = np.vstack(rows) if rows else np.zeros((0, d * d))
    null = _null_space(mat, tol)
    return [null[:, k].reshape(d, d) for k in range(null.shape[1])]


def _random_hermitian(basis: Sequence[np.ndarray], rng: np.random.Generator) -> np.ndarray:
    coeffs = rng.normal(size=len(basis)) + 1j * rng.normal(size=len(basis))
    x = sum(c * b for c, b in zip(coeffs, basis))
    h = (x + x.conj().T) / 2
    norm = np.linalg.norm(h)
    return h / norm if norm > 0 else h


def cluster_eigenspaces(h: np.ndarray, gap_tol: float = GAP_TOL) -> list[np.ndarray]:
    """Orthonormal bases of the eigenspaces of Hermitian ``h``, eigenvalues clustered."""
    w, v = np.linalg.eigh(h)
    spread = max(1.0, float(w[-1] - w[0])) if w.size else 1.0
    groups, start = [], 0
    for k in range(1, len(w) + 1):
        if k == len(w) or w[k] - w[k - 1] > gap_tol * spread:
            groups.append(v[:, start:k])
            start = k
    return groups


def wedderburn_blocks(
    generators: Sequence[np.ndarray],
    rng: np.random.Generator,
    null_tol: float = NULL_TOL,
    gap_tol: float = GAP_TOL,
    attempts: int = 5,
) -> list[AlgebraBlock]:
    """Block decomposition of the unital *-algebra generated by ``generators``.

    The generating set must be closed under adjoints (up to span).
    """
    gens = [np.asarray(g, dtype=complex) for g in generators]
    d = gens[0].shape[0]
    gens = [g for g in gens if np.linalg.norm(g) > 0] or [np.eye(d, dtype=complex)]
    comm = commutant_basis(gens, null_tol)
    center = commutant_basis(gens + comm, null_tol)
    if not center:
        raise DecompositionFailed("empty center; numerical tolerance too tight")

    last_err = None
    for _ in range(attempts):
        try:
            return _blocks_once(comm, center, d, rng, gap_tol)
        except DecompositionFailed as err:
            last_err = err
    raise last_err


def _blocks_once(comm, center, d, rng, gap_tol) -> list[AlgebraBlock]:
    z = _random_hermitian(center, rng)
    central = cluster_eigenspaces(z, gap_tol)
    if len(central) != len(center):
        raise DecompositionFailed(
            f"central element split into {len(central)} blocks but the center has dimension {len(center)}"
        )
    blocks = []
    for q in central:
        dim = q.shape[1]
        local = [q.conj().T @ c @ q for c in comm]
        h = _random_hermitian(local, rng)
        spaces = cluster_eigenspaces(h, gap_tol)
        m = len(spaces)
        sizes = {s.shape[1] for s in spaces}
        if len(sizes) != 1 or m * sizes.pop() != dim:
            raise DecompositionFailed(
                f"commutant eigenspaces of unequal multiplicity {[s.shape[1] for s in spaces]}"
            )
        n = dim // m
        first = spaces[0]
        cols = np.zeros((dim, n, m), dtype=complex)
        cols[:, :, 0] = first
        for r in range(1, m):
            proj = spaces[r] @ spaces[r].conj().T
            for _ in range(10):
                c = sum((rng.normal() + 1j * rng.normal()) * x for x in local)
                w = proj @ c @ first
                nu = np.linalg.norm(w[:, 0])
                if nu > 1e-6 * max(1.0, np.linalg.norm(c)):
                    break
            else:
                raise DecompositionFailed("could not link commutant eigenspaces")
            cols[:, :, r] = w / nu
        local_basis = cols.reshape(dim, n * m)
        if np.linalg.norm(local_basis.conj().T @ local_basis - np.eye(dim)) > 1e-8:
            raise DecompositionFailed("block basis is not orthonormal")
        blocks.append(AlgebraBlock(n, m, q @ local_basis))
    return blocks
