"""Dense operators on labeled tensor-product spaces.

Every operator carries an ordered list of labeled factors.  Matrix entries
are stored row-major against the lexicographic product basis, first factor
most significant, so ``kron`` of two operators is plain ``np.kron``.

Dual spaces are ordinary factors whose label ends in ``*``.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

HERMITICITY_TOL = 1e-10
ZERO_EIGENVALUE_CUTOFF = 1e-12
TRACE_TOL = 1e-10

DUAL_SUFFIX = "*"


class LabelError(ValueError):
    """Raised for unknown, duplicated or mismatched system labels."""


class NotHermitianError(ValueError):
    pass


class NotDensityOperatorError(ValueError):
    pass


def dual(name: str) -> str:
    """Label of the dual space of ``name`` (and back again)."""
    if name.endswith(DUAL_SUFFIX):
        return name[: -len(DUAL_SUFFIX)]
    return name + DUAL_SUFFIX


def is_dual(name: str) -> bool:
    return name.endswith(DUAL_SUFFIX)


@dataclass(frozen=True)
class System:
    name: str
    dim: int

    def __post_init__(self):
        if not isinstance(self.dim, (int, np.integer)) or self.dim < 1:
            raise ValueError(f"dimension of {self.name!r} must be a positive integer, got {self.dim!r}")
        object.__setattr__(self, "dim", int(self.dim))

    @property
    def dual(self) -> "System":
        return System(dual(self.name), self.dim)


@dataclass(frozen=True)
class Space:
    """Ordered tensor product of labeled factors; empty means the scalars."""

    factors: tuple[System, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        names = [f.name for f in self.factors]
        if len(set(names)) != len(names):
            raise LabelError(f"duplicate labels in {names}")

    @classmethod
    def of(cls, *pairs) -> "Space":
        """``Space.of(("A", 2), ("B", 3))`` or ``Space.of(System(...), ...)``."""
        out = []
        for p in pairs:
            out.append(p if isinstance(p, System) else System(*p))
        return cls(tuple(out))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.factors)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(f.dim for f in self.factors)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims, dtype=np.int64)) if self.factors else 1

    def __len__(self):
        return len(self.factors)

    def __iter__(self):
        return iter(self.factors)

    def __contains__(self, name) -> bool:
        if isinstance(name, System):
            name = name.name
        return name in self.names

    def __add__(self, other: "Space") -> "Space":
        return Space(self.factors + other.factors)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LabelError(f"unknown label {name!r}; have {list(self.names)}") from None

    def system(self, name: str) -> System:
        return self.factors[self.index(name)]

    def subspace(self, names: Iterable[str]) -> "Space":
        return Space(tuple(self.system(n) for n in names))

    def without(self, names: Iterable[str]) -> "Space":
        drop = set(names)
        return Space(tuple(f for f in self.factors if f.name not in drop))

    def dualized(self) -> "Space":
        return Space(tuple(f.dual for f in self.factors))


def _as_space(space) -> Space:
    if isinstance(space, Space):
        return space
    return Space.of(*space)


@dataclass(frozen=True, eq=False)
class Operator:
    """Square complex matrix acting on ``space``.  Immutable."""

    space: Space
    data: np.ndarray

    def __post_init__(self):
        space = _as_space(self.space)
        data = np.array(self.data, dtype=complex)
        n = space.total_dim
        if data.shape != (n, n):
            raise ValueError(f"data shape {data.shape} does not match space dimension {n}")
        data.setflags(write=False)
        object.__setattr__(self, "space", space)
        object.__setattr__(self, "data", data)

    @property
    def dim(self) -> int:
        return self.space.total_dim

    @property
    def names(self) -> tuple[str, ...]:
        return self.space.names

    def dagger(self) -> "Operator":
        return Operator(self.space, self.data.conj().T)

    def trace(self) -> complex:
        return complex(np.trace(self.data))

    def scale(self, c) -> "Operator":
        return Operator(self.space, c * self.data)

    def __add__(self, other: "Operator") -> "Operator":
        other = align(other, self.space)
        return Operator(self.space, self.data + other.data)

    def __sub__(self, other: "Operator") -> "Operator":
        other = align(other, self.space)
        return Operator(self.space, self.data - other.data)

    def __matmul__(self, other: "Operator") -> "Operator":
        return multiply(self, other)

    def __repr__(self):
        return f"Operator({list(self.space.names)}, dim={self.dim})"


def identity(space) -> Operator:
    space = _as_space(space)
    return Operator(space, np.eye(space.total_dim))


def projector(space, vector) -> Operator:
    """|v><v| for a ket given in the product basis of ``space``."""
    v = np.asarray(vector, dtype=complex).reshape(-1)
    return Operator(space, np.outer(v, v.conj()))


def kron(a: Operator, *rest: Operator) -> Operator:
    out = a
    for b in rest:
        clash = set(out.names) & set(b.names)
        if clash:
            raise LabelError(f"label collision in kron: {sorted(clash)}")
        out = Operator(out.space + b.space, np.kron(out.data, b.data))
    return out


def _letters(n: int) -> list[str]:
    pool = string.ascii_letters
    if n > len(pool):
        raise ValueError("too many tensor factors")
    return list(pool[:n])


def partial_trace(m: Operator, over: Iterable) -> Operator:
    """Trace out the factors named in ``over``."""
    over = [o.name if isinstance(o, System) else o for o in over]
    for name in over:
        m.space.index(name)
    if not over:
        return m
    keep = [f for f in m.space if f.name not in set(over)]
    dims = m.space.dims
    n = len(dims)
    letters = _letters(2 * n)
    rows, cols = letters[:n], letters[n:]
    out_rows, out_cols = [], []
    for i, f in enumerate(m.space):
        if f.name in over:
            cols[i] = rows[i]
        else:
            out_rows.append(rows[i])
            out_cols.append(cols[i])
    expr = "".join(rows) + "".join(cols) + "->" + "".join(out_rows) + "".join(out_cols)
    t = np.einsum(expr, m.data.reshape(dims + dims))
    space = Space(tuple(keep))
    return Operator(space, t.reshape(space.total_dim, space.total_dim))


def permute_systems(m: Operator, order: Sequence[str]) -> Operator:
    """Reorder factors so that ``names == order``."""
    order = [o.name if isinstance(o, System) else o for o in order]
    if sorted(order) != sorted(m.names) or len(set(order)) != len(order):
        raise LabelError(f"{order} is not a permutation of {list(m.names)}")
    if tuple(order) == m.names:
        return m
    perm = [m.space.index(name) for name in order]
    n = len(perm)
    dims = m.space.dims
    t = m.data.reshape(dims + dims).transpose(perm + [p + n for p in perm])
    space = m.space.subspace(order)
    return Operator(space, t.reshape(space.total_dim, space.total_dim))


def embed(m: Operator, space) -> Operator:
    """Tensor ``m`` with identities on the factors of ``space`` it lacks, in ``space`` order."""
    space = _as_space(space)
    missing = []
    for f in m.space:
        if f not in space.factors:
            raise LabelError(f"factor {f} of operator not present in target space {list(space.names)}")
    for f in space:
        if f.name not in m.names:
            missing.append(f)
    full = kron(m, identity(Space(tuple(missing)))) if missing else m
    return permute_systems(full, space.names)


def align(m: Operator, space) -> Operator:
    """Permute ``m`` into the factor order of ``space`` (same factor set)."""
    space = _as_space(space)
    if set(m.names) != set(space.names):
        raise LabelError(f"structure mismatch: {list(m.names)} vs {list(space.names)}")
    return permute_systems(m, space.names)


def union_space(*ops: Operator) -> Space:
    factors: list[System] = []
    seen: dict[str, System] = {}
    for op in ops:
        for f in op.space:
            if f.name in seen:
                if seen[f.name].dim != f.dim:
                    raise LabelError(f"label {f.name!r} used with dims {seen[f.name].dim} and {f.dim}")
                continue
            seen[f.name] = f
            factors.append(f)
    return Space(tuple(factors))


def multiply(*ops: Operator, space: Space | None = None) -> Operator:
    """Product in the written order, each factor padded with identities."""
    space = space or union_space(*ops)
    out = embed(ops[0], space).data
    for op in ops[1:]:
        out = out @ embed(op, space).data
    return Operator(space, out)


def frobenius(a: Operator, b: Operator | None = None) -> float:
    if b is None:
        return float(np.linalg.norm(a.data))
    return float(np.linalg.norm(a.data - align(b, a.space).data))


def is_hermitian(m: Operator, tol: float = HERMITICITY_TOL) -> bool:
    scale = max(1.0, float(np.max(np.abs(m.data)))) if m.data.size else 1.0
    return float(np.max(np.abs(m.data - m.data.conj().T))) <= tol * scale


def _require_hermitian(m: Operator, tol: float = HERMITICITY_TOL):
    if not is_hermitian(m, tol):
        dev = float(np.max(np.abs(m.data - m.data.conj().T)))
        raise NotHermitianError(f"operator on {list(m.names)} is not Hermitian (max deviation {dev:.3e})")


def hermitian_eig(m: Operator) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and the unitary of column eigenvectors."""
    _require_hermitian(m)
    h = (m.data + m.data.conj().T) / 2
    w, v = np.linalg.eigh(h)
    return w[::-1].copy(), v[:, ::-1].copy()


def eigvalsh(m: Operator) -> np.ndarray:
    _require_hermitian(m)
    return np.linalg.eigvalsh((m.data + m.data.conj().T) / 2)[::-1]


def psd_check(m: Operator, tol: float = 1e-10) -> bool:
    """True iff the smallest eigenvalue is at least ``-tol``."""
    w = eigvalsh(m)
    return bool(w.size == 0 or w[-1] >= -tol)


def commutator_norm(a: Operator, b: Operator) -> float:
    """Frobenius norm of ab - ba; both operators must carry the same factor set."""
    b = align(b, a.space)
    return float(np.linalg.norm(a.data @ b.data - b.data @ a.data))


def shannon_entropy(p) -> float:
    p = np.asarray(p, dtype=float).reshape(-1)
    p = p[p > ZERO_EIGENVALUE_CUTOFF]
    return float(-np.sum(p * np.log2(p)))


def von_neumann_entropy(rho: Operator, psd_tol: float = 1e-10) -> float:
    """Entropy in bits of a density operator."""
    tr = rho.trace()
    if abs(tr - 1) > TRACE_TOL:
        raise NotDensityOperatorError(f"trace is {tr:.12g}, expected 1")
    w = eigvalsh(rho)
    if w.size and w[-1] < -psd_tol:
        raise NotDensityOperatorError(f"negative eigenvalue {w[-1]:.3e}")
    w = w / tr.real
    return shannon_entropy(w)


def reduced_entropy(rho: Operator, keep: Iterable[str]) -> float:
    """Entropy of the marginal of ``rho`` on the factors in ``keep``."""
    keep = set(keep)
    return von_neumann_entropy(partial_trace(rho, [n for n in rho.names if n not in keep]))


def basis_ket(dim: int, i: int) -> np.ndarray:
    v = np.zeros(dim, dtype=complex)
    v[i] = 1
    return v
