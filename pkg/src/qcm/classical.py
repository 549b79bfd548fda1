"""Classical causal models over finite variables.

Conditional tables are numpy arrays with one axis per target variable
followed by one axis per conditioning variable.  A joint distribution is a
``Cpd`` with no conditioning variables.
"""

from __future__ import annotations

import itertools
import string
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12


class NotConditionallyIndependent(ValueError):
    pass


class VariableMismatch(ValueError):
    pass


@dataclass(frozen=True)
class Variable:
    name: str
    card: int

    def __post_init__(self):
        if int(self.card) < 1:
            raise ValueError(f"cardinality of {self.name!r} must be positive")
        object.__setattr__(self, "card", int(self.card))


def _vars(items) -> tuple[Variable, ...]:
    return tuple(v if isinstance(v, Variable) else Variable(*v) for v in items)


@dataclass(frozen=True, eq=False)
class Cpd:
    """P(targets | conditions) as a dense table."""

    targets: tuple[Variable, ...]
    conditions: tuple[Variable, ...]
    table: np.ndarray
    check: bool = field(default=True, repr=False)

    def __post_init__(self):
        targets, conditions = _vars(self.targets), _vars(self.conditions)
        names = [v.name for v in targets + conditions]
        if len(set(names)) != len(names):
            raise VariableMismatch(f"duplicate variable names {names}")
        shape = tuple(v.card for v in targets + conditions)
        table = np.array(self.table, dtype=float).reshape(shape)
        table.setflags(write=False)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "conditions", conditions)
        object.__setattr__(self, "table", table)
        if self.check:
            if np.any(table < -PROB_TOL):
                raise ValueError("negative probability")
            sums = self.flat().sum(axis=0)
            if np.any(np.abs(sums - 1) > PROB_TOL * max(1, self.flat().shape[0])):
                raise ValueError(f"conditional distributions do not sum to one (worst {np.max(np.abs(sums - 1)):.2e})")

    @property
    def target_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.targets)

    @property
    def condition_names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.conditions)

    @property
    def variables(self) -> tuple[Variable, ...]:
        return self.targets + self.conditions

    def flat(self) -> np.ndarray:
        """Table reshaped to (target configurations, condition configurations)."""
        ny = int(np.prod([v.card for v in self.targets], dtype=np.int64))
        return self.table.reshape(ny, -1)

    def marginal(self, keep: Iterable[str]) -> "Cpd":
        keep = list(keep)
        for k in keep:
            if k not in self.target_names:
                raise VariableMismatch(f"{k!r} is not a target")
        drop = tuple(i for i, v in enumerate(self.targets) if v.name not in keep)
        table = self.table.sum(axis=drop) if drop else self.table
        targets = tuple(v for v in self.targets if v.name in keep)
        out = Cpd(targets, self.conditions, table, check=False)
        return out.reorder(keep, self.condition_names)

    def reorder(self, targets: Sequence[str], conditions: Sequence[str]) -> "Cpd":
        names = list(self.target_names) + list(self.condition_names)
        order = [names.index(n) for n in list(targets) + list(conditions)]
        t = self.table.transpose(order)
        tv = tuple(self.variables[names.index(n)] for n in targets)
        cv = tuple(self.variables[names.index(n)] for n in conditions)
        return Cpd(tv, cv, t, check=False)

    def __repr__(self):
        return f"Cpd({list(self.target_names)}|{list(self.condition_names)})"


def _einsum_contract(factors: Sequence[tuple[Sequence[str], np.ndarray]], keep: Sequence[str]) -> np.ndarray:
    names: list[str] = []
    for vs, _ in factors:
        for v in vs:
            if v not in names:
                names.append(v)
    letters = dict(zip(names, string.ascii_letters))
    expr = ",".join("".join(letters[v] for v in vs) for vs, _ in factors)
    expr += "->" + "".join(letters[v] for v in keep)
    return np.einsum(expr, *[a for _, a in factors])


def ci_check(p: Cpd, tol: float = PROB_TOL) -> bool:
    """P(YZ|X) == P(Y|X) P(Z|X) for a two-target table."""
    if len(p.targets) != 2:
        raise VariableMismatch(f"ci_check needs exactly two targets, got {len(p.targets)}")
    return ci_deviation(p) <= tol


def ci_deviation(p: Cpd) -> float:
    y, z = p.target_names
    py = p.marginal([y]).table
    pz = p.marginal([z]).table
    prod = py[:, None, ...] * pz[None, :, ...]
    return float(np.max(np.abs(p.table - prod)))


@dataclass(frozen=True)
class Dag:
    nodes: tuple[str, ...]
    edges: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        object.__setattr__(self, "edges", tuple(tuple(e) for e in self.edges))
        if len(set(self.nodes)) != len(self.nodes):
            raise ValueError("duplicate node names")
        for a, b in self.edges:
            if a not in self.nodes or b not in self.nodes:
                raise ValueError(f"edge {a}->{b} refers to an unknown node")
        if len(self.topological_order()) != len(self.nodes):
            raise ValueError("graph has a directed cycle")

    def parents(self, node: str) -> tuple[str, ...]:
        return tuple(a for a, b in self.edges if b == node)

    def children(self, node: str) -> tuple[str, ...]:
        return tuple(b for a, b in self.edges if a == node)

    def topological_order(self) -> tuple[str, ...]:
        """Kahn's algorithm, ties broken by name."""
        indeg = {n: 0 for n in self.nodes}
        for _, b in self.edges:
            indeg[b] += 1
        ready = sorted(n for n, k in indeg.items() if k == 0)
        out = []
        while ready:
            n = ready.pop(0)
            out.append(n)
            for c in self.children(n):
                indeg[c] -= 1
                if indeg[c] == 0:
                    ready.append(c)
                    ready.sort()
        return tuple(out)


def conditional_from_joint(joint: Cpd, target: str, parents: Sequence[str]) -> Cpd:
    """P(target | parents) from a joint; null parent fibers get the uniform distribution."""
    marg = joint.marginal([target, *parents])
    t = marg.table
    norm = t.sum(axis=0, keepdims=True)
    card = t.shape[0]
    with np.errstate(invalid="ignore", divide="ignore"):
        cond = np.where(norm > 0, t / np.where(norm > 0, norm, 1), 1.0 / card)
    return Cpd(marg.targets[:1], marg.targets[1:], cond)


def _check_joint_matches(joint: Cpd, dag: Dag):
    if joint.conditions:
        raise VariableMismatch("expected a joint distribution with no conditioning variables")
    if set(joint.target_names) != set(dag.nodes):
        raise VariableMismatch(f"joint over {joint.target_names} but DAG nodes are {dag.nodes}")


def markov_check(joint: Cpd, dag: Dag, tol: float = PROB_TOL) -> bool:
    return markov_deviation(joint, dag) <= tol


def markov_deviation(joint: Cpd, dag: Dag) -> float:
    """Worst gap between the joint and the product of its parent conditionals."""
    _check_joint_matches(joint, dag)
    names = joint.target_names
    factors = []
    mask = np.ones(joint.table.shape, dtype=bool)
    for node in dag.nodes:
        pa = dag.parents(node)
        factors.append(((node, *pa), conditional_from_joint(joint, node, pa).table))
        if pa:
            pm = joint.marginal(list(pa)).table
            ones = [((n,), np.ones(v.card)) for n, v in zip(names, joint.targets)]
            support = _einsum_contract([(pa, (pm > 0).astype(float))] + ones, names) > 0
            mask &= support
    prod = _einsum_contract(factors, names)
    diff = np.abs(prod - joint.table)
    return float(np.max(np.where(mask, diff, 0.0))) if diff.size else 0.0


@dataclass(frozen=True, eq=False)
class ClassicalDilation:
    """Y = f(X, lambda) with lambda ~ weights; ``function[l, x...]`` is a flat target index."""

    weights: np.ndarray
    function: np.ndarray
    targets: tuple[Variable, ...]
    conditions: tuple[Variable, ...]

    @property
    def n_latent(self) -> int:
        return len(self.weights)

    def table(self) -> np.ndarray:
        """sum_lambda delta(Y, f(X, lambda)) P(lambda), shaped like the source table."""
        ny = int(np.prod([v.card for v in self.targets], dtype=np.int64))
        f = self.function.reshape(self.n_latent, -1)
        out = np.zeros((ny, f.shape[1]))
        for lam, w in enumerate(self.weights):
            out[f[lam], np.arange(f.shape[1])] += w
        return out.reshape(tuple(v.card for v in self.targets + self.conditions))

    def as_cpd(self) -> Cpd:
        return Cpd(self.targets, self.conditions, self.table())


def classical_dilation(p: Cpd, cutoff: float = 0.0) -> ClassicalDilation:
    """Deterministic dilation with lambda ranging over functions X -> Y.

    Each function f gets weight prod_x P(f(x)|x); zero-weight functions are dropped.
    """
    flat = p.flat()
    ny, nx = flat.shape
    weights, funcs = [], []
    for f in itertools.product(range(ny), repeat=nx):
        w = float(np.prod(flat[list(f), np.arange(nx)]))
        if w > cutoff:
            weights.append(w)
            funcs.append(f)
    cond_shape = tuple(v.card for v in p.conditions)
    function = np.array(funcs, dtype=int).reshape((len(funcs),) + cond_shape)
    return ClassicalDilation(np.array(weights), function, p.targets, p.conditions)


@dataclass(frozen=True, eq=False)
class ClassicalCommonCause:
    y: ClassicalDilation
    z: ClassicalDilation
    residual: float

    def table(self) -> np.ndarray:
        """sum over independent latents of delta(Y, f_Y) delta(Z, f_Z) P(lambda_Y) P(lambda_Z)."""
        fy = self.y.function.reshape(self.y.n_latent, -1)
        fz = self.z.function.reshape(self.z.n_latent, -1)
        ny = self.y.targets[0].card
        nz = self.z.targets[0].card
        nx = fy.shape[1]
        out = np.zeros((ny, nz, nx))
        cols = np.arange(nx)
        for a, wa in enumerate(self.y.weights):
            for b, wb in enumerate(self.z.weights):
                out[fy[a], fz[b], cols] += wa * wb
        return out.reshape((ny, nz) + tuple(v.card for v in self.y.conditions))


def common_cause_dilation_classical(p: Cpd, tol: float = PROB_TOL) -> ClassicalCommonCause:
    """Independent latents per output; raises if they cannot reproduce ``p``."""
    if len(p.targets) != 2:
        raise VariableMismatch("need a two-target table P(YZ|X)")
    y, z = p.target_names
    dy = classical_dilation(p.marginal([y]))
    dz = classical_dilation(p.marginal([z]))
    probe = ClassicalCommonCause(dy, dz, 0.0)
    residual = float(np.max(np.abs(probe.table() - p.table)))
    if residual > tol:
        raise NotConditionallyIndependent(f"no common-cause dilation: residual {residual:.3e}")
    return ClassicalCommonCause(dy, dz, residual)


@dataclass(frozen=True, eq=False)
class FunctionalModel:
    """Node values x_i = f_i(lambda_i, parents) with independent latents.

    ``functions[node]`` is an int array of shape (n_lambda, *parent cards)
    with parents in ``dag.parents(node)`` order.
    """

    dag: Dag
    cards: Mapping[str, int]
    latents: Mapping[str, np.ndarray]
    functions: Mapping[str, np.ndarray]

    def __post_init__(self):
        for node in self.dag.nodes:
            w = np.asarray(self.latents[node], dtype=float)
            if abs(w.sum() - 1) > PROB_TOL * max(1, len(w)) or np.any(w < 0):
                raise ValueError(f"latent distribution of {node!r} is not normalized")
            f = np.asarray(self.functions[node])
            shape = (len(w),) + tuple(self.cards[p] for p in self.dag.parents(node))
            if f.shape != shape:
                raise ValueError(f"function table of {node!r} has shape {f.shape}, expected {shape}")
            if f.size and (f.min() < 0 or f.max() >= self.cards[node]):
                raise ValueError(f"function of {node!r} leaves its range")


def functional_model_to_joint(m: FunctionalModel) -> Cpd:
    """Enumerate all latent assignments and push them through the functions."""
    order = m.dag.topological_order()
    nodes = m.dag.nodes
    joint = np.zeros(tuple(m.cards[n] for n in nodes))
    sizes = [range(len(m.latents[n])) for n in order]
    for lams in itertools.product(*sizes):
        value: dict[str, int] = {}
        weight = 1.0
        for node, lam in zip(order, lams):
            weight *= m.latents[node][lam]
            idx = (lam,) + tuple(value[p] for p in m.dag.parents(node))
            value[node] = int(m.functions[node][idx])
        if weight:
            joint[tuple(value[n] for n in nodes)] += weight
    return Cpd(tuple(Variable(n, m.cards[n]) for n in nodes), (), joint)


def functional_model_from_joint(joint: Cpd, dag: Dag) -> FunctionalModel:
    """Compatibility construction: dilate each node's parent conditional separately."""
    _check_joint_matches(joint, dag)
    cards = {v.name: v.card for v in joint.targets}
    latents, functions = {}, {}
    for node in dag.nodes:
        dil = classical_dilation(conditional_from_joint(joint, node, dag.parents(node)))
        latents[node] = dil.weights
        functions[node] = dil.function
    return FunctionalModel(dag, cards, latents, functions)


def random_cpd(target: Variable, parents: Sequence[Variable], rng: np.random.Generator) -> Cpd:
    shape = (target.card,) + tuple(p.card for p in parents)
    t = rng.dirichlet(np.ones(target.card), size=int(np.prod(shape[1:], dtype=np.int64)))
    return Cpd((target,), tuple(parents), t.T.reshape(shape))


def joint_from_cpds(dag: Dag, cpds: Mapping[str, Cpd]) -> Cpd:
    """Markov product of node conditionals."""
    factors = []
    cards = {}
    for node in dag.nodes:
        c = cpds[node].reorder([node], list(dag.parents(node)))
        factors.append(((node, *dag.parents(node)), c.table))
        cards[node] = c.targets[0].card
    t = _einsum_contract(factors, dag.nodes)
    return Cpd(tuple(Variable(n, cards[n]) for n in dag.nodes), (), t)


def input_name(node: str) -> str:
    return f"{node}^I"


def output_name(node: str) -> str:
    return f"{node}^O"


def split_node_interventional(dag: Dag, cpds: Mapping[str, Cpd] | Sequence[Cpd]) -> Cpd:
    """P(X^I_1..X^I_n | X^O_1..X^O_n) = prod_i P(X^I_i | Parents^O(i))."""
    if not isinstance(cpds, Mapping):
        cpds = {c.target_names[0]: c for c in cpds}
    if set(cpds) != set(dag.nodes):
        raise VariableMismatch(f"need one table per node {dag.nodes}, got {sorted(cpds)}")
    cards = {}
    factors = []
    for node in dag.nodes:
        c = cpds[node]
        if c.target_names != (node,) or set(c.condition_names) != set(dag.parents(node)):
            raise VariableMismatch(f"table for {node!r} must be P({node}|{','.join(dag.parents(node))})")
        c = c.reorder([node], list(dag.parents(node)))
        cards[node] = c.targets[0].card
        factors.append(((input_name(node), *map(output_name, dag.parents(node))), c.table))
    ins = [input_name(n) for n in dag.nodes]
    outs = [output_name(n) for n in dag.nodes]
    all_names = {n for vs, _ in factors for n in vs}
    # outputs nobody reads still index the table
    factors += [((o,), np.ones(cards[n])) for n, o in zip(dag.nodes, outs) if o not in all_names]
    t = _einsum_contract(factors, ins + outs)
    return Cpd(
        tuple(Variable(input_name(n), cards[n]) for n in dag.nodes),
        tuple(Variable(output_name(n), cards[n]) for n in dag.nodes),
        t,
    )


def passive_observation(node: str, card: int, record: str | None = None) -> Cpd:
    """P(k, X^O | X^I) = delta(k, X^I) delta(X^O, X^I)."""
    t = np.zeros((card, card, card))
    for x in range(card):
        t[x, x, x] = 1
    return Cpd(
        (Variable(record or f"k_{node}", card), Variable(output_name(node), card)),
        (Variable(input_name(node), card),),
        t,
    )


def do_intervention(node: str, card: int, value: int, record: str | None = None) -> Cpd:
    """Ignore X^I, reprepare X^O = value, record the value."""
    t = np.zeros((card, card, card))
    t[value, value, :] = 1
    return Cpd(
        (Variable(record or f"k_{node}", card), Variable(output_name(node), card)),
        (Variable(input_name(node), card),),
        t,
    )


def no_observation(node: str, card: int, record: str | None = None) -> Cpd:
    """X^O tracks X^I and the record is trivial."""
    t = np.zeros((1, card, card))
    for x in range(card):
        t[0, x, x] = 1
    return Cpd(
        (Variable(record or f"k_{node}", 1), Variable(output_name(node), card)),
        (Variable(input_name(node), card),),
        t,
    )


def classical_record_distribution(split: Cpd, interventions: Mapping[str, Cpd]) -> Cpd:
    """P(k_1..k_n) = sum_{X^I, X^O} P(X^I | X^O) prod_i P(k_i, X^O_i | X^I_i)."""
    nodes = [v.name[: -len("^I")] for v in split.targets]
    if set(interventions) != set(nodes):
        raise VariableMismatch(f"need an intervention at every node {nodes}")
    factors = [(split.target_names + split.condition_names, split.table)]
    records = []
    for node in nodes:
        iv = interventions[node]
        if len(iv.targets) != 2 or iv.targets[1].name != output_name(node) or iv.condition_names != (input_name(node),):
            raise VariableMismatch(f"intervention at {node!r} must be P(k, {output_name(node)} | {input_name(node)})")
        sums = iv.flat().sum(axis=0)
        if np.any(np.abs(sums - 1) > 1e-12):
            raise ValueError(f"intervention at {node!r} is not normalized")
        records.append(iv.targets[0])
        factors.append(((iv.targets[0].name, output_name(node), input_name(node)), iv.table))
    t = _einsum_contract(factors, [r.name for r in records])
    total = t.sum()
    if abs(total - 1) > 1e-9:
        raise ValueError(f"record distribution sums to {total}")
    return Cpd(tuple(records), (), t)


def all_dags(nodes: Sequence[str]) -> list[Dag]:
    """Every DAG on the given labeled nodes."""
    pairs = list(itertools.combinations(nodes, 2))
    out = []
    for choice in itertools.product((0, 1, 2), repeat=len(pairs)):
        edges = []
        for (a, b), c in zip(pairs, choice):
            if c == 1:
                edges.append((a, b))
            elif c == 2:
                edges.append((b, a))
        try:
            out.append(Dag(tuple(nodes), tuple(edges)))
        except ValueError:
            continue
    return out


def random_functional_model(dag: Dag, cards: Mapping[str, int], rng: np.random.Generator,
                            max_latent: int = 4) -> FunctionalModel:
    latents, functions = {}, {}
    for node in dag.nodes:
        k = int(rng.integers(1, max_latent + 1))
        latents[node] = rng.dirichlet(np.ones(k))
        shape = (k,) + tuple(cards[p] for p in dag.parents(node))
        functions[node] = rng.integers(0, cards[node], size=shape)
    return FunctionalModel(dag, dict(cards), latents, functions)
