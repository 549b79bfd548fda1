"""Quantum causal models: a DAG with one channel per node and the model state.

Each node ``X`` contributes the factor pair ``(X, X*)`` to a global space
ordered topologically (ties broken by name).  The model state is the
product of all node channels padded with identities; interventions are
operators ``tau`` on ``(X*, X)`` and outcome probabilities are
``Tr(sigma (tau_1 (x) ... (x) tau_n))``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .channel import ChoiOperator, linking_operator
from .classical import Dag
from .tensor import (
    LabelError,
    Operator,
    Space,
    System,
    commutator_norm,
    dual,
    embed,
    identity,
    kron,
    multiply,
    partial_trace,
    permute_systems,
)

COMMUTE_TOL = 1e-9
NEGATIVE_PROB_TOL = 1e-10
NORMALIZATION_TOL = 1e-9


class ModelValidationError(ValueError):
    pass


class InvalidInstrument(ValueError):
    pass


class ZeroProbabilityOutcome(ValueError):
    pass


@dataclass(frozen=True)
class QcmNode:
    name: str
    dim: int

    @property
    def system(self) -> System:
        return System(self.name, self.dim)

    @property
    def dual_name(self) -> str:
        return dual(self.name)


def _global_space(order: Sequence[QcmNode]) -> Space:
    factors = []
    for n in order:
        factors += [n.system, n.system.dual]
    return Space(tuple(factors))


@dataclass(frozen=True, eq=False)
class Qcm:
    """DAG plus channels ``rho_{X|Parents(X)}``; roots carry states.

    Construction checks shapes and labels only; pairwise commutation is
    reported by ``validate_model`` and enforced by ``build_sigma``.
    """

    nodes: tuple[QcmNode, ...]
    edges: tuple[tuple[str, str], ...]
    channels: Mapping[str, ChoiOperator]

    def __post_init__(self):
        nodes = tuple(n if isinstance(n, QcmNode) else QcmNode(*n) for n in self.nodes)
        object.__setattr__(self, "nodes", nodes)
        dag = Dag(tuple(n.name for n in nodes), tuple(self.edges))
        object.__setattr__(self, "edges", dag.edges)
        object.__setattr__(self, "channels", dict(self.channels))
        if set(self.channels) != set(dag.nodes):
            raise ModelValidationError(f"need exactly one channel per node {dag.nodes}, got {sorted(self.channels)}")
        dims = {n.name: n.dim for n in nodes}
        for node in dag.nodes:
            ch = self.channels[node]
            if ch.outputs.names != (node,) or ch.outputs.dims != (dims[node],):
                raise ModelValidationError(f"channel for {node!r} must output exactly that node, got {ch!r}")
            parents = dag.parents(node)
            have = {dual(n): d for n, d in zip(ch.inputs.names, ch.inputs.dims)}
            if set(have) != set(parents):
                raise ModelValidationError(f"channel for {node!r} has inputs {sorted(have)}, parents are {sorted(parents)}")
            for p in parents:
                if have[p] != dims[p]:
                    raise ModelValidationError(f"dimension mismatch on edge {p}->{node}")

    @property
    def dag(self) -> Dag:
        return Dag(tuple(n.name for n in self.nodes), self.edges)

    def node(self, name: str) -> QcmNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise LabelError(f"unknown node {name!r}")

    @property
    def order(self) -> tuple[QcmNode, ...]:
        return tuple(self.node(n) for n in self.dag.topological_order())

    @property
    def space(self) -> Space:
        return _global_space(self.order)

    def embedded(self, node: str) -> Operator:
        return embed(self.channels[node].op, self.space)


@dataclass(frozen=True)
class ModelReport:
    channel_defects: dict
    commutators: dict
    passed: bool
    tol: float

    def failures(self) -> list[str]:
        out = [f"channel {k} invalid" for k, ok in self.channel_defects.items() if not ok["ok"]]
        out += [f"[{a},{b}] = {v:.3e}" for (a, b), v in self.commutators.items() if v > self.tol]
        return out


def validate_model(m: Qcm, tol: float = COMMUTE_TOL) -> ModelReport:
    defects = {}
    for name, ch in m.channels.items():
        d = ch.defects()
        defects[name] = {
            "hermiticity": d.hermiticity,
            "min_eigenvalue": d.min_eigenvalue,
            "trace_preservation": d.trace_preservation,
            "ok": d.ok(),
        }
    embedded = {n.name: m.embedded(n.name) for n in m.order}
    comms = {}
    for a, b in itertools.combinations([n.name for n in m.order], 2):
        comms[(a, b)] = commutator_norm(embedded[a], embedded[b])
    passed = all(v["ok"] for v in defects.values()) and all(c <= tol for c in comms.values())
    return ModelReport(defects, comms, passed, tol)


@dataclass(frozen=True, eq=False)
class ModelState:
    """sigma on the pairs (X, X*) of the listed nodes."""

    sigma: Operator
    nodes: tuple[QcmNode, ...]

    @property
    def node_names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    def node(self, name: str) -> QcmNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise LabelError(f"node {name!r} not in state over {list(self.node_names)}")


def build_sigma(m: Qcm, order: Sequence[str] | None = None, tol: float = COMMUTE_TOL,
                check: bool = True) -> ModelState:
    """Product of the embedded channels, in topological order unless ``order`` is given."""
    if check:
        report = validate_model(m, tol)
        if not report.passed:
            raise ModelValidationError("; ".join(report.failures()))
    names = list(order) if order is not None else [n.name for n in m.order]
    if sorted(names) != sorted(n.name for n in m.nodes):
        raise LabelError("multiplication order must list every node once")
    space = m.space
    data = np.eye(space.total_dim, dtype=complex)
    for n in names:
        data = data @ m.embedded(n).data
    sigma = Operator(space, data)
    if check:
        herm = float(np.max(np.abs(data - data.conj().T)))
        if herm > 1e-9 * max(1.0, float(np.max(np.abs(data)))):
            raise ModelValidationError(f"model state is not Hermitian ({herm:.2e})")
        w = np.linalg.eigvalsh((data + data.conj().T) / 2)
        if w[0] < -1e-9:
            raise ModelValidationError(f"model state is not positive ({w[0]:.2e})")
    return ModelState(sigma, m.order)


def tau_identity(node: QcmNode | System) -> Operator:
    """The trivial intervention: the linking operator on (X*, X)."""
    sys = node.system if isinstance(node, QcmNode) else node
    return linking_operator(sys)


@dataclass(frozen=True, eq=False)
class Instrument:
    """Outcome-labeled operators tau^k on (X*, X) summing to a trace-preserving map."""

    node: str
    dim: int
    taus: Mapping[str, np.ndarray]
    tol: float = field(default=1e-9, repr=False)

    def __post_init__(self):
        taus = {str(k): np.array(v, dtype=complex).reshape(self.dim**2, self.dim**2) for k, v in self.taus.items()}
        if not taus:
            raise InvalidInstrument("instrument needs at least one outcome")
        object.__setattr__(self, "taus", taus)
        for k, t in taus.items():
            if np.max(np.abs(t - t.conj().T)) > self.tol:
                raise InvalidInstrument(f"tau for outcome {k!r} is not Hermitian")
            if np.linalg.eigvalsh((t + t.conj().T) / 2)[0] < -self.tol:
                raise InvalidInstrument(f"tau for outcome {k!r} is not positive")
        total = Operator(self.space, sum(taus.values()))
        defect = float(np.linalg.norm(partial_trace(total, [dual(self.node)]).data - np.eye(self.dim)))
        if defect > self.tol:
            raise InvalidInstrument(f"instrument at {self.node!r} is not trace preserving ({defect:.2e})")

    @property
    def space(self) -> Space:
        return Space.of((dual(self.node), self.dim), (self.node, self.dim))

    @property
    def outcomes(self) -> tuple[str, ...]:
        return tuple(self.taus)

    def tau(self, outcome) -> Operator:
        return Operator(self.space, self.taus[str(outcome)])

    def total(self) -> Operator:
        return Operator(self.space, sum(self.taus.values()))


def tau_from_kraus(kraus: Sequence[np.ndarray]) -> np.ndarray:
    """tau on (X*, X) for the CP map with the given Kraus operators on X.

    Equals sum_K vec(conj K) vec(conj K)^dag, so Tr_{X*} tau = sum_K K^dag K.
    """
    vecs = [np.asarray(k, dtype=complex).conj().reshape(-1) for k in kraus]
    return sum(np.outer(v, v.conj()) for v in vecs)


def instrument_from_kraus(node: str, dim: int, outcomes: Mapping[str, Sequence[np.ndarray]]) -> Instrument:
    return Instrument(node, dim, {k: tau_from_kraus(ks) for k, ks in outcomes.items()})


def measurement(node: str, dim: int, basis: np.ndarray | None = None, labels: Sequence[str] | None = None) -> Instrument:
    """Projective measurement that leaves the measured basis state behind."""
    basis = np.eye(dim, dtype=complex) if basis is None else np.asarray(basis, dtype=complex)
    labels = [str(i) for i in range(dim)] if labels is None else list(labels)
    return instrument_from_kraus(
        node, dim, {lab: [np.outer(basis[:, i], basis[:, i].conj())] for i, lab in enumerate(labels)}
    )


def repreparation(node: str, dim: int, state: np.ndarray, label: str = "0") -> Instrument:
    """Discard whatever arrives and reprepare the pure ``state``."""
    psi = np.asarray(state, dtype=complex).reshape(-1)
    ks = [np.outer(psi, np.eye(dim)[i]) for i in range(dim)]
    return instrument_from_kraus(node, dim, {label: ks})


def identity_instrument(node: str, dim: int, label: str = "") -> Instrument:
    return Instrument(node, dim, {label: linking_operator(System(node, dim)).data})


def _plan_for(state: ModelState, plan: Mapping[str, Instrument] | Sequence[Instrument]) -> dict[str, Instrument]:
    if not isinstance(plan, Mapping):
        plan = {ins.node: ins for ins in plan}
    out = {}
    for name, ins in plan.items():
        node = state.node(name)
        if ins.node != name or ins.dim != node.dim:
            raise InvalidInstrument(f"instrument for {name!r} does not match the node")
        out[name] = ins
    return out


@dataclass(frozen=True)
class OutcomeDistribution:
    nodes: tuple[str, ...]
    probabilities: dict
    clamped: int = 0

    def __getitem__(self, key):
        return self.probabilities[tuple(key) if not isinstance(key, tuple) else key]

    def marginal(self, nodes: Sequence[str]) -> dict:
        idx = [self.nodes.index(n) for n in nodes]
        out: dict = {}
        for key, p in self.probabilities.items():
            k = tuple(key[i] for i in idx)
            out[k] = out.get(k, 0.0) + p
        return out


def outcome_probabilities(state: ModelState, plan) -> OutcomeDistribution:
    """P(k_1..k_n) = Tr(sigma (x)_i tau_i^{k_i}); unplanned nodes get tau^id."""
    plan = _plan_for(state, plan)
    planned = [n for n in state.node_names if n in plan]
    fixed = [tau_identity(state.node(n)) for n in state.node_names if n not in plan]
    base = kron(*fixed) if fixed else None
    space = state.sigma.space
    sig_t = state.sigma.data.T
    probs = {}
    clamped = 0
    for combo in itertools.product(*[plan[n].outcomes for n in planned]):
        taus = [plan[n].tau(k) for n, k in zip(planned, combo)]
        parts = taus + ([base] if base is not None else [])
        t = permute_systems(kron(*parts), space.names) if parts else identity(Space())
        p = float(np.real(np.sum(sig_t * t.data)))
        if p < 0:
            if p < -NEGATIVE_PROB_TOL:
                raise InvalidInstrument(f"negative probability {p:.3e} for outcome {combo}")
            p = 0.0
            clamped += 1
        probs[combo] = p
    total = sum(probs.values())
    if abs(total - 1) > NORMALIZATION_TOL:
        raise InvalidInstrument(f"outcome probabilities sum to {total:.12g}")
    return OutcomeDistribution(tuple(planned), probs, clamped)


def joint_outcome_probabilities(m: Qcm | ModelState, plan) -> OutcomeDistribution:
    state = m if isinstance(m, ModelState) else build_sigma(m)
    return outcome_probabilities(state, plan)


def marginalize_node(state: ModelState, node: str, instrument: Instrument | None = None) -> ModelState:
    """Tr_{X X*}(sigma T) with T the summed instrument, or tau^id when none is given."""
    n = state.node(node)
    t = instrument.total() if instrument is not None else tau_identity(n)
    prod = multiply(state.sigma, t, space=state.sigma.space)
    out = partial_trace(prod, [n.name, n.dual_name])
    return ModelState(out, tuple(x for x in state.nodes if x.name != node))


def reduced_state(state: ModelState, keep: Sequence[str]) -> ModelState:
    """Marginalize every node not in ``keep`` with the trivial intervention."""
    out = state
    for name in state.node_names:
        if name not in keep:
            out = marginalize_node(out, name)
    return out


@dataclass(frozen=True, eq=False)
class BayesResult:
    probability: float
    sigma_a: Operator
    sigma_c: Operator
    predict: dict


def bayes_update(m: Qcm | ModelState, outcome, instrument_b: Instrument, instrument_c: Instrument | None = None,
                 node_a: str = "A", node_b: str = "B", node_c: str = "C",
                 channel_c: ChoiOperator | None = None) -> BayesResult:
    """Condition a fork A -> B, A -> C on an outcome at B and propagate to C.

    First the root is updated, sigma~_A = Tr_B(sigma_AB tau_B^k) / P(k), then
    pushed through rho_{C|A}, and finally read out with C's instrument.
    """
    if isinstance(m, Qcm):
        state = build_sigma(m)
        channel_c = channel_c or m.channels[node_c]
    else:
        state = m
    if channel_c is None:
        raise ValueError("need the channel rho_{C|A}")
    a, b, c = state.node(node_a), state.node(node_b), state.node(node_c)
    sigma_ab = reduced_state(state, [node_a, node_b]).sigma
    tau_k = instrument_b.tau(outcome)
    full_tau = kron(tau_identity(a), tau_k)
    p = float(np.real(np.sum(sigma_ab.data.T * permute_systems(full_tau, sigma_ab.names).data)))
    if p <= 1e-12:
        raise ZeroProbabilityOutcome(f"P({node_b}={outcome}) = {p:.3e}")
    sigma_a = partial_trace(multiply(sigma_ab, tau_k, space=sigma_ab.space), [b.name, b.dual_name]).scale(1 / p)
    ops = [channel_c.op, sigma_a, tau_identity(a)]
    space = Space.of((c.name, c.dim), (a.name, a.dim), (a.dual_name, a.dim))
    sigma_c = partial_trace(multiply(*ops, space=space), [a.name, a.dual_name])
    if instrument_c is None:
        predict = {}
    else:
        sc = embed(sigma_c, instrument_c.space)
        predict = {k: float(np.real(np.sum(sc.data.T * instrument_c.tau(k).data))) for k in instrument_c.outcomes}
    return BayesResult(p, sigma_a, sigma_c, predict)


def implied_channel(state: ModelState, node: str, parents: Sequence[str]) -> ChoiOperator:
    """rho_{X|parents} read off sigma by tracing every other factor, then normalized.

    Only parent dual factors and the node itself are kept; the node's own
    dual factor and the parents' plain factors are traced.
    """
    n = state.node(node)
    keep = [n.name] + [dual(p) for p in parents]
    drop = [f for f in state.sigma.names if f not in keep]
    op = partial_trace(state.sigma, drop)
    tr = op.trace().real
    d_in = int(np.prod([state.node(p).dim for p in parents], dtype=np.int64))
    op = op.scale(d_in / tr)
    outputs = Space.of((n.name, n.dim))
    inputs = Space(tuple(System(dual(p), state.node(p).dim) for p in parents))
    return ChoiOperator(permute_systems(op, [n.name] + [dual(p) for p in parents]), outputs, inputs, check=False)
