"""Worked examples regenerated end to end, each asserting its expected verdicts."""

from __future__ import annotations

from typing import Callable

import numpy as np

from . import constructions as K
from .channel import KrausSet, choi_from_kraus, choi_from_unitary, dephase
from .model import bayes_update, build_sigma, joint_outcome_probabilities, measurement, validate_model
from .qci import (
    common_cause_dilation,
    conditional_mutual_information,
    find_decomposition,
    no_causal_influence,
    qci_factorization_check,
)
from .report import Report
from .sampling import random_unitary_fork
from .tensor import Space

TOL = 1e-9


def unitary_fork(seed: int = 0, count: int = 25) -> Report:
    """Every unitary with two inputs and two outputs factorizes as rho_{B|AD} rho_{C|AD}."""
    rng = np.random.default_rng(seed)
    rep = Report(["demo", "unitary-fork"], seed=seed)
    worst_d = worst_c = 0.0
    ok = True
    for _ in range(count):
        r = qci_factorization_check(random_unitary_fork(rng), TOL)
        worst_d, worst_c = max(worst_d, r.defect), max(worst_c, r.commutator)
        ok &= r.passed
    rep.check(f"factorization holds for {count} random unitaries", ok, worst_d, TOL)
    rep.check("marginals commute", worst_c <= TOL, worst_c, TOL)
    rep.residuals.update(max_defect=worst_d, max_commutator=worst_c)
    cnot = KrausSet((K.CNOT,), Space.of(("B", 2), ("C", 2)), Space.of(("A", 2), ("D", 2)))
    w = find_decomposition(choi_from_kraus(cnot))
    rep.blocks = [list(b) for b in w.blocks]
    rep.check("CNOT decomposes as a single 2x2 block", list(w.blocks) == [(2, 2)])
    return rep


def coherent_vs_incoherent(seed: int = 0) -> Report:
    rep = Report(["demo", "coherent-vs-incoherent"], seed=seed)
    inc, coh = K.incoherent_copy(), K.coherent_copy()
    ci, cc = conditional_mutual_information(inc), conditional_mutual_information(coh)
    rep.check("incoherent copy: I(B:C|A) = 0", abs(ci) <= TOL, ci, TOL)
    rep.check("coherent copy: I(B:C|A) = 1 bit", abs(cc - 1) <= TOL, cc, TOL)
    fi, fc = qci_factorization_check(inc, TOL), qci_factorization_check(coh, TOL)
    rep.check("incoherent copy factorizes", fi.passed, fi.defect, TOL)
    rep.check("coherent copy does not factorize", not fc.passed, fc.defect, TOL)
    w = find_decomposition(inc)
    rep.blocks = [list(b) for b in w.blocks]
    rep.check("incoherent copy blocks are two 1x1 blocks", list(w.blocks) == [(1, 1), (1, 1)])
    dil = common_cause_dilation(inc)
    rep.check("dilation reproduces the incoherent copy", dil.passes(), dil.reproduction_residual, 1e-8)
    _, inv_i = dephase(inc)
    _, inv_c = dephase(coh)
    rep.check("incoherent copy is dephasing invariant", inv_i)
    rep.check("coherent copy is not dephasing invariant", not inv_c)
    rep.residuals.update(cmi_incoherent=ci, cmi_coherent=cc, defect_incoherent=fi.defect,
                         defect_coherent=fc.defect, dilation_reproduction=dil.reproduction_residual)
    return rep


def cnot_influence(seed: int = 0) -> Report:
    rep = Report(["demo", "cnot-influence"], seed=seed)
    quantum = choi_from_unitary(K.quantum_cnot())
    _, rq = no_causal_influence(quantum, "lambda", "B")
    _, rc = no_causal_influence(K.classical_cnot(), "lambda", "Y")
    _, rq_fwd = no_causal_influence(quantum, "A", "C")
    rep.check("quantum CNOT: target input influences control output", rq > 0.5, rq)
    rep.check("classical CNOT: ancilla does not influence the copy Y", rc <= 1e-10, rc, 1e-10)
    rep.check("quantum CNOT: control influences target", rq_fwd > 0.5, rq_fwd)
    rep.residuals.update(quantum_lambda_to_B=rq, classical_lambda_to_Y=rc, quantum_A_to_C=rq_fwd)
    return rep


def confounder(seed: int = 0) -> Report:
    rng = np.random.default_rng(seed)
    rep = Report(["demo", "confounder"], seed=seed)
    generic = validate_model(K.generic_confounder(rng))
    worst = max(generic.commutators.values())
    rep.check("generic channels on A -> B -> C, A -> C fail to commute", not generic.passed, worst)
    good = validate_model(K.decomposable_confounder(rng))
    best = max(good.commutators.values())
    rep.check("channels reading separate factors of A commute", good.passed, best, TOL)
    env = validate_model(K.environment_model())
    rep.check("environment model with lambda is valid", env.passed, max(env.commutators.values()), TOL)
    violation = K.environment_violation()
    rep.check("removing the pure environment breaks commutation", violation >= 0.1, violation)
    rep.residuals.update(generic_commutator=worst, decomposable_commutator=best, environment_violation=violation)
    return rep


def _ratio(dist, kb, kc):
    pb = sum(p for key, p in dist.probabilities.items() if key[0] == kb)
    return dist.probabilities[(kb, kc)] / pb


def bayes(seed: int = 0) -> Report:
    """Update on an outcome at B, predict C, and compare with the ratio of joint probabilities."""
    rep = Report(["demo", "bayes"], seed=seed)
    xb = np.stack([K.PLUS, K.MINUS], axis=1)
    cases = {
        "incoherent": K.incoherent_fork(),
        "coherent": K.coherent_fork(),
    }
    bases = {"Z": None, "X": xb}
    worst = 0.0
    for name, model in cases.items():
        state = build_sigma(model)
        for bname, basis in bases.items():
            ib = measurement("B", 2, basis)
            ic = measurement("C", 2, basis)
            dist = joint_outcome_probabilities(state, {"B": ib, "C": ic})
            for kb in ib.outcomes:
                if sum(p for key, p in dist.probabilities.items() if key[0] == kb) <= 1e-12:
                    continue
                res = bayes_update(state, kb, ib, ic, channel_c=model.channels["C"])
                for kc in ic.outcomes:
                    gap = abs(res.predict[kc] - _ratio(dist, kb, kc))
                    worst = max(worst, gap)
                    rep.probabilities[f"{name}/{bname}/{kb}->{kc}"] = res.predict[kc]
    rep.check("update-then-propagate equals conditional from the joint", worst <= 1e-10, worst, 1e-10)
    rep.residuals["max_gap"] = worst
    return rep


DEMOS: dict[str, Callable[[int], Report]] = {
    "unitary-fork": unitary_fork,
    "coherent-vs-incoherent": coherent_vs_incoherent,
    "cnot-influence": cnot_influence,
    "confounder": confounder,
    "bayes": bayes,
}


def run_demo(name: str, seed: int = 0) -> Report:
    return DEMOS[name](seed)

