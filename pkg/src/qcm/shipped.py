"""The example files shipped in ``qcm/fixtures`` and how they are generated."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import constructions as K
from .channel import KrausSet
from .io import channel_to_json, encode_matrix, kraus_to_json, model_to_json, write_json
from .sampling import random_condition4_channel
from .tensor import Space

FIXTURE_DIR = Path(__file__).parent / "fixtures"


def fixture_path(name: str) -> Path:
    return FIXTURE_DIR / name


def _measure(basis: np.ndarray, labels=("0", "1")) -> list:
    return [{"outcome": lab, "kraus": [encode_matrix(np.outer(basis[:, i], basis[:, i].conj()))]}
            for i, lab in enumerate(labels)]


def fixture_documents() -> dict[str, dict]:
    z = np.eye(2, dtype=complex)
    x = np.stack([K.PLUS, K.MINUS], axis=1)
    copy_kraus = KrausSet(tuple(K.copy_kraus(2, False)), Space.of(("B", 2), ("C", 2)), Space.of(("A", 2)))
    ghz_kraus = KrausSet(tuple(K.copy_kraus(2, True)), Space.of(("B", 2), ("C", 2)), Space.of(("A", 2)))
    copy3 = KrausSet(tuple(K.copy_kraus(3, False)), Space.of(("B", 2), ("C", 2), ("D", 2)), Space.of(("A", 2)))
    reprepare = [np.outer(K.ket(1), K.ket(i)) for i in (0, 1)]
    chain = K.chain_model(np.diag([1.0, 0.0]), K.identity_channel())
    return {
        "fig3_incoherent.json": model_to_json(K.incoherent_fork(), {"B": _measure(z), "C": _measure(z)}),
        "fig7_generic_fail.json": model_to_json(K.generic_confounder(np.random.default_rng(7))),
        "coherent_fork.json": model_to_json(K.coherent_fork(), {"B": _measure(x, "+-"), "C": _measure(x, "+-")}),
        "chain_reprepare.json": model_to_json(chain, {
            "A": [{"outcome": "do1", "kraus": [encode_matrix(k) for k in reprepare]}],
            "B": _measure(z),
        }),
        "plan_x_basis.json": {"B": _measure(x, "+-"), "C": _measure(x, "+-")},
        "plan_b_only.json": {"B": _measure(z)},
        "incoherent_copy.json": kraus_to_json(copy_kraus),
        "coherent_copy.json": kraus_to_json(ghz_kraus),
        "incoherent_copy3.json": kraus_to_json(copy3),
        "condition4_seed0.json": channel_to_json(random_condition4_channel(np.random.default_rng(0)).channel),
    }


def write_fixtures(directory: Path = FIXTURE_DIR) -> list[Path]:
    directory.mkdir(parents=True, exist_ok=True)
    out = []
    for name, doc in fixture_documents().items():
        write_json(directory / name, doc)
        out.append(directory / name)
    return out
