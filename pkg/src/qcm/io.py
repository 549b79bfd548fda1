"""JSON file formats for channels, quantum causal models and classical models.

Complex numbers are ``[re, im]`` pairs and matrices are row-major nested
lists of them.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np

from .channel import ChoiOperator, KrausSet, UnitaryGate, choi_from_kraus, choi_from_unitary
from .classical import Cpd, Dag, Variable
from .model import Instrument, Qcm, QcmNode, instrument_from_kraus
from .tensor import Space, dual, is_dual


class ParseError(ValueError):
    """Malformed or unreadable input file."""


def encode_matrix(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def decode_matrix(obj, shape: tuple[int, int] | None = None) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as err:
        raise ParseError(f"matrix entries must be [re, im] pairs: {err}") from None
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ParseError(f"expected a matrix of [re, im] pairs, got array of shape {arr.shape}")
    m = arr[..., 0] + 1j * arr[..., 1]
    if shape is not None and m.shape != shape:
        raise ParseError(f"matrix has shape {m.shape}, expected {shape}")
    return m


def _space(items, field: str) -> Space:
    try:
        return Space.of(*[(str(f["name"]), int(f["dim"])) for f in items])
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"bad {field} structure: {err}") from None


def _space_to_json(space: Space) -> list:
    return [{"name": dual(f.name) if is_dual(f.name) else f.name, "dim": f.dim} for f in space]


def channel_from_json(obj: dict[str, Any], check: bool = True) -> ChoiOperator:
    """Parse a channel object; with ``check=False`` invalid channels are returned for inspection."""
    if not isinstance(obj, dict):
        raise ParseError("channel must be a JSON object")
    for key in ("outputs", "inputs", "kind", "data"):
        if key not in obj:
            raise ParseError(f"channel object lacks {key!r}")
    outputs = _space(obj["outputs"], "outputs")
    inputs = _space(obj["inputs"], "inputs")
    kind = obj["kind"]
    d_out, d_in = outputs.total_dim, inputs.total_dim
    if kind == "choi":
        n = d_out * d_in
        return ChoiOperator.from_matrix(decode_matrix(obj["data"], (n, n)), outputs, inputs, check=check)
    if kind == "kraus":
        if not isinstance(obj["data"], list) or not obj["data"]:
            raise ParseError("kraus data must be a non-empty list of matrices")
        ops = tuple(decode_matrix(k, (d_out, d_in)) for k in obj["data"])
    elif kind == "unitary":
        ops = (decode_matrix(obj["data"], (d_out, d_in)),)
        if d_out != d_in:
            raise ParseError("a unitary needs equal input and output dimensions")
    else:
        raise ParseError(f"unknown channel kind {kind!r}")
    if check:
        if kind == "unitary":
            return choi_from_unitary(UnitaryGate(ops[0], inputs, outputs))
        return choi_from_kraus(KrausSet(ops, outputs, inputs))
    vecs = np.stack([k.reshape(-1) for k in ops], axis=1)
    return ChoiOperator.from_matrix(vecs @ vecs.conj().T, outputs, inputs, check=False)


def channel_to_json(ch: ChoiOperator) -> dict:
    return {
        "outputs": _space_to_json(ch.outputs),
        "inputs": _space_to_json(ch.inputs),
        "kind": "choi",
        "data": encode_matrix(ch.data),
    }


def kraus_to_json(k: KrausSet) -> dict:
    return {
        "outputs": _space_to_json(k.outputs),
        "inputs": _space_to_json(k.inputs),
        "kind": "kraus",
        "data": [encode_matrix(op) for op in k.operators],
    }


def instrument_from_json(node: str, dim: int, items) -> Instrument:
    try:
        outcomes = {str(it["outcome"]): [decode_matrix(k, (dim, dim)) for k in it["kraus"]] for it in items}
    except (KeyError, TypeError) as err:
        raise ParseError(f"bad instrument for {node!r}: {err}") from None
    return instrument_from_kraus(node, dim, outcomes)


def instruments_from_json(obj, nodes: dict[str, int]) -> dict[str, Instrument]:
    if not isinstance(obj, dict):
        raise ParseError("instruments must be an object keyed by node")
    out = {}
    for node, items in obj.items():
        if node not in nodes:
            raise ParseError(f"instrument for unknown node {node!r}")
        out[node] = instrument_from_json(node, nodes[node], items)
    return out


def model_from_json(obj: dict[str, Any], check: bool = True) -> tuple[Qcm, dict[str, Instrument]]:
    if not isinstance(obj, dict):
        raise ParseError("model must be a JSON object")
    for key in ("nodes", "channels"):
        if key not in obj:
            raise ParseError(f"model lacks {key!r}")
    try:
        nodes = tuple(QcmNode(str(n["name"]), int(n["dim"])) for n in obj["nodes"])
        edges = tuple((str(a), str(b)) for a, b in obj.get("edges", []))
    except (KeyError, TypeError, ValueError) as err:
        raise ParseError(f"bad node or edge list: {err}") from None
    if not isinstance(obj["channels"], dict):
        raise ParseError("channels must be an object keyed by node")
    channels = {str(k): channel_from_json(v, check) for k, v in obj["channels"].items()}
    model = Qcm(nodes, edges, channels)
    dims = {n.name: n.dim for n in nodes}
    instruments = instruments_from_json(obj.get("instruments", {}), dims)
    return model, instruments


def model_to_json(m: Qcm, instruments: dict | None = None) -> dict:
    out = {
        "nodes": [{"name": n.name, "dim": n.dim} for n in m.nodes],
        "edges": [list(e) for e in m.edges],
        "channels": {k: channel_to_json(v) for k, v in m.channels.items()},
    }
    if instruments:
        out["instruments"] = instruments
    return out


def plan_from_json(obj, model: Qcm) -> dict[str, Instrument]:
    if isinstance(obj, dict) and "instruments" in obj:
        obj = obj["instruments"]
    return instruments_from_json(obj, {n.name: n.dim for n in model.nodes})


def classical_from_json(obj: dict[str, Any]) -> tuple[Dag, dict[str, Cpd]]:
    try:
        cards = {str(n["name"]): int(n["card"]) for n in obj["nodes"]}
        dag = Dag(tuple(cards), tuple((str(a), str(b)) for a, b in obj.get("edges", [])))
        cpds = {}
        for c in obj["cpds"]:
            target = str(c["target"])
            parents = [str(p) for p in c.get("parents", [])]
            cpds[target] = Cpd(
                (Variable(target, cards[target]),),
                tuple(Variable(p, cards[p]) for p in parents),
                np.asarray(c["table"], dtype=float),
            )
    except (KeyError, TypeError) as err:
        raise ParseError(f"bad classical model: {err}") from None
    return dag, cpds


def classical_to_json(dag: Dag, cpds: dict[str, Cpd]) -> dict:
    cards = {}
    for c in cpds.values():
        for v in c.variables:
            cards[v.name] = v.card
    return {
        "nodes": [{"name": n, "card": cards[n]} for n in dag.nodes],
        "edges": [list(e) for e in dag.edges],
        "cpds": [
            {"target": c.target_names[0], "parents": list(c.condition_names), "table": c.table.tolist()}
            for c in cpds.values()
        ],
    }


def read_json(path: str | Path) -> Any:
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err.strerror}") from None
    except json.JSONDecodeError as err:
        raise ParseError(f"{path}: invalid JSON ({err.msg} at line {err.lineno})") from None


def write_json(path: str | Path, obj: Any) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def file_kind(obj: Any) -> str:
    """Guess which of the three formats a parsed document is."""
    if not isinstance(obj, dict):
        raise ParseError("top-level JSON value must be an object")
    if "kind" in obj and "outputs" in obj:
        return "channel"
    if "channels" in obj:
        return "model"
    if "cpds" in obj:
        return "classical"
    raise ParseError("unrecognized file: expected a channel, model or classical model")
