"""JSON file formats.

Problem::

    {"variables": [0, 1], "h": {"0": 1, "1": 0}, "J": [[0, 1, -2]], "offset": 0}

Sample::

    {"problem_sha": "<hex>", "solutions": [{"spins": {"0": -1, "1": 1}, "energy": -1}]}

Exact rationals are written as ``"p/q"`` strings so they survive a round trip.
"""

from __future__ import annotations

import hashlib
import json
from fractions import Fraction
from pathlib import Path
from typing import Any

import numpy as np

from .model import IsingProblem, SampleSet

__all__ = [
    "problem_to_json",
    "problem_from_json",
    "sampleset_to_json",
    "sampleset_from_json",
    "load_problem",
    "save_problem",
    "dumps",
    "sha256_of",
]


def encode_number(x) -> Any:
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    return x


def decode_number(x) -> Any:
    if isinstance(x, str):
        return Fraction(x)
    return x


def dumps(doc: Any) -> str:
    """Canonical JSON text: sorted keys, fixed separators, trailing newline."""
    return json.dumps(doc, sort_keys=True, indent=1, separators=(",", ": ")) + "\n"


def sha256_of(doc: Any) -> str:
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()


def problem_to_json(problem: IsingProblem) -> dict:
    return {
        "variables": list(problem.variables),
        "h": {str(v): encode_number(b) for v, b in problem.h.items()},
        "J": [[i, j, encode_number(c)] for (i, j), c in problem.J.items()],
        "offset": encode_number(problem.offset),
    }


def problem_from_json(doc: dict) -> IsingProblem:
    if not isinstance(doc, dict) or not {"h", "J", "variables"} & doc.keys():
        raise ValueError("not a problem document: expected 'h', 'J' or 'variables'")
    h = {int(v): decode_number(b) for v, b in doc.get("h", {}).items()}
    J = {(int(i), int(j)): decode_number(c) for i, j, c in doc.get("J", [])}
    return IsingProblem(h, J, decode_number(doc.get("offset", 0)), tuple(doc.get("variables", ())))


def load_problem(path: str | Path) -> IsingProblem:
    with open(path) as fh:
        return problem_from_json(json.load(fh))


def save_problem(problem: IsingProblem, path: str | Path) -> None:
    Path(path).write_text(dumps(problem_to_json(problem)))


def sampleset_to_json(sampleset: SampleSet, problem: IsingProblem | None = None) -> dict:
    doc: dict[str, Any] = {
        "solutions": [
            {"spins": {str(v): s for v, s in config.items()}, "energy": e} for config, e in sampleset
        ]
    }
    if problem is not None:
        doc["problem_sha"] = sha256_of(problem_to_json(problem))
    return doc


def sampleset_from_json(doc: dict, problem: IsingProblem) -> SampleSet:
    """Rebuild a sample set; energies are recomputed and checked against the file."""
    configs = [{int(v): int(s) for v, s in sol["spins"].items()} for sol in doc["solutions"]]
    ss = SampleSet.from_configs(problem, configs, {"kind": "external-file"})
    stored = np.sort(np.array([float(sol["energy"]) for sol in doc["solutions"]]))
    if len(stored) and not np.allclose(ss.energies, stored, rtol=0, atol=1e-9):
        raise ValueError("stored energies disagree with the problem")
    return ss


def embedding_to_json(chains: dict[int, list[int]]) -> dict:
    return {"chains": {str(v): list(c) for v, c in chains.items()}}


def embedding_from_json(doc: dict) -> dict[int, tuple[int, ...]]:
    return {int(v): tuple(int(q) for q in c) for v, c in doc["chains"].items()}
