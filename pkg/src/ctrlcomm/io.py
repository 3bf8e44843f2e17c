"""File formats: matrix input (CSV or JSON) and versioned solution JSON."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import InvalidInputError
from .linalg import as_matrix
from .synthesis import ProtocolSolution

SCHEMA_VERSION = 1


def parse_matrix_text(text: str, source: str = "<input>") -> np.ndarray:
    """Parse either a JSON object {"rows", "cols", "data"} or CSV rows of reals."""
    stripped = text.strip()
    if not stripped:
        raise InvalidInputError(f"{source}: file is empty")
    if stripped[0] in "{[":
        try:
            obj = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{source}: invalid JSON ({exc})") from None
        if isinstance(obj, dict):
            if "data" not in obj:
                raise InvalidInputError(f"{source}: JSON matrix needs a 'data' field")
            a = _rectangular(obj["data"], source)
            for key, size in (("rows", a.shape[0]), ("cols", a.shape[1])):
                if key in obj and int(obj[key]) != size:
                    raise InvalidInputError(f"{source}: declared {key}={obj[key]} but data has {size}")
            return a
        return _rectangular(obj, source)
    rows = []
    for line_no, row in enumerate(csv.reader(stripped.splitlines()), start=1):
        cells = [c.strip() for c in row]
        if not any(cells):
            continue
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            raise InvalidInputError(f"{source}: line {line_no}: non-numeric entry in {row}") from None
    return _rectangular(rows, source)


def _rectangular(rows, source: str) -> np.ndarray:
    if not isinstance(rows, list) or not rows or not all(isinstance(r, list) for r in rows):
        raise InvalidInputError(f"{source}: expected a non-empty list of rows")
    widths = {len(r) for r in rows}
    if len(widths) != 1:
        raise InvalidInputError(f"{source}: ragged rows (lengths {sorted(widths)})")
    return as_matrix(rows, source)


def read_matrix(path) -> np.ndarray:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InvalidInputError(f"{p}: cannot read ({exc.strerror})") from None
    return parse_matrix_text(text, str(p))


def solution_to_dict(sol: ProtocolSolution) -> dict:
    p, q = sol.weights
    out = {
        "schema": SCHEMA_VERSION,
        "p": p,
        "q": q,
        "alice": sol.alice.tolist(),
        "bob": sol.bob.tolist(),
        "cost": sol.cost,
        "residual": sol.residual,
    }
    if "target" in sol.meta:
        out["target"] = np.asarray(sol.meta["target"]).tolist()
    return out


def solution_from_dict(d: dict) -> ProtocolSolution:
    if not isinstance(d, dict):
        raise InvalidInputError("solution JSON must be an object")
    if d.get("schema") != SCHEMA_VERSION:
        raise InvalidInputError(f"unsupported solution schema {d.get('schema')!r}, expected {SCHEMA_VERSION}")
    try:
        alice = as_matrix(d["alice"], "alice")
        bob = as_matrix(d["bob"], "bob")
        meta = {"target": as_matrix(d["target"], "target")} if "target" in d else {}
        return ProtocolSolution(
            alice=alice,
            bob=bob,
            cost=float(d["cost"]),
            residual=float(d["residual"]),
            weights=(float(d["p"]), float(d["q"])),
            meta=meta,
        )
    except KeyError as exc:
        raise InvalidInputError(f"solution JSON missing field {exc}") from None


def write_solution(sol: ProtocolSolution, path) -> None:
    Path(path).write_text(json.dumps(solution_to_dict(sol), indent=2) + "\n")


def read_solution(path) -> ProtocolSolution:
    p = Path(path)
    try:
        d = json.loads(p.read_text())
    except OSError as exc:
        raise InvalidInputError(f"{p}: cannot read ({exc.strerror})") from None
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{p}: invalid JSON ({exc})") from None
    return solution_from_dict(d)
