"""Text file formats: instances, assignments, QUBOs, samples, telemetry."""
from __future__ import annotations

import csv
import hashlib
import io
import json
from pathlib import Path
from typing import Iterable

import numpy as np

from onehot_lns.potts import PottsInstance, validate_assignment
from onehot_lns.qubo import Qubo

INSTANCE_VERSION = 1


class FormatError(ValueError):
    """A file could not be parsed."""


def instance_to_text(instance: PottsInstance) -> str:
    lines = [
        "{",
        f'  "version": {INSTANCE_VERSION},',
        f'  "num_vars": {instance.num_vars},',
        f'  "q": {instance.q},',
        f'  "metadata": {json.dumps(instance.metadata, sort_keys=True)},',
        '  "edges": [',
    ]
    edges = [json.dumps([i, j, J, d]) for i, j, J, d in instance.edges()]
    lines.append(",\n".join("    " + e for e in edges))
    lines.append("  ]")
    lines.append("}")
    return "\n".join(line for line in lines if line) + "\n"


def instance_from_text(text: str) -> PottsInstance:
    try:
        data = json.loads(text)
        if data.get("version") != INSTANCE_VERSION:
            raise FormatError(f"unsupported instance version {data.get('version')!r}")
        edges = data["edges"]
        if any(len(e) != 4 for e in edges):
            raise FormatError("edges must be [i, j, J, delta] quadruples")
        return PottsInstance.from_edges(int(data["num_vars"]), int(data["q"]),
                                        [(int(i), int(j), float(J), int(d)) for i, j, J, d in edges],
                                        data.get("metadata", {}))
    except FormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"malformed instance: {exc}") from exc


def write_instance(path, instance: PottsInstance) -> str:
    """Write the instance; returns the sha256 digest of the file contents."""
    text = instance_to_text(instance)
    Path(path).write_text(text)
    return hashlib.sha256(text.encode()).hexdigest()


def read_instance(path) -> PottsInstance:
    return instance_from_text(Path(path).read_text())


def write_assignment(path, a) -> None:
    Path(path).write_text(json.dumps([int(x) for x in a]) + "\n")


def read_assignment(path, instance: PottsInstance | None = None) -> np.ndarray:
    try:
        a = np.array(json.loads(Path(path).read_text()), dtype=np.int64)
    except (ValueError, TypeError) as exc:
        raise FormatError(f"malformed assignment: {exc}") from exc
    if instance is not None:
        a = validate_assignment(instance, a)
    return a


def qubo_to_text(qubo: Qubo) -> str:
    """``num_bits``, ``offset``, then ``i j coeff`` lines (``i == j`` is linear)."""
    out = [str(qubo.num_bits), repr(qubo.offset)]
    for k, v in enumerate(qubo.linear):
        if v != 0.0:
            out.append(f"{k} {k} {float(v)!r}")
    for i, j, v in zip(qubo.rows, qubo.cols, qubo.vals):
        out.append(f"{i} {j} {float(v)!r}")
    return "\n".join(out) + "\n"


def qubo_from_text(text: str) -> Qubo:
    lines = [ln.split("#", 1)[0].strip() for ln in text.splitlines()]
    lines = [ln for ln in lines if ln]
    try:
        n = int(lines[0])
        offset = float(lines[1])
        rows, cols, vals = [], [], []
        for ln in lines[2:]:
            i, j, v = ln.split()
            rows.append(int(i))
            cols.append(int(j))
            vals.append(float(v))
    except (IndexError, ValueError) as exc:
        raise FormatError(f"malformed QUBO text: {exc}") from exc
    if n < 0 or any(not (0 <= k < n) for k in rows + cols):
        raise FormatError("QUBO term index out of range")
    return Qubo.from_arrays(n, np.zeros(n), rows, cols, vals, offset)


def write_qubo(path, qubo: Qubo) -> None:
    Path(path).write_text(qubo_to_text(qubo))


def read_qubo(path) -> Qubo:
    return qubo_from_text(Path(path).read_text())


def samples_to_csv(samples) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["state", "energy"])
    for state, e in zip(samples.states, samples.energies):
        w.writerow(["".join(str(int(b)) for b in state), repr(float(e))])
    return buf.getvalue()


def rows_to_csv(rows: Iterable[dict], columns: Iterable[str], timing: bool = True) -> str:
    columns = list(columns)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        out = []
        for c in columns:
            v = r[c]
            if c == "millis":
                v = f"{v:.3f}" if timing else "0"
            elif isinstance(v, bool):
                v = int(v)
            elif isinstance(v, float):
                v = repr(v)
            out.append(v)
        w.writerow(out)
    return buf.getvalue()


def subproblem_to_text(sub) -> str:
    """Dump a binary subproblem: region, alpha/beta lists, reduced QUBO."""
    out = [
        "vars " + " ".join(map(str, sub.vars.tolist())),
        "alpha " + " ".join(map(str, sub.alpha.tolist())),
        "beta " + " ".join(map(str, sub.beta.tolist())),
        f"offset_full {sub.offset_full!r}",
        "qubo",
    ]
    return "\n".join(out) + "\n" + qubo_to_text(sub.reduced)


def subproblem_from_text(text: str):
    from onehot_lns.partition import BinarySubproblem

    head, _, body = text.partition("qubo\n")
    fields = {}
    for ln in head.splitlines():
        key, _, rest = ln.partition(" ")
        fields[key] = rest
    try:
        ints = lambda s: np.array([int(x) for x in s.split()], dtype=np.int64)
        return BinarySubproblem(ints(fields["vars"]), ints(fields["alpha"]), ints(fields["beta"]),
                                qubo_from_text(body), float(fields["offset_full"]))
    except (KeyError, ValueError) as exc:
        raise FormatError(f"malformed subproblem dump: {exc}") from exc


def parse_embedding(text: str) -> dict[int, list[int]]:
    chains = {}
    for ln in text.splitlines():
        if not ln.strip():
            continue
        bit, _, rest = ln.partition(":")
        chains[int(bit)] = [int(x) for x in rest.split()]
    return chains


def read_config_file(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for n, ln in enumerate(Path(path).read_text().splitlines(), 1):
        ln = ln.split("#", 1)[0].strip()
        if not ln:
            continue
        if "=" not in ln:
            raise FormatError(f"{path}:{n}: expected key = value")
        k, v = ln.split("=", 1)
        out[k.strip().replace("-", "_")] = v.strip()
    return out
