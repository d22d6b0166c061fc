"""File boundary: instance parsing/generation, registry, result tables.

Instance files use the plain edge-list dialect: first non-comment line
`N M`, then M lines `i j w` with 1-indexed endpoints. `#` starts a comment,
blank lines are skipped, extra whitespace is tolerated. Zero-weight edges
are accepted but dropped with a warning (they cannot affect any cut).
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DuplicateEdge,
    InvalidDegree,
    IoFailure,
    Malformed,
    SelfLoop,
    TooLarge,
)
from .maxcut import MaxCutInstance

PROVENANCES = ("exact", "literature", "proxy")


# -- instance files -------------------------------------------------------------


def parse_rudy(text: str, name: str = "") -> MaxCutInstance:
    """Parse an edge-list instance; errors carry the offending line number."""
    n = m = None
    edges = []
    declared = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if n is None:
            if len(tokens) != 2:
                raise Malformed(f"line {lineno}: expected header 'N M', got {raw!r}")
            try:
                n, m = int(tokens[0]), int(tokens[1])
            except ValueError:
                raise Malformed(f"line {lineno}: non-integer header token in {raw!r}")
            if n < 0 or m < 0:
                raise Malformed(f"line {lineno}: negative count in header")
            continue
        if len(tokens) != 3:
            raise Malformed(f"line {lineno}: expected 'i j w', got {raw!r}")
        try:
            i, j, w = int(tokens[0]), int(tokens[1]), int(tokens[2])
        except ValueError:
            raise Malformed(f"line {lineno}: non-integer token in {raw!r}")
        declared += 1
        if i == j:
            raise SelfLoop(f"line {lineno}: self-loop at node {i}")
        if not (1 <= i <= n and 1 <= j <= n):
            raise Malformed(f"line {lineno}: node id outside 1..{n}")
        if w == 0:
            warnings.warn(f"line {lineno}: zero-weight edge ({i}, {j}) dropped")
            continue
        edges.append((i - 1, j - 1, w))
    if n is None:
        raise Malformed("line 1: empty instance file")
    if declared != m:
        raise Malformed(f"edge count mismatch: header says {m}, file has {declared}")
    seen = set()
    for i, j, _ in edges:
        key = (min(i, j), max(i, j))
        if key in seen:
            raise DuplicateEdge(f"edge ({key[0] + 1}, {key[1] + 1}) listed twice")
        seen.add(key)
    return MaxCutInstance(n=n, edges=tuple(edges), name=name)


def serialize_rudy(inst: MaxCutInstance) -> str:
    out = [f"{inst.n} {inst.m}"]
    for i, j, w in inst.edges:
        out.append(f"{i + 1} {j + 1} {w}")
    return "\n".join(out) + "\n"


def read_instance(path, name: Optional[str] = None) -> MaxCutInstance:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    import os

    return parse_rudy(text, name=name or os.path.splitext(os.path.basename(path))[0])


def write_instance(path, inst: MaxCutInstance) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(serialize_rudy(inst))


# -- measurement campaigns ---------------------------------------------------------

MEASUREMENT_HEADER = ("v_set", "hrs_kohm", "t_set_s")


def read_measurements(path) -> np.ndarray:
    """Load a (v, r, t_set) campaign CSV; header must match exactly."""
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise Malformed("line 1: empty measurement file")
        if tuple(h.strip() for h in header) != MEASUREMENT_HEADER:
            raise Malformed(
                f"line 1: expected header {','.join(MEASUREMENT_HEADER)}, got {header}"
            )
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                rows.append((float(row[0]), float(row[1]), float(row[2])))
            except (ValueError, IndexError):
                raise Malformed(f"line {lineno}: expected three numbers, got {row}")
    return np.asarray(rows, dtype=float)


# -- generation ------------------------------------------------------------------


def generate_instance(
    n: int,
    avg_degree: float,
    weight_set: Sequence[int] = (-1, 1),
    seed: int = 0,
    name: Optional[str] = None,
) -> MaxCutInstance:
    """Erdos-Renyi instance: edge probability avg_degree/(n-1), seeded.

    Zeros in weight_set are treated as absent edges and ignored.
    """
    if n < 2:
        raise InvalidDegree(f"need n >= 2, got {n}")
    if not 0 < avg_degree < n:
        raise InvalidDegree(f"avg_degree must be in (0, {n}), got {avg_degree}")
    weights = sorted({int(w) for w in weight_set} - {0})
    if not weights:
        raise ValueError("weight_set must contain a nonzero weight")
    p = avg_degree / (n - 1)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    iu, ju = np.triu_indices(n, k=1)
    mask = rng.random(iu.size) < p
    wi = rng.integers(0, len(weights), size=int(mask.sum()))
    table = np.array(weights, dtype=np.int64)
    edges = tuple(
        (int(a), int(b), int(table[k]))
        for a, b, k in zip(iu[mask], ju[mask], wi)
    )
    return MaxCutInstance(
        n=n,
        edges=edges,
        name=name or f"rand_n{n}_d{avg_degree:g}_s{seed}",
    )


# -- exhaustive oracle -------------------------------------------------------------


def brute_force_maxcut(inst: MaxCutInstance) -> tuple[int, np.ndarray]:
    """Exact maximum cut by enumeration; n <= 20.

    Complement symmetry lets node n-1 stay in partition 0, so 2^(n-1)
    configurations are scanned, vectorized per edge.
    """
    n = inst.n
    if n > 20:
        raise TooLarge(f"brute force capped at 20 nodes, got {n}")
    if n == 0:
        return 0, np.zeros(0, dtype=np.uint8)
    count = 1 << max(n - 1, 0)
    codes = np.arange(count, dtype=np.uint32)
    cuts = np.zeros(count, dtype=np.int64)
    for i, j, w in inst.edges:
        bi = (codes >> i) & 1 if i < n - 1 else np.zeros(count, dtype=np.uint32)
        bj = (codes >> j) & 1 if j < n - 1 else np.zeros(count, dtype=np.uint32)
        cuts += w * (bi ^ bj).astype(np.int64)
    best = int(cuts.argmax())
    x = np.array([(best >> i) & 1 for i in range(n - 1)] + [0], dtype=np.uint8)[:n]
    return int(cuts[best]), x


# -- best-known registry -------------------------------------------------------------


@dataclass
class BestKnownRegistry:
    """instance name -> (best-known cut, provenance)."""

    entries: dict = field(default_factory=dict)

    def set_entry(self, name: str, cut: int, provenance: str) -> None:
        if provenance not in PROVENANCES:
            raise ValueError(f"provenance must be one of {PROVENANCES}")
        self.entries[name] = {"cut": int(cut), "provenance": provenance}

    def get(self, name: str) -> Optional[int]:
        e = self.entries.get(name)
        return None if e is None else int(e["cut"])

    def provenance(self, name: str) -> Optional[str]:
        e = self.entries.get(name)
        return None if e is None else e["provenance"]

    def save(self, path) -> None:
        try:
            with open(path, "w", encoding="utf-8") as fh:
                json.dump(self.entries, fh, indent=2, sort_keys=True)
                fh.write("\n")
        except OSError as exc:
            raise IoFailure(f"cannot write registry {path}: {exc}") from exc

    @classmethod
    def load(cls, path) -> "BestKnownRegistry":
        with open(path, "r", encoding="utf-8") as fh:
            entries = json.load(fh)
        reg = cls()
        for name, e in entries.items():
            reg.set_entry(name, e["cut"], e["provenance"])
        return reg


# -- result tables --------------------------------------------------------------------


RESULT_COLUMNS = (
    "run_id",
    "instance",
    "n",
    "scheme",
    "m_hrs",
    "d2d_cv",
    "calibrated",
    "seed",
    "converged_at",
    "best_cut",
    "settling_energy",
    "iterations",
    "clamp_events",
)


@dataclass
class ResultRow:
    run_id: int
    instance: str
    n: int
    scheme: str
    m_hrs: float
    d2d_cv: float
    calibrated: bool
    seed: int
    converged_at: Optional[int]
    best_cut: int
    settling_energy: float
    iterations: int
    clamp_events: int

    def as_record(self) -> list:
        return [
            self.run_id,
            self.instance,
            self.n,
            self.scheme,
            repr(float(self.m_hrs)),
            repr(float(self.d2d_cv)),
            int(self.calibrated),
            self.seed,
            "" if self.converged_at is None else self.converged_at,
            self.best_cut,
            repr(float(self.settling_energy)),
            self.iterations,
            self.clamp_events,
        ]


def results_to_csv(rows: Iterable[ResultRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RESULT_COLUMNS)
    for row in rows:
        writer.writerow(row.as_record())
    return buf.getvalue()


def write_results(path, rows: Iterable[ResultRow]) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(results_to_csv(rows))
    except OSError as exc:
        raise IoFailure(f"cannot write results {path}: {exc}") from exc


def read_results(path) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        return list(csv.DictReader(fh))


# -- manifests ---------------------------------------------------------------------------


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(path, command: str, config: dict, seed: int, params_path=None) -> dict:
    """Record everything needed to reproduce a run byte-for-byte.

    The timestamp is manifest-only; result CSVs never embed it.
    """
    from . import __version__

    manifest = {
        "command": command,
        "config": config,
        "seed": int(seed),
        "params_file": None if params_path is None else str(params_path),
        "params_sha256": None if params_path is None else file_sha256(params_path),
        "version": __version__,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    try:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc
    return manifest
