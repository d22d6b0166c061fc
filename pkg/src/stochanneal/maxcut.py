"""Max-Cut instances and the Boltzmann energy algebra.

A cut assignment is a binary vector x (0 = first partition, 1 = second).
The value to maximize is the total weight crossing the partition,

    M(x) = sum_{i<j} w_ij [(1 - x_i) x_j + (1 - x_j) x_i],

and the network minimizes E(x) = -M(x) written in Boltzmann standard form

    E(x) = b.x - 1/2 x.W_B.x   with   b_i = -sum_j w_ij,  W_B_ij = -2 w_ij.

Weights are integers, so all energies here are exact integers; convergence
bookkeeping never sees float drift.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import DimensionMismatch, DuplicateEdge, IndexOutOfRange, SelfLoop


@dataclass(frozen=True)
class MaxCutInstance:
    """Undirected weighted graph; one entry per unordered pair, 0-indexed."""

    n: int
    edges: tuple[tuple[int, int, int], ...]
    name: str = ""
    best_known: Optional[int] = None

    def __post_init__(self):
        if self.n < 0:
            raise ValueError("node count must be >= 0")
        canon = []
        seen = set()
        for i, j, w in self.edges:
            i, j, w = int(i), int(j), int(w)
            if i == j:
                raise SelfLoop(f"self-loop at node {i}")
            if i > j:
                i, j = j, i
            if not (0 <= i < j < self.n):
                raise IndexOutOfRange(f"edge ({i}, {j}) outside [0, {self.n})")
            if (i, j) in seen:
                raise DuplicateEdge(f"edge ({i}, {j}) listed twice")
            seen.add((i, j))
            canon.append((i, j, w))
        object.__setattr__(self, "edges", tuple(sorted(canon)))

    @property
    def m(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class BoltzmannForm:
    """b vector and sparse symmetric W_B in CSR layout (zero diagonal)."""

    n: int
    b: np.ndarray                     # int64, length n
    indptr: np.ndarray                # int64, length n+1
    indices: np.ndarray               # int64, neighbor node ids
    weights: np.ndarray               # int64, W_B values (-2 w_ij)
    total_weight: int = field(default=0)  # sum of w_ij, for identities

    def neighbors(self, i: int):
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.indices[lo:hi], self.weights[lo:hi]


def build_form(inst: MaxCutInstance) -> BoltzmannForm:
    """Assemble b_i = -sum_j w_ij and W_B_ij = -2 w_ij from the edge list."""
    n = inst.n
    b = np.zeros(n, dtype=np.int64)
    deg = np.zeros(n, dtype=np.int64)
    for i, j, w in inst.edges:
        b[i] -= w
        b[j] -= w
        deg[i] += 1
        deg[j] += 1
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(deg, out=indptr[1:])
    indices = np.zeros(inst.m * 2, dtype=np.int64)
    weights = np.zeros(inst.m * 2, dtype=np.int64)
    cursor = indptr[:-1].copy()
    for i, j, w in inst.edges:
        indices[cursor[i]] = j
        weights[cursor[i]] = -2 * w
        cursor[i] += 1
        indices[cursor[j]] = i
        weights[cursor[j]] = -2 * w
        cursor[j] += 1
    total = int(sum(w for _, _, w in inst.edges))
    return BoltzmannForm(n=n, b=b, indptr=indptr, indices=indices, weights=weights,
                         total_weight=total)


def _check_x(n: int, x: Sequence[int]) -> None:
    if len(x) != n:
        raise DimensionMismatch(f"configuration length {len(x)} != n = {n}")


def cut_value(inst: MaxCutInstance, x: Sequence[int]) -> int:
    """Total weight of edges crossing the partition encoded by x."""
    _check_x(inst.n, x)
    return sum(w for i, j, w in inst.edges if x[i] != x[j])


def energy(form: BoltzmannForm, x: Sequence[int]) -> int:
    """E(x) = b.x - 1/2 x.W_B.x, exact integer arithmetic."""
    _check_x(form.n, x)
    e = 0
    b = form.b
    indptr, indices, weights = form.indptr, form.indices, form.weights
    for i in range(form.n):
        if x[i]:
            acc = 0
            for k in range(indptr[i], indptr[i + 1]):
                if x[indices[k]]:
                    acc += int(weights[k])
            # each unordered pair contributes twice across the CSR, so the
            # running quadratic term is even and acc // 2 is exact
            e += int(b[i]) - acc // 2
    return e


def local_field(form: BoltzmannForm, x: Sequence[int], i: int) -> int:
    """u_i = sum_j W_B_ij x_j - b_i, the energy drop of setting x_i to 1."""
    if not 0 <= i < form.n:
        raise IndexOutOfRange(f"node {i} outside [0, {form.n})")
    _check_x(form.n, x)
    idx, wts = form.neighbors(i)
    acc = 0
    for k in range(idx.size):
        if x[idx[k]]:
            acc += int(wts[k])
    return acc - int(form.b[i])


def init_fields(form: BoltzmannForm, x: Sequence[int]) -> list[int]:
    """All local fields for configuration x (scratch O(n + E) build)."""
    _check_x(form.n, x)
    u = [-int(bi) for bi in form.b]
    indptr, indices, weights = form.indptr, form.indices, form.weights
    for j in range(form.n):
        if x[j]:
            for k in range(indptr[j], indptr[j + 1]):
                u[indices[k]] += int(weights[k])
    return u


def update_fields_after_assign(
    form: BoltzmannForm, u: list, x: list, i: int, new_xi: int
) -> None:
    """Apply x_i <- new_xi and repair every neighbor field in O(deg(i)).

    No-op when new_xi equals the current value. u must be consistent with x
    on entry; it is consistent with the updated x on exit.
    """
    if not 0 <= i < form.n:
        raise IndexOutOfRange(f"node {i} outside [0, {form.n})")
    delta = int(new_xi) - int(x[i])
    if delta == 0:
        return
    x[i] = int(new_xi)
    indptr, indices, weights = form.indptr, form.indices, form.weights
    for k in range(indptr[i], indptr[i + 1]):
        u[indices[k]] += int(weights[k]) * delta
