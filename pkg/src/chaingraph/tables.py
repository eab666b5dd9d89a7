"""Dense joint probability and count tables over a product of finite state spaces.

Cells are indexed lexicographically over the vertices sorted by label, last
vertex fastest, which is numpy's C order for an array with one axis per
vertex. States are 1-based in files and 0-based in arrays.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import TableError, ZeroProbabilityError
from .graph import vset

MAX_CELLS = 2 ** 24
DEFAULT_CI_TOL = 1e-9
DEFAULT_RANK_RTOL = 1e-8
DEFAULT_SEED = 20090601


def _check_size(shape):
    if int(np.prod(shape, dtype=np.int64)) > MAX_CELLS:
        raise TableError(f"table with shape {tuple(shape)} exceeds {MAX_CELLS} cells")


@dataclass(frozen=True, eq=False)
class JointTable:
    """Probability vector ``p(i)``; ``probs`` has one axis per vertex."""

    vertices: tuple
    probs: np.ndarray

    def __post_init__(self):
        verts = tuple(int(v) for v in self.vertices)
        probs = np.asarray(self.probs)
        if probs.dtype != object:
            probs = probs.astype(float)
        if list(verts) != sorted(set(verts)):
            order = np.argsort(verts)
            verts = tuple(verts[k] for k in order)
            probs = np.transpose(probs, order)
        if probs.ndim != len(verts):
            raise TableError(f"probs has {probs.ndim} axes for {len(verts)} vertices")
        _check_size(probs.shape)
        if np.any(probs < 0):
            raise TableError("probabilities must be nonnegative")
        if abs(probs.sum() - 1) > 1e-12 * max(1, probs.size ** 0.5):
            raise TableError(f"probabilities sum to {float(probs.sum())!r}, not 1")
        if probs.dtype != object:
            probs = np.ascontiguousarray(probs)
            probs.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "probs", probs)

    @property
    def levels(self) -> dict:
        return dict(zip(self.vertices, self.probs.shape))

    @property
    def positive(self) -> bool:
        return bool(np.all(self.probs > 0))

    def axes(self, vertices) -> list:
        pos = {v: k for k, v in enumerate(self.vertices)}
        try:
            return [pos[v] for v in sorted(vertices)]
        except KeyError as exc:
            raise TableError(f"unknown vertex {exc.args[0]}") from None

    def vector(self) -> np.ndarray:
        return self.probs.reshape(-1)

    @classmethod
    def from_vector(cls, levels: dict, vector):
        verts = sorted(levels)
        return cls(tuple(verts), np.asarray(vector).reshape([levels[v] for v in verts]))

    @classmethod
    def uniform(cls, levels: dict):
        verts = sorted(levels)
        shape = [levels[v] for v in verts]
        return cls(tuple(verts), np.full(shape, 1.0 / np.prod(shape)))

    @classmethod
    def random(cls, levels: dict, rng):
        """Cells drawn independently from U(0, 1), then normalized."""
        verts = sorted(levels)
        raw = rng.uniform(size=[levels[v] for v in verts])
        return cls(tuple(verts), raw / raw.sum())


@dataclass(frozen=True, eq=False)
class CountTable:
    vertices: tuple
    counts: np.ndarray
    n: int = field(init=False)

    def __post_init__(self):
        verts = tuple(int(v) for v in self.vertices)
        counts = np.asarray(self.counts)
        if list(verts) != sorted(set(verts)):
            order = np.argsort(verts)
            verts = tuple(verts[k] for k in order)
            counts = np.transpose(counts, order)
        if counts.ndim != len(verts):
            raise TableError(f"counts has {counts.ndim} axes for {len(verts)} vertices")
        if np.any(counts < 0) or np.any(counts != np.round(counts)):
            raise TableError("counts must be nonnegative integers")
        counts = np.ascontiguousarray(counts.astype(np.int64))
        counts.setflags(write=False)
        object.__setattr__(self, "vertices", verts)
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", int(counts.sum()))

    @property
    def levels(self) -> dict:
        return dict(zip(self.vertices, self.counts.shape))

    def axes(self, vertices) -> list:
        pos = {v: k for k, v in enumerate(self.vertices)}
        return [pos[v] for v in sorted(vertices)]

    def marginal_counts(self, alpha) -> np.ndarray:
        """``n(i_alpha)`` with axes in sorted vertex order."""
        keep = set(self.axes(alpha))
        drop = tuple(k for k in range(len(self.vertices)) if k not in keep)
        return self.counts.sum(axis=drop)

    def proportions(self) -> JointTable:
        if self.n == 0:
            raise TableError("empty count table has no proportions")
        return JointTable(self.vertices, self.counts / self.n)


def _marginal_array(arr, vertices, alpha):
    pos = {v: k for k, v in enumerate(vertices)}
    keep = [pos[v] for v in sorted(alpha)]
    drop = tuple(k for k in range(len(vertices)) if k not in keep)
    return arr.sum(axis=drop) if drop else arr


def marginal(p: JointTable, alpha) -> JointTable:
    alpha = vset(alpha)
    if not alpha:
        raise TableError("marginal over the empty set")
    p.axes(alpha)
    return JointTable(tuple(sorted(alpha)), _marginal_array(p.probs, p.vertices, alpha))


def marginal_array(p: JointTable, alpha) -> np.ndarray:
    """Marginal probabilities as a bare array; the empty set gives a 0-d array of 1."""
    alpha = vset(alpha)
    p.axes(alpha)
    return _marginal_array(p.probs, p.vertices, alpha)


def conditional_array(p: JointTable, target, given) -> np.ndarray:
    """``p(i_target | i_given)`` with axes (sorted given..., sorted target...)."""
    target, given = vset(target), vset(given)
    if target & given:
        raise TableError("target and given must be disjoint")
    both = sorted(target | given)
    joint = _marginal_array(p.probs, p.vertices, target | given)
    order = [both.index(v) for v in sorted(given)] + [both.index(v) for v in sorted(target)]
    joint = np.transpose(joint, order)
    ng = len(given)
    denom = joint.sum(axis=tuple(range(ng, joint.ndim)), keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        return joint / denom


def conditional(p: JointTable, target, given=(), state=()) -> JointTable:
    """Conditional distribution of ``target`` given ``X_given = state``.

    ``state`` lists 1-based states for the given vertices in sorted order, or
    is a dict keyed by vertex.
    """
    target, given = vset(target), vset(given)
    if isinstance(state, dict):
        state = [state[v] for v in sorted(given)]
    state = tuple(int(s) for s in state)
    if len(state) != len(given):
        raise TableError("state must assign every conditioning vertex")
    joint = _marginal_array(p.probs, p.vertices, target | given)
    both = sorted(target | given)
    order = [both.index(v) for v in sorted(given)] + [both.index(v) for v in sorted(target)]
    sliced = np.transpose(joint, order)[tuple(s - 1 for s in state)]
    total = sliced.sum()
    if total <= 0:
        raise ZeroProbabilityError(f"conditioning event {dict(zip(sorted(given), state))} "
                                   "has probability zero")
    return JointTable(tuple(sorted(target)), sliced / total)


def _ci_blocks(probs, vertices, stmt):
    """Marginal over the statement's vertices reshaped to (|I_gamma|, |I_alpha|, |I_beta|)."""
    a, b, c = sorted(stmt.alpha), sorted(stmt.beta), sorted(stmt.gamma)
    both = sorted(stmt.alpha | stmt.beta | stmt.gamma)
    m = _marginal_array(probs, vertices, set(both))
    m = np.transpose(m, [both.index(v) for v in c + a + b])
    shp = m.shape
    nc = int(np.prod(shp[:len(c)], dtype=np.int64))
    na = int(np.prod(shp[len(c):len(c) + len(a)], dtype=np.int64))
    return m.reshape(nc, na, -1)


def ci_residual(p: JointTable, stmt) -> float:
    """Largest ``|p(a,b,c) p(c) - p(a,c) p(b,c)|`` over all cells."""
    m = _ci_blocks(p.probs, p.vertices, stmt)
    pc = m.sum(axis=(1, 2))[:, None, None]
    pac = m.sum(axis=2)[:, :, None]
    pbc = m.sum(axis=1)[:, None, :]
    resid = m * pc - pac * pbc
    if resid.dtype == object:
        return max(abs(x) for x in resid.ravel())
    return float(np.max(np.abs(resid)))


def ci_slice_ranks(p: JointTable, stmt, rtol: float = DEFAULT_RANK_RTOL) -> list:
    m = _ci_blocks(p.probs, p.vertices, stmt).astype(float)
    return [numeric_rank(block, rtol) for block in m]


def numeric_rank(mat, rtol: float = DEFAULT_RANK_RTOL) -> int:
    s = np.linalg.svd(np.asarray(mat, dtype=float), compute_uv=False)
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.sum(s > s[0] * rtol))


def ci_holds(p: JointTable, stmt, tol: float = DEFAULT_CI_TOL, mode: str = "factor") -> bool:
    """Brute-force check of one conditional independence.

    ``mode="factor"`` thresholds the bilinear residual at ``tol``;
    ``mode="rank"`` requires every gamma-slice (rows alpha, columns beta) to
    have numeric rank at most one.
    """
    if mode == "factor":
        return ci_residual(p, stmt) <= tol
    if mode == "rank":
        return max(ci_slice_ranks(p, stmt), default=0) <= 1
    raise ValueError(f"unknown mode {mode!r}")


@dataclass
class MarkovReport:
    mtype: str
    results: list   # (statement, residual, holds)

    @property
    def holds(self) -> bool:
        return all(ok for _, _, ok in self.results)

    def failures(self):
        return [s for s, _, ok in self.results if not ok]

    def to_json(self):
        return {
            "type": self.mtype,
            "member": self.holds,
            "statements": [dict(s.to_json(), residual=float(r), holds=bool(ok))
                           for s, r, ok in self.results],
        }


def obeys_markov(p: JointTable, g, mtype="IV", tol: float = DEFAULT_CI_TOL,
                 minimal: bool = True) -> MarkovReport:
    from .markov import MarkovType, statements

    mtype = MarkovType.parse(mtype)
    results = []
    for s in statements(g, mtype, minimal=minimal):
        r = ci_residual(p, s)
        results.append((s, r, r <= tol))
    return MarkovReport(mtype.value, results)


def simulate_counts(p: JointTable, n: int, seed=DEFAULT_SEED) -> CountTable:
    if n < 0:
        raise TableError("sample size must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    probs = p.vector().astype(float)
    draw = rng.multinomial(int(n), probs / probs.sum())
    return CountTable(p.vertices, draw.reshape(p.probs.shape))


# -- CSV ----------------------------------------------------------------------

def _table_to_csv(vertices, arr, column, fmt):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([str(v) for v in vertices] + [column])
    for idx in np.ndindex(*arr.shape):
        value = arr[idx]
        if value != 0:
            writer.writerow([k + 1 for k in idx] + [fmt(value)])
    return buf.getvalue()


def counts_to_csv(counts: CountTable) -> str:
    return _table_to_csv(counts.vertices, counts.counts, "count", lambda x: str(int(x)))


def table_to_csv(p: JointTable) -> str:
    return _table_to_csv(p.vertices, p.probs, "prob", lambda x: repr(float(x)))


def _read_csv(text, levels=None):
    rows = list(csv.reader(io.StringIO(text)))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        raise TableError("empty CSV")
    header = [c.strip() for c in rows[0]]
    column = header[-1]
    if column not in ("count", "prob"):
        raise TableError("last CSV column must be 'count' or 'prob'")
    try:
        verts = [int(c) for c in header[:-1]]
    except ValueError:
        raise TableError(f"bad vertex label in header {header[:-1]}") from None
    cells = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise TableError(f"line {lineno}: expected {len(header)} fields", line=lineno)
        try:
            state = [int(c) for c in row[:-1]]
            value = float(row[-1])
        except ValueError:
            raise TableError(f"line {lineno}: non-numeric field", line=lineno) from None
        cells.append((state, value, lineno))
    if levels is None:
        levels = {v: 2 for v in verts}
        for state, _, _ in cells:
            for v, s in zip(verts, state):
                levels[v] = max(levels[v], s)
    shape = [levels[v] for v in verts]
    arr = np.zeros(shape)
    for state, value, lineno in cells:
        if any(s < 1 or s > d for s, d in zip(state, shape)):
            raise TableError(f"line {lineno}: state out of range", line=lineno)
        arr[tuple(s - 1 for s in state)] += value
    return verts, arr, column


def read_counts_csv(text: str, levels: dict | None = None) -> CountTable:
    verts, arr, column = _read_csv(text, levels)
    if column != "count":
        raise TableError("expected a 'count' column")
    return CountTable(tuple(verts), arr)


def read_table_csv(text: str, levels: dict | None = None) -> JointTable:
    """Read a probability table; a count table is normalized to proportions."""
    verts, arr, column = _read_csv(text, levels)
    if column == "count":
        return CountTable(tuple(verts), arr).proportions()
    if abs(arr.sum() - 1) > 1e-9:
        raise TableError(f"probabilities sum to {arr.sum()!r}, not 1")
    return JointTable(tuple(verts), arr / arr.sum())
