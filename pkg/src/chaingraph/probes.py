"""Numeric probes of the non-smooth type II and type III models on the graph 1 -> 3, 2 -- 3 -- 4.

Everything here is numeric (ranks, residuals, finite-difference Jacobians)
or, for the two fixed witness tables, exact rational arithmetic.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

import numpy as np

from .errors import ProbeError
from .graph import ChainGraph
from .markov import ci
from .moebius import ComponentModel, cumulate
from .tables import (
    DEFAULT_RANK_RTOL,
    JointTable,
    ci_holds,
    ci_residual,
    ci_slice_ranks,
    conditional_array,
    marginal_array,
    numeric_rank,
)

VERTICES = (1, 2, 3, 4)

# Statements referenced by the probes.
S_1_24 = ci({1}, {2, 4})                 # 1 _||_ {2,4}
S_2_4_13 = ci({2}, {4}, {1, 3})          # 2 _||_ 4 | {1,3}
S_2_4_1 = ci({2}, {4}, {1})              # 2 _||_ 4 | 1
S_1_24_3 = ci({1}, {2, 4}, {3})          # 1 _||_ {2,4} | 3
S_1_234 = ci({1}, {2, 3, 4})             # 1 _||_ {2,3,4}
S_2_14 = ci({2}, {1, 4})                 # 2 _||_ {1,4}

TYPE_II_STATEMENTS = (S_2_4_13, S_1_24)
TYPE_III_STATEMENTS = (S_2_4_1, S_1_24_3)

COORD_LABELS = ("q2", "q4", "q24",
                "q3|1", "q23|1", "q34|1", "q234|1",
                "q3|2", "q23|2", "q34|2", "q234|2")

# Witness tables, entries scaled by 32; rows (i1,i2), columns (i3,i4).
TABLE_6_7 = ((1, 3, 3, 1), (3, 1, 1, 3), (1, 3, 3, 1), (3, 1, 1, 3))
TABLE_6_8 = ((2, 2, 2, 2), (2, 2, 1, 1), (3, 3, 2, 2), (3, 3, 1, 1))


def witness_table(rows, exact=False) -> JointTable:
    arr = np.array(rows, dtype=object if exact else float).reshape(2, 2, 2, 2)
    if exact:
        arr = np.vectorize(lambda x: Fraction(int(x), 32), otypes=[object])(arr)
    else:
        arr = arr / 32.0
    return JointTable(VERTICES, arr)


def fig3_graph(levels=None) -> ChainGraph:
    return ChainGraph(VERTICES, [(1, 3)], [(2, 3), (3, 4)], levels)


def gbar_graph(levels=None) -> ChainGraph:
    return ChainGraph(VERTICES, [(1, 3)], [(2, 3), (3, 4), (2, 4)], levels)


def gsing_graph(levels=None) -> ChainGraph:
    return ChainGraph(VERTICES, [(1, 3)], [], levels)


def _require_four(p):
    if tuple(p.vertices) != VERTICES:
        raise ProbeError(f"expected a table over vertices {VERTICES}, got {p.vertices}")


def _require_binary(p):
    _require_four(p)
    if p.probs.shape != (2, 2, 2, 2):
        raise ProbeError("this probe is defined for four binary variables only")


# -- Q matrices -------------------------------------------------------------------

@dataclass(frozen=True)
class QMatrix:
    i1: int
    i3: int
    entries: np.ndarray

    def rank(self, rtol=DEFAULT_RANK_RTOL) -> int:
        return numeric_rank(self.entries, rtol)


@dataclass(frozen=True)
class GbarCoordinates:
    """Moebius parameters of the model with 2, 3, 4 pairwise adjacent.

    Arrays follow the sorted-vertex axis convention with 0-based states;
    conditional ones carry X1's state as their first axis.
    """

    q1: np.ndarray
    q2: np.ndarray
    q4: np.ndarray
    q24: np.ndarray
    q3: np.ndarray
    q23: np.ndarray
    q34: np.ndarray
    q234: np.ndarray

    def binary_vector(self) -> np.ndarray:
        out = [self.q2[0], self.q4[0], self.q24[0, 0]]
        for i in range(2):
            out += [self.q3[i, 0], self.q23[i, 0, 0], self.q34[i, 0, 0], self.q234[i, 0, 0, 0]]
        return np.array(out, dtype=float)


def gbar_coordinates(p: JointTable, tol=1e-9, check=True) -> GbarCoordinates:
    _require_four(p)
    if not p.positive:
        raise ProbeError("table must be strictly positive")
    if check and not ci_holds(p, S_1_24, tol):
        raise ProbeError("table is not in the model for 2 -- 3 -- 4 -- 2 with 1 -> 3: "
                         f"1 _||_ {{2,4}} fails (residual {ci_residual(p, S_1_24):.3g})")

    def top_removed(arr, k):
        return arr[(Ellipsis,) + (slice(0, -1),) * k]

    q1 = top_removed(marginal_array(p, {1}), 1)
    q2 = top_removed(marginal_array(p, {2}), 1)
    q4 = top_removed(marginal_array(p, {4}), 1)
    q24 = top_removed(marginal_array(p, {2, 4}), 2)
    q3 = top_removed(conditional_array(p, {3}, {1}), 1)
    q23 = top_removed(conditional_array(p, {2, 3}, {1}), 2)
    q34 = top_removed(conditional_array(p, {3, 4}, {1}), 2)
    q234 = top_removed(conditional_array(p, {2, 3, 4}, {1}), 3)
    return GbarCoordinates(q1, q2, q4, q24, q3, q23, q34, q234)


def build_q_matrices(p: JointTable, tol=1e-9) -> list:
    """The d2 x d4 matrices whose rank-one property characterizes the type II model."""
    c = gbar_coordinates(p, tol)
    d1, d2, d3, d4 = p.probs.shape
    out = []
    for i1 in range(d1):
        for i3 in range(d3):
            m = np.empty((d2, d4))
            if i3 < d3 - 1:
                m[:-1, :-1] = c.q234[i1, :, i3, :]
                m[:-1, -1] = c.q23[i1, :, i3]
                m[-1, :-1] = c.q34[i1, i3, :]
                m[-1, -1] = c.q3[i1, i3]
            else:
                m[:-1, :-1] = c.q24 - c.q234[i1].sum(axis=1)
                m[:-1, -1] = c.q2 - c.q23[i1].sum(axis=1)
                m[-1, :-1] = c.q4 - c.q34[i1].sum(axis=0)
                m[-1, -1] = 1 - c.q3[i1].sum()
            out.append(QMatrix(i1 + 1, i3 + 1, m))
    return out


def probability_matrices_5_5(p: JointTable) -> list:
    """``p(i1, ., i3, .)`` as d2 x d4 matrices, ordered like :func:`build_q_matrices`."""
    _require_four(p)
    d1, _, d3, _ = p.probs.shape
    return [np.asarray(p.probs[i1, :, i3, :], dtype=float) for i1 in range(d1) for i3 in range(d3)]


def prop14_member(p: JointTable, tol=1e-9, rtol=DEFAULT_RANK_RTOL) -> bool:
    """Type II membership through the rank of the Q matrices (input must satisfy 1 _||_ {2,4})."""
    return all(q.rank(rtol) <= 1 for q in build_q_matrices(p, tol))


def direct_2_4_given_13(p: JointTable, rtol=DEFAULT_RANK_RTOL) -> bool:
    return max(ci_slice_ranks(p, S_2_4_13, rtol)) <= 1


# -- binary equation systems -------------------------------------------------------

def _coords(coords):
    c = np.asarray(coords, dtype=float)
    if c.shape != (11,):
        raise ProbeError(f"expected 11 coordinates {COORD_LABELS}, got shape {c.shape}")
    q2, q4, q24 = c[:3]
    per = c[3:].reshape(2, 4)   # rows i = 1, 2: q3, q23, q34, q234
    return q2, q4, q24, per


def binary_equations_5_6_7(coords) -> np.ndarray:
    """Residuals [rank-one minors for i3 = 1 (i = 1, 2); minors for i3 = 2 (i = 1, 2)]."""
    q2, q4, q24, per = _coords(coords)
    q3, q23, q34, q234 = per.T
    first = q23 * q34 - q3 * q234
    second = q3 * q24 - q23 * q4 - q34 * q2 + q234 - (q24 - q2 * q4)
    return np.concatenate([first, second])


def singular_locus_residuals(coords) -> np.ndarray:
    q2, q4, q24, per = _coords(coords)
    q3, q23, q34, q234 = per.T
    return np.concatenate([[q2 * q4 - q24], q3 * q2 - q23, q3 * q4 - q34, q2 * q3 * q4 - q234])


def singular_locus_5_8(coords, tol=1e-10) -> bool:
    return bool(np.max(np.abs(singular_locus_residuals(coords))) <= tol)


def solve_type_ii_binary(q2, q4, q24, q3, q23):
    """Complete free coordinates to a solution of both binary equation pairs.

    ``q3`` and ``q23`` are length-2 arrays (one entry per state of X1). The
    remaining q34 and q234 follow rationally; returns the 11-vector or None
    when a denominator vanishes.
    """
    q3, q23 = np.asarray(q3, float), np.asarray(q23, float)
    denom = q23 / q3 - q2
    if np.any(np.abs(denom) < 1e-12):
        return None
    q34 = (q24 * (1 - q3) - q2 * q4 + q23 * q4) / denom
    q234 = q23 * q34 / q3
    per = np.column_stack([q3, q23, q34, q234])
    return np.concatenate([[q2, q4, q24], per.reshape(-1)])


def gbar_joint_from_coords(coords, q1=0.5) -> JointTable:
    """Joint binary table from the 11 coordinates plus P(X1 = 1); raises outside the region."""
    from .moebius import assemble_joint

    q2, q4, q24, per = _coords(coords)
    g = gbar_graph()
    model = ComponentModel(g, (2, 3, 4), (1,))
    params = {
        (2,): np.array([q2]), (3,): per[:, 0].reshape(2, 1), (4,): np.array([q4]),
        (2, 3): per[:, 1].reshape(2, 1, 1), (2, 4): np.array([[q24]]),
        (3, 4): per[:, 2].reshape(2, 1, 1), (2, 3, 4): per[:, 3].reshape(2, 1, 1, 1),
    }
    cond = model.conditional(model.join(params))
    return assemble_joint(g, {(1,): np.array([q1, 1 - q1]), (2, 3, 4): cond})


# -- type III ----------------------------------------------------------------------

def _binary_minor_eqs(probs):
    p = probs  # indices 0-based: p[i-1, j-1, k-1, l-1]

    def P(i, j, k, l):
        return p[i - 1, j - 1, k - 1, l - 1]

    r64 = (P(1, 1, 2, 1) * P(2, 2, 2, 2) - P(1, 1, 2, 2) * P(2, 2, 2, 1)) - \
          (P(1, 1, 1, 1) * P(2, 2, 1, 2) - P(1, 1, 1, 2) * P(2, 2, 1, 1))
    r65 = (P(1, 2, 2, 1) * P(2, 1, 2, 2) - P(1, 2, 2, 2) * P(2, 1, 2, 1)) - \
          (P(1, 2, 1, 1) * P(2, 1, 1, 2) - P(1, 2, 1, 2) * P(2, 1, 1, 1))
    return r64, r65


def minor_equation_residuals(p: JointTable):
    """Residuals of the two equalities of 2x2 minors across the states of X3."""
    _require_binary(p)
    return _binary_minor_eqs(p.probs)


@dataclass
class Prop17Result:
    cond_i: bool
    cond_ii: bool
    residuals: dict

    @property
    def member(self) -> bool:
        return self.cond_i or self.cond_ii

    def to_json(self):
        return {"cond_i": self.cond_i, "cond_ii": self.cond_ii, "member": self.member,
                "residuals": {k: float(v) for k, v in self.residuals.items()}}


def prop17_classify(p: JointTable, tol=1e-9) -> Prop17Result:
    """Which of the two irreducible pieces of the binary type III model contain ``p``.

    With an exact (Fraction) table use ``tol=0``.
    """
    _require_binary(p)
    if not np.all(p.probs > 0):
        raise ProbeError("table must be strictly positive")
    res = {
        "1_||_234": ci_residual(p, S_1_234),
        "2_||_14": ci_residual(p, S_2_14),
        "2_||_4|1": ci_residual(p, S_2_4_1),
        "1_||_24|3": ci_residual(p, S_1_24_3),
    }
    r64, r65 = minor_equation_residuals(p)
    res["minors_k3"] = abs(r64)
    res["minors_k3_swapped"] = abs(r65)
    cond_i = res["1_||_234"] <= tol and res["2_||_14"] <= tol
    cond_ii = all(res[k] <= tol for k in ("2_||_4|1", "1_||_24|3", "minors_k3",
                                           "minors_k3_swapped"))
    return Prop17Result(bool(cond_i), bool(cond_ii), res)


@dataclass
class TypeIIIVerdict:
    prop17: bool
    direct: bool
    detail: Prop17Result

    @property
    def consistent(self) -> bool:
        return self.prop17 == self.direct

    def to_json(self):
        return {"prop17": self.prop17, "direct": self.direct, "consistent": self.consistent,
                **self.detail.to_json()}


def membership_type_iii_binary(p: JointTable, tol=1e-9, rtol=DEFAULT_RANK_RTOL) -> TypeIIIVerdict:
    """Type III membership two ways: the decomposition above, and rank tests of the defining CIs."""
    detail = prop17_classify(p, tol)
    fp = JointTable(p.vertices, np.asarray(p.probs, dtype=float))
    direct = all(max(ci_slice_ranks(fp, s, rtol)) <= 1 for s in TYPE_III_STATEMENTS)
    return TypeIIIVerdict(detail.member, bool(direct), detail)


# -- samplers ------------------------------------------------------------------------

def _project_batch(arr, verts, stmt):
    """Replace each table by p(a,c) p(b,c) / p(c) * p(rest | a,b,c); arr has a batch axis."""
    k = len(verts)
    pos = {v: i + 1 for i, v in enumerate(verts)}
    allv = set(verts)
    abc = stmt.alpha | stmt.beta | stmt.gamma

    def msum(keep):
        drop = tuple(pos[v] for v in allv - keep)
        return arr.sum(axis=drop, keepdims=True) if drop else arr

    p_abc = msum(abc)
    p_ac = msum(stmt.alpha | stmt.gamma)
    p_bc = msum(stmt.beta | stmt.gamma)
    p_c = msum(stmt.gamma) if stmt.gamma else arr.sum(axis=tuple(range(1, k + 1)), keepdims=True)
    return arr / p_abc * (p_ac * p_bc / p_c)


def project_onto_ci(tables, stmts, tol=1e-10, max_sweeps=10_000, vertices=VERTICES):
    """Cyclic projection of a batch of positive tables onto a set of CI statements.

    Returns ``(tables, residuals, sweeps)``; residual is the largest bilinear
    CI residual of each table after the last sweep.
    """
    arr = np.array(tables, dtype=float)
    single = arr.ndim == len(vertices)
    if single:
        arr = arr[None]
    verts = tuple(vertices)
    resid = np.full(arr.shape[0], np.inf)
    sweep = 0
    active = np.ones(arr.shape[0], dtype=bool)
    while sweep < max_sweeps and active.any():
        sub = arr[active]
        for s in stmts:
            sub = _project_batch(sub, verts, s)
        arr[active] = sub
        sweep += 1
        if sweep % 10 == 0 or sweep == max_sweeps:
            idx = np.flatnonzero(active)
            r = np.max([_vector_residual(arr[idx], verts, s) for s in stmts], axis=0)
            resid[idx] = r
            active[idx] = r >= tol
    if single:
        return arr[0], resid[0], sweep
    return arr, resid, sweep


def _vector_residual(arr, verts, stmt):
    """Bilinear CI residual for every table in a batch."""
    n = arr.shape[0]
    a, b, c = sorted(stmt.alpha), sorted(stmt.beta), sorted(stmt.gamma)
    both = sorted(stmt.alpha | stmt.beta | stmt.gamma)
    pos = {v: i + 1 for i, v in enumerate(verts)}
    drop = tuple(pos[v] for v in verts if v not in both)
    m = arr.sum(axis=drop) if drop else arr
    m = np.transpose(m, [0] + [both.index(v) + 1 for v in c + a + b])
    shp = m.shape[1:]
    nc = int(np.prod(shp[:len(c)], dtype=np.int64))
    na = int(np.prod(shp[len(c):len(c) + len(a)], dtype=np.int64))
    m = m.reshape(n, nc, na, -1)
    pc = m.sum(axis=(2, 3))[:, :, None, None]
    pac = m.sum(axis=3)[:, :, :, None]
    pbc = m.sum(axis=2)[:, :, None, :]
    return np.max(np.abs(m * pc - pac * pbc), axis=(1, 2, 3))


def sample_ci_model(stmts, rng, n=1, levels=(2, 2, 2, 2), tol=1e-10, max_sweeps=10_000):
    """Positive tables satisfying ``stmts``: flat Dirichlet start, then cyclic projection.

    Tables that do not reach ``tol`` within ``max_sweeps`` are dropped.
    """
    raw = rng.dirichlet(np.ones(int(np.prod(levels))), size=n).reshape((n,) + tuple(levels))
    arr, resid, _ = project_onto_ci(raw, stmts, tol, max_sweeps)
    keep = resid < tol
    return [JointTable(VERTICES, t / t.sum()) for t in arr[keep]]


def sample_type_ii(rng, n=1, **kw) -> list:
    return sample_ci_model(TYPE_II_STATEMENTS, rng, n, **kw)


def sample_type_iii(rng, n=1, **kw) -> list:
    return sample_ci_model(TYPE_III_STATEMENTS, rng, n, **kw)


# -- smoothness probe -----------------------------------------------------------------

@dataclass(frozen=True)
class ConstraintSystem:
    residual: Callable
    labels: tuple
    dim: int

    def __call__(self, point):
        return np.asarray(self.residual(np.asarray(point, dtype=float)), dtype=float)

    def jacobian(self, point, step=1e-6) -> np.ndarray:
        point = np.asarray(point, dtype=float)
        cols = []
        for k in range(self.dim):
            e = np.zeros(self.dim)
            e[k] = step
            cols.append((self(point + e) - self(point - e)) / (2 * step))
        return np.column_stack(cols)


def system_5_6_7() -> ConstraintSystem:
    return ConstraintSystem(binary_equations_5_6_7, COORD_LABELS, 11)


def invariance_system(g: ChainGraph, tau) -> ConstraintSystem:
    """Linear system: saturated parameters of each connected set agree across
    parent states that coincide on the set's own parents.

    Coordinates are all saturated parameters of ``tau`` over every parent
    state (the cumulative array without its all-top cells), in C order.
    """
    model = ComponentModel(g, tau)
    shape = model.shape
    lead = len(model.pa)
    top = np.zeros(shape, dtype=bool)
    top[(Ellipsis,) + (-1,) * model.n_tau] = True
    free_mask = ~top
    dim = int(free_mask.sum())
    rows = []   # (index into flattened cumulative, reference index)
    flat_index = np.arange(int(np.prod(shape))).reshape(shape)
    for sigma_idx in model._plan:
        sigma, idx = sigma_idx[0], sigma_idx[1]
        if len(sigma) and sigma not in model.offsets:
            continue
        own = set(model.pa_g[sigma])
        sub = flat_index[idx]
        free_axes = [k for k, w in enumerate(model.pa) if w not in own]
        if not free_axes:
            continue
        ref = sub[tuple(slice(0, 1) if k in free_axes else slice(None) for k in range(lead))]
        ref = np.broadcast_to(ref, sub.shape)
        for a, b in zip(sub.reshape(-1), ref.reshape(-1)):
            if a != b:
                rows.append((a, b))
    position = -np.ones(int(np.prod(shape)), dtype=int)
    position[np.flatnonzero(free_mask.reshape(-1))] = np.arange(dim)
    pairs = np.array([(position[a], position[b]) for a, b in rows], dtype=int).reshape(-1, 2)

    def residual(x):
        return x[pairs[:, 0]] - x[pairs[:, 1]]

    labels = tuple(f"c{k}" for k in range(dim))
    return ConstraintSystem(residual, labels, dim)


def saturated_point(p: JointTable, g: ChainGraph, tau) -> np.ndarray:
    """Coordinates of ``p`` for :func:`invariance_system`."""
    model = ComponentModel(g, tau)
    cum = cumulate(conditional_array(p, model.tau, model.pa), model.n_tau)
    top = np.zeros(model.shape, dtype=bool)
    top[(Ellipsis,) + (-1,) * model.n_tau] = True
    return cum[~top]


@dataclass
class SmoothnessReport:
    jacobian_rank: int
    singular_values: list
    residual_norm: float

    def to_json(self):
        return {"jacobian_rank": self.jacobian_rank,
                "singular_values": [float(s) for s in self.singular_values],
                "residual_norm": self.residual_norm}


def smoothness_probe(system: ConstraintSystem, point, step=1e-6, rank_tol=1e-7,
                     max_residual=1e-8) -> SmoothnessReport:
    """Numeric Jacobian rank of ``system`` at a point on its zero set."""
    res = float(np.max(np.abs(system(point)))) if system.dim else 0.0
    if res > max_residual:
        raise ProbeError(f"point is not on the variety (max residual {res:.3g})", residual=res)
    jac = system.jacobian(point, step)
    s = np.linalg.svd(jac, compute_uv=False)
    rank = int(np.sum(s > s[0] * rank_tol)) if s.size and s[0] > 0 else 0
    return SmoothnessReport(rank, list(s), res)
