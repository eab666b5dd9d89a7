"""Moebius coordinates for chain graph models of the multivariate-regression type.

For a component ``tau`` and a parent state, the saturated Moebius parameters
are held in a *cumulative array* ``F`` of the same shape as the conditional
table: at a cell ``i_tau``, the variables with ``i_v`` equal to their top
state ``d_v`` are summed out, so ``F[i] = q(i_sigma | pa)`` with
``sigma = {v : i_v < d_v}`` and the all-top cell holds ``q(empty) = 1``.
Forward and inverse maps then act axis by axis (Kronecker structure).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import ParameterRegionError, SamplerError, TableError
from .graph import (
    DEFAULT_COMPONENT_CAP,
    ChainGraph,
    chain_components,
    connected_sets,
    dag_relations,
    maximal_connected_partition,
    parents,
    subsets_in_order,
    vset,
)
from .tables import JointTable, conditional_array

DEFAULT_MAX_REJECTIONS = 60


# -- axis-wise transforms -----------------------------------------------------

def cumulate(cond: np.ndarray, n_tau: int) -> np.ndarray:
    """Conditional table -> cumulative array; acts on the last ``n_tau`` axes."""
    out = np.array(cond, dtype=float, copy=True)
    for ax in range(out.ndim - n_tau, out.ndim):
        last = [slice(None)] * out.ndim
        last[ax] = -1
        out[tuple(last)] = out.sum(axis=ax)
    return out


def decumulate(cum: np.ndarray, n_tau: int) -> np.ndarray:
    """Inverse of :func:`cumulate`, i.e. Moebius inversion by inclusion-exclusion."""
    out = np.array(cum, dtype=float, copy=True)
    for ax in range(out.ndim - n_tau, out.ndim):
        last = [slice(None)] * out.ndim
        head = [slice(None)] * out.ndim
        last[ax] = -1
        head[ax] = slice(0, -1)
        out[tuple(last)] -= out[tuple(head)].sum(axis=ax)
    return out


def decumulate_adjoint(grad: np.ndarray, n_tau: int) -> np.ndarray:
    """Transpose of :func:`decumulate` (pulls gradients back to the cumulative array)."""
    out = np.array(grad, dtype=float, copy=True)
    for ax in range(out.ndim - n_tau, out.ndim):
        last = [slice(None)] * out.ndim
        head = [slice(None)] * out.ndim
        last[ax] = slice(-1, None)
        head[ax] = slice(0, -1)
        out[tuple(head)] -= out[tuple(last)]
    return out


def _sigma_index(tau, sigma, lead=1):
    """Index into a cumulative array selecting the saturated entries of ``sigma``."""
    idx = [slice(None)] * lead
    for v in tau:
        idx.append(slice(0, -1) if v in sigma else -1)
    return tuple(idx)


# -- saturated parameters -----------------------------------------------------

@dataclass(frozen=True, eq=False)
class SaturatedMoebius:
    """Saturated Moebius parameters of one component for one parent state.

    ``entries[sigma]`` is an array over ``J_sigma`` (axes in sorted vertex
    order, state ``k`` at position ``k - 1``).
    """

    tau: tuple
    levels: tuple
    pa_state: tuple
    entries: dict

    @cached_property
    def cumulative(self) -> np.ndarray:
        cum = np.empty(self.levels)
        cum[(-1,) * len(self.tau)] = 1.0
        for sigma, arr in self.entries.items():
            cum[_sigma_index(self.tau, sigma, lead=0)] = arr
        return cum

    def __len__(self):
        return sum(a.size for a in self.entries.values())

    def q(self, sigma, j) -> float:
        """Entry for ``sigma`` at 1-based states ``j`` (sorted vertex order)."""
        sigma = vset(sigma)
        if not sigma:
            return 1.0
        return float(self.entries[sigma][tuple(k - 1 for k in j)])


def _from_cumulative(tau, cum, pa_state=()):
    entries = {s: cum[_sigma_index(tau, s, lead=0)].copy() for s in subsets_in_order(tau)}
    return SaturatedMoebius(tuple(tau), tuple(cum.shape), tuple(pa_state), entries)


def saturated_from_conditional(cond: JointTable, pa_state=()) -> SaturatedMoebius:
    """Sum a strictly positive conditional table into saturated Moebius parameters."""
    if not cond.positive:
        raise TableError("saturated Moebius parameters need a strictly positive table")
    return _from_cumulative(cond.vertices, cumulate(cond.probs, len(cond.vertices)), pa_state)


def conditional_from_saturated(q: SaturatedMoebius) -> JointTable:
    probs = decumulate(q.cumulative, len(q.tau))
    _check_positive(probs, q.tau, q.pa_state)
    return JointTable(q.tau, probs)


def _check_positive(probs, tau, pa_state=(), pa=()):
    bad = np.argwhere(~(probs > 0))
    if bad.size:
        cell = [int(k) + 1 for k in bad[0]]
        if pa:
            state = dict(zip(list(pa) + list(tau), cell))
        else:
            state = dict(zip(tau, cell[-len(tau):]))
        raise ParameterRegionError(
            f"reconstructed probability {float(probs[tuple(bad[0])])!r} at cell {state} "
            f"of component {list(tau)} is not positive",
            component=list(tau), cell={str(k): v for k, v in state.items()},
            pa_state=list(pa_state))


# -- per-component parametrization ---------------------------------------------

class ComponentModel:
    """Moebius parametrization of the conditional tables ``p(i_tau | i_pa_D(tau))``.

    The free parameters are ``q_gamma(j_gamma | i_pa_G(gamma))`` over connected
    ``gamma``; the parameter vector concatenates them in ``connected_sets``
    order, each flattened in C order over (pa_G(gamma)..., gamma...).
    """

    def __init__(self, g: ChainGraph, tau, pa_d=None, cap=DEFAULT_COMPONENT_CAP):
        self.graph = g
        self.tau = tuple(sorted(tau))
        if pa_d is None:
            pa_d, _ = dag_relations(chain_components(g), tau)
        self.pa = tuple(sorted(pa_d))
        self.connected = [tuple(sorted(s)) for s in connected_sets(g, tau, cap)]
        self.pa_g = {c: tuple(sorted(parents(g, c))) for c in self.connected}
        self.pa_shape = tuple(g.d(w) for w in self.pa)
        self.tau_shape = tuple(g.d(v) for v in self.tau)
        self.shape = self.pa_shape + self.tau_shape
        self.param_shapes = {c: tuple(g.d(w) for w in self.pa_g[c]) + tuple(g.d(v) - 1 for v in c)
                             for c in self.connected}
        self.offsets = {}
        k = 0
        for c in self.connected:
            size = int(np.prod(self.param_shapes[c], dtype=np.int64))
            self.offsets[c] = (k, k + size)
            k += size
        self.n_params = k
        self._plan = []
        for sigma in subsets_in_order(self.tau):
            blocks = [tuple(sorted(b)) for b in maximal_connected_partition(g, sigma)]
            ssorted = tuple(sorted(sigma))
            reshapes = []
            for b in blocks:
                shp = [self.graph.d(w) if w in self.pa_g[b] else 1 for w in self.pa]
                shp += [self.graph.d(v) - 1 if v in b else 1 for v in ssorted]
                reshapes.append((b, tuple(shp)))
            target = self.pa_shape + tuple(g.d(v) - 1 for v in ssorted)
            self._plan.append((ssorted, _sigma_index(self.tau, sigma, lead=len(self.pa)),
                               reshapes, target))

    @property
    def n_tau(self):
        return len(self.tau)

    def split(self, theta) -> dict:
        theta = np.asarray(theta, dtype=float)
        return {c: theta[a:b].reshape(self.param_shapes[c]) for c, (a, b) in self.offsets.items()}

    def join(self, params: dict) -> np.ndarray:
        out = np.empty(self.n_params)
        for c, (a, b) in self.offsets.items():
            out[a:b] = np.asarray(params[c], dtype=float).reshape(-1)
        return out

    def independence_point(self) -> np.ndarray:
        """Parameters of the uniform conditional tables."""
        params = {}
        for c in self.connected:
            params[c] = np.full(self.param_shapes[c], np.prod([1.0 / self.graph.d(v) for v in c]))
        return self.join(params)

    def cumulative(self, theta) -> np.ndarray:
        params = self.split(theta)
        cum = np.empty(self.shape)
        cum[(Ellipsis,) + (-1,) * self.n_tau] = 1.0
        for _, idx, reshapes, target in self._plan:
            val = np.ones(target)
            for b, shp in reshapes:
                val = val * params[b].reshape(shp)
            cum[idx] = val
        return cum

    def conditional(self, theta, check=True) -> np.ndarray:
        """Conditional tables with axes (pa_D(tau)..., tau...)."""
        probs = decumulate(self.cumulative(theta), self.n_tau)
        if check:
            _check_positive(probs, self.tau, pa=self.pa)
        return probs

    def feasible(self, theta) -> bool:
        if not np.all(np.isfinite(theta)):
            return False
        return bool(np.all(decumulate(self.cumulative(theta), self.n_tau) > 0))

    def loglik(self, theta, counts) -> float:
        """Component log-likelihood; ``-inf`` outside the positive region."""
        probs = decumulate(self.cumulative(theta), self.n_tau)
        if not np.all(probs > 0):
            return -np.inf
        return float(np.sum(counts * np.log(probs)))

    def gradient(self, theta, counts) -> np.ndarray:
        params = self.split(theta)
        probs = decumulate(self.cumulative(theta), self.n_tau)
        dcum = decumulate_adjoint(counts / probs, self.n_tau)
        grads = {c: np.zeros(self.param_shapes[c]) for c in self.connected}
        for _, idx, reshapes, target in self._plan:
            g_sigma = dcum[idx]
            factors = [params[b].reshape(shp) for b, shp in reshapes]
            for k, (b, shp) in enumerate(reshapes):
                term = g_sigma
                for m, f in enumerate(factors):
                    if m != k:
                        term = term * f
                term = np.broadcast_to(term, target)
                axes = tuple(a for a, s in enumerate(shp) if s == 1)
                grads[b] += term.sum(axis=axes).reshape(self.param_shapes[b]) if axes else term
        return self.join(grads)

    def params_from_conditional(self, cond) -> np.ndarray:
        """Read the free parameters off conditional tables of a model point.

        Entries for ``gamma`` are taken at the first state of the parent
        components outside ``pa_G(gamma)``; for a model point they do not
        depend on that choice.
        """
        cum = cumulate(cond, self.n_tau)
        params = {}
        for sigma, idx, _, _ in self._plan:
            if sigma not in self.offsets:
                continue
            sub = cum[idx]
            pick = tuple(slice(None) if w in self.pa_g[sigma] else 0 for w in self.pa)
            params[sigma] = sub[pick]
        return self.join(params)

    def random_point(self, rng, weight=None, max_rejections=DEFAULT_MAX_REJECTIONS):
        """Random interior point: a convex mix of the independence point and a random one.

        The random end point draws one flat-Dirichlet table over ``tau`` per
        parent state and reads its free parameters off like a model point
        (so for a complete parent-free component it is always feasible).
        The weight starts in [0, 0.5] and halves after each rejection.
        """
        base = self.independence_point()
        w = rng.uniform(0.0, 0.5) if weight is None else float(weight)
        size = int(np.prod(self.tau_shape))
        for attempt in range(max_rejections):
            tab = rng.dirichlet(np.ones(size), size=int(np.prod(self.pa_shape, dtype=np.int64)))
            theta = (1 - w) * base + w * self.params_from_conditional(tab.reshape(self.shape))
            if self.feasible(theta):
                return theta, attempt
            w *= 0.5
        raise SamplerError(f"no feasible point after {max_rejections} attempts for "
                           f"component {list(self.tau)}", attempts=max_rejections)


# -- whole-graph parameters ----------------------------------------------------

@dataclass(frozen=True, eq=False)
class MoebiusParams:
    """Free Moebius parameters of every component.

    ``values[tau][gamma]`` is an array over (pa_G(gamma) states..., J_gamma).
    """

    values: dict

    def component_vector(self, model: ComponentModel) -> np.ndarray:
        return model.join(self.values[model.tau])

    def to_records(self, g: ChainGraph) -> list:
        records = []
        for tau in sorted(self.values):
            for gamma, arr in self.values[tau].items():
                pa = sorted(parents(g, gamma))
                npa = len(pa)
                for idx in np.ndindex(*arr.shape):
                    records.append({
                        "component": list(tau),
                        "gamma": list(gamma),
                        "j": [k + 1 for k in idx[npa:]],
                        "pa": pa,
                        "pa_state": [k + 1 for k in idx[:npa]],
                        "value": float(arr[idx]),
                    })
        return records

    @classmethod
    def from_records(cls, g: ChainGraph, records):
        models = component_models(g)
        values = {m.tau: {c: np.full(m.param_shapes[c], np.nan) for c in m.connected}
                  for m in models}
        for r in records:
            tau, gamma = tuple(r["component"]), tuple(r["gamma"])
            idx = tuple(k - 1 for k in r["pa_state"]) + tuple(k - 1 for k in r["j"])
            values[tau][gamma][idx] = r["value"]
        for tau, d in values.items():
            for gamma, arr in d.items():
                if np.isnan(arr).any():
                    raise TableError(f"missing Moebius parameters for {list(gamma)}")
        return cls(values)

    def vector(self, g: ChainGraph) -> np.ndarray:
        return np.concatenate([m.join(self.values[m.tau]) for m in component_models(g)])

    @classmethod
    def from_vector(cls, g: ChainGraph, theta):
        values = {}
        k = 0
        for m in component_models(g):
            values[m.tau] = m.split(theta[k:k + m.n_params])
            k += m.n_params
        return cls(values)


def component_models(g: ChainGraph, cap=DEFAULT_COMPONENT_CAP) -> list:
    dag = chain_components(g)
    models = []
    for tau in dag.components:
        pa, _ = dag_relations(dag, tau)
        models.append(ComponentModel(g, tau, pa, cap))
    return models


def assemble_joint(g: ChainGraph, conds: dict) -> JointTable:
    """Multiply conditional tables ``p(i_tau | i_pa_D(tau))`` into the joint table."""
    verts = list(g.vertices)
    probs = np.ones([g.d(v) for v in verts])
    dag = chain_components(g)
    for tau in dag.components:
        pa, _ = dag_relations(dag, tau)
        key = tuple(sorted(tau))
        arr = conds[key]
        axes = sorted(pa) + sorted(tau)
        both = sorted(axes)
        arr = np.transpose(arr, [axes.index(v) for v in both])
        shp = [g.d(v) if v in pa or v in tau else 1 for v in verts]
        probs = probs * arr.reshape(shp)
    return JointTable(tuple(verts), probs / probs.sum())


def to_joint(params: MoebiusParams, g: ChainGraph) -> JointTable:
    conds = {}
    for m in component_models(g):
        theta = m.join(params.values[m.tau])
        if np.any(theta <= 0) or np.any(theta >= 1):
            raise ParameterRegionError(f"Moebius parameters of component {list(m.tau)} "
                                       "must lie in (0, 1)", component=list(m.tau))
        conds[m.tau] = m.conditional(theta)
    return assemble_joint(g, conds)


def params_from_joint(p: JointTable, g: ChainGraph) -> MoebiusParams:
    values = {}
    for m in component_models(g):
        cond = conditional_array(p, m.tau, m.pa)
        values[m.tau] = m.split(m.params_from_conditional(cond))
    return MoebiusParams(values)


def model_dimension(g: ChainGraph, cap=DEFAULT_COMPONENT_CAP) -> int:
    total = 0
    for tau in chain_components(g).components:
        for c in connected_sets(g, tau, cap):
            free = int(np.prod([g.d(v) - 1 for v in c]))
            cond = int(np.prod([g.d(w) for w in parents(g, c)]))
            total += free * cond
    return total


def sample_model_point(g: ChainGraph, seed=0, max_rejections=DEFAULT_MAX_REJECTIONS):
    """Draw a strictly positive member of the type IV model; returns (params, joint)."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    values = {}
    conds = {}
    for m in component_models(g):
        theta, _ = m.random_point(rng, max_rejections=max_rejections)
        values[m.tau] = m.split(theta)
        conds[m.tau] = m.conditional(theta)
    return MoebiusParams(values), assemble_joint(g, conds)


def parametrization_jacobian(g: ChainGraph, theta, step=1e-6) -> np.ndarray:
    """Central-difference Jacobian of the joint cell probabilities in the parameters."""
    theta = np.asarray(theta, dtype=float)

    def joint(t):
        return to_joint(MoebiusParams.from_vector(g, t), g).vector()

    cols = []
    for k in range(theta.size):
        e = np.zeros_like(theta)
        e[k] = step
        cols.append((joint(theta + e) - joint(theta - e)) / (2 * step))
    return np.column_stack(cols)


def jacobian_rank(jac, rtol=1e-7) -> int:
    s = np.linalg.svd(jac, compute_uv=False)
    return int(np.sum(s > s[0] * rtol)) if s.size and s[0] > 0 else 0


# -- membership -----------------------------------------------------------------

@dataclass
class MembershipReport:
    factorization_residual: float
    products_residual: float
    invariance_residual: float
    tol: float
    constraints: list   # dicts: kind, component, set, blocks/free, residual, implied

    @property
    def factorization_ok(self) -> bool:
        return self.factorization_residual <= self.tol

    @property
    def products_ok(self) -> bool:
        return self.products_residual <= self.tol

    @property
    def invariance_ok(self) -> bool:
        return self.invariance_residual <= self.tol

    @property
    def member(self) -> bool:
        return self.factorization_ok and self.products_ok and self.invariance_ok

    def to_json(self):
        return {
            "member": self.member,
            "factorization_ok": self.factorization_ok,
            "products_ok": self.products_ok,
            "invariance_ok": self.invariance_ok,
            "residuals": {
                "factorization": self.factorization_residual,
                "products": self.products_residual,
                "invariance": self.invariance_residual,
            },
            "tol": self.tol,
            "constraints": self.constraints,
        }


def check_theorem8(p: JointTable, g: ChainGraph, tol=1e-9) -> MembershipReport:
    """Membership in the type IV model via the Moebius characterization.

    Checks the DAG factorization over chain components, the product
    constraints for disconnected sets, and invariance of each set's
    parameters across parent-component states that agree on the set's own
    parents. Invariance rows for disconnected sets are implied by the other
    two kinds and are reported with ``implied=True``.
    """
    if not p.positive:
        raise TableError("membership check needs a strictly positive table")
    if set(p.vertices) != set(g.vertices):
        raise TableError("table and graph have different vertex sets")
    dag = chain_components(g)
    conds = {}
    constraints = []
    prod_res = 0.0
    inv_res = 0.0
    for tau in dag.components:
        pa, _ = dag_relations(dag, tau)
        tau_s, pa_s = tuple(sorted(tau)), tuple(sorted(pa))
        cond = conditional_array(p, tau, pa)
        conds[tau_s] = cond
        cum = cumulate(cond, len(tau_s))
        lead = len(pa_s)
        for sigma in subsets_in_order(tau):
            blocks = maximal_connected_partition(g, sigma)
            q_sigma = cum[_sigma_index(tau_s, sigma, lead)]
            if len(blocks) > 1:
                prod = np.ones_like(q_sigma)
                ssorted = sorted(sigma)
                for b in blocks:
                    qb = cum[_sigma_index(tau_s, b, lead)]
                    shp = list(qb.shape[:lead]) + [g.d(v) - 1 if v in b else 1 for v in ssorted]
                    prod = prod * qb.reshape(shp)
                r = float(np.max(np.abs(q_sigma - prod)))
                prod_res = max(prod_res, r)
                constraints.append({"kind": "ii", "component": list(tau_s), "set": ssorted,
                                    "blocks": [sorted(b) for b in blocks], "residual": r,
                                    "implied": False})
            own_pa = parents(g, sigma)
            free = [k for k, w in enumerate(pa_s) if w not in own_pa]
            if free:
                spread = np.ptp(q_sigma, axis=tuple(free))
                r = float(np.max(spread))
                if len(blocks) == 1:
                    inv_res = max(inv_res, r)
                constraints.append({"kind": "iii", "component": list(tau_s), "set": sorted(sigma),
                                    "across": [pa_s[k] for k in free], "residual": r,
                                    "implied": len(blocks) > 1})
    rebuilt = assemble_joint(g, conds)
    fact_res = float(np.max(np.abs(rebuilt.probs - p.probs)))
    return MembershipReport(fact_res, prod_res, inv_res, tol, constraints)
