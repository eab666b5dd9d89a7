"""Maximum-likelihood fitting of type IV chain graph models.

The log-likelihood splits into one term per chain component, and the
Moebius parameters of different components are variation independent, so
each component is maximized on its own over its free Moebius parameters.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import FitError, TableError
from .graph import ChainGraph, chain_components, dag_relations, is_complete
from .moebius import ComponentModel, MoebiusParams, assemble_joint, component_models, model_dimension
from .tables import CountTable, JointTable, conditional_array

log = logging.getLogger(__name__)


@dataclass
class FitOptions:
    starts: int = 5
    seed: int = 0
    max_iter: int = 10_000
    gtol: float = 1e-8
    ftol: float = 1e-12
    threads: int = 1
    use_closed_form: bool = True

    def __post_init__(self):
        if self.starts < 1:
            raise ValueError("starts must be at least 1")
        if self.gtol <= 0 or self.ftol <= 0:
            raise ValueError("tolerances must be positive")


@dataclass
class ComponentFit:
    component: tuple
    theta: np.ndarray
    conditional: np.ndarray
    loglik: float
    converged: bool
    iterations: int
    final_gradient_norm: float
    starts_used: int
    loglik_spread: float
    closed_form: bool = False
    boundary: bool = False
    start_logliks: list = field(default_factory=list)
    zero_margin_states: list = field(default_factory=list)

    def to_json(self):
        return {
            "component": list(self.component),
            "closed_form": self.closed_form,
            "boundary": self.boundary,
            "converged": self.converged,
            "iterations": self.iterations,
            "final_gradient_norm": self.final_gradient_norm,
            "starts_used": self.starts_used,
            "loglik": self.loglik,
            "loglik_spread": self.loglik_spread,
            "zero_margin_states": self.zero_margin_states,
        }


@dataclass
class FitResult:
    p_hat: JointTable
    q_hat: MoebiusParams
    loglik: float
    dim: int
    bic: float
    n: int
    per_component: list

    def to_json(self, g: ChainGraph):
        return {
            "loglik": self.loglik,
            "dim": self.dim,
            "bic": self.bic,
            "n": self.n,
            "vertices": list(self.p_hat.vertices),
            "p_hat": [float(x) for x in self.p_hat.vector()],
            "q_hat": self.q_hat.to_records(g),
            "per_component": [c.to_json() for c in self.per_component],
        }


# -- likelihood -------------------------------------------------------------------

def loglik(p: JointTable, counts: CountTable) -> float:
    """``sum_i n(i) log p(i)``; ``-inf`` (with a warning) if a counted cell has p = 0."""
    if tuple(p.vertices) != tuple(counts.vertices) or p.probs.shape != counts.counts.shape:
        raise TableError("table and counts disagree on vertices or levels")
    n = counts.counts
    pos = n > 0
    if np.any(p.probs[pos] <= 0):
        cell = np.argwhere(pos & (p.probs <= 0))[0]
        log.warning("zero probability at observed cell %s", [int(k) + 1 for k in cell])
        return -math.inf
    return float(np.sum(n[pos] * np.log(p.probs[pos])))


def component_counts(counts: CountTable, tau, pa) -> np.ndarray:
    """``n(i_tau, i_pa)`` with axes (sorted pa..., sorted tau...)."""
    both = sorted(set(tau) | set(pa))
    arr = counts.marginal_counts(both)
    order = [both.index(v) for v in sorted(pa)] + [both.index(v) for v in sorted(tau)]
    return np.transpose(arr, order).astype(float)


def component_logliks(p: JointTable, counts: CountTable, g: ChainGraph) -> dict:
    """Per-component terms ``sum n(i_tau, i_pa) log p(i_tau | i_pa)``."""
    dag = chain_components(g)
    out = {}
    for tau in dag.components:
        pa, _ = dag_relations(dag, tau)
        n = component_counts(counts, tau, pa)
        cond = conditional_array(p, tau, pa)
        pos = n > 0
        out[tuple(sorted(tau))] = float(np.sum(n[pos] * np.log(cond[pos])))
    return out


# -- optimizer --------------------------------------------------------------------

def _hessian(model, theta, counts, grad0, step=1e-7):
    k = theta.size
    hess = np.empty((k, k))
    # near the boundary the step must stay small against the smallest cell
    pmin = float(np.min(model.conditional(theta, check=False)))
    scale = min(1.0, 1e-3 * pmin / step) if pmin > 0 else 1.0
    for a in range(k):
        h = step * max(1.0, abs(theta[a])) * scale
        e = np.zeros(k)
        e[a] = h
        tp, tm = theta + e, theta - e
        if model.feasible(tp) and model.feasible(tm):
            col = (model.gradient(tp, counts) - model.gradient(tm, counts)) / (2 * h)
        elif model.feasible(tp):
            col = (model.gradient(tp, counts) - grad0) / h
        else:
            col = (grad0 - model.gradient(tm, counts)) / h
        hess[:, a] = col
    return 0.5 * (hess + hess.T)


def _ascent_direction(hess, grad):
    # Newton direction on the concave part; eigenvalues of -H are floored so
    # the step is always an ascent direction.
    w, vecs = np.linalg.eigh(-hess)
    scale = max(np.max(np.abs(w)), 1e-300)
    w = np.maximum(w, 1e-10 * scale)
    return vecs @ ((vecs.T @ grad) / w)


def maximize_component(model: ComponentModel, counts, theta0, max_iter=10_000,
                       gtol=1e-8, ftol=1e-12):
    """Damped Newton ascent on the component log-likelihood, staying strictly feasible.

    Returns ``(theta, loglik, converged, iterations, grad_norm)``.
    """
    theta = np.array(theta0, dtype=float)
    if not model.feasible(theta):
        raise FitError("starting point is outside the parameter region",
                       component=list(model.tau))
    f = model.loglik(theta, counts)
    grad = model.gradient(theta, counts)
    gnorm = float(np.linalg.norm(grad))
    stalled = 0
    for it in range(1, max_iter + 1):
        if gnorm < gtol:
            return theta, f, True, it - 1, gnorm
        hess = _hessian(model, theta, counts, grad)
        if np.all(np.isfinite(hess)):
            d = _ascent_direction(hess, grad)
        else:
            d = grad / max(gnorm, 1.0)
        slope = float(grad @ d)
        # slope / 2 is the Newton prediction of the remaining gain; once it is
        # below ftol (relative) the realized changes are just rounding noise
        if slope <= 2 * ftol * max(1.0, abs(f)):
            # one last full step costs nothing and makes the gap quadratic
            cand = theta + d
            if model.feasible(cand):
                fc = model.loglik(cand, counts)
                if fc >= f:
                    theta, f = cand, fc
                    gnorm = float(np.linalg.norm(model.gradient(theta, counts)))
            return theta, f, True, it, gnorm
        t = 1.0
        accepted = False
        for _ in range(80):
            cand = theta + t * d
            if model.feasible(cand):
                fc = model.loglik(cand, counts)
                if fc >= f + 1e-4 * t * slope:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            # no progress possible along d at machine precision
            return theta, f, gnorm < gtol * 1e3, it, gnorm
        change = fc - f
        theta, f = cand, fc
        grad = model.gradient(theta, counts)
        gnorm = float(np.linalg.norm(grad))
        small = abs(change) <= ftol * max(1.0, abs(f))
        stalled = stalled + 1 if small else 0
        # a tiny change after a damped step may just be a short step, so those
        # only count once they repeat
        if gnorm < gtol or (small and t == 1.0) or stalled >= 5:
            return theta, f, True, it, gnorm
    return theta, f, False, max_iter, gnorm


BARRIER_LADDER = tuple(10.0 ** -k for k in range(0, 11))


def maximize_with_barrier(model: ComponentModel, counts, theta0, max_iter=10_000,
                          gtol=1e-8, ftol=1e-12):
    """Maximization when observed parent states have empty cells.

    The supremum then lies on the boundary of the parameter region, where
    plain Newton steps stall. Adding a pseudo-count ``mu`` to every cell of
    the observed parent states is a log-barrier; it is driven to zero along
    ``BARRIER_LADDER`` with warm starts, and the last point is scored with
    the true counts.
    """
    axes = tuple(range(len(model.pa), counts.ndim))
    observed = counts.sum(axis=axes, keepdims=True) > 0
    theta = np.array(theta0, dtype=float)
    ok_all, iters = True, 0
    for mu in BARRIER_LADDER:
        theta, _, ok, it, _ = maximize_component(model, counts + mu * observed, theta,
                                                 max_iter, gtol, ftol)
        ok_all &= ok
        iters += it
    f = model.loglik(theta, counts)
    gnorm = float(np.linalg.norm(model.gradient(theta, counts)))
    return theta, f, ok_all, iters, gnorm


def closed_form_components(g: ChainGraph) -> list:
    """Components whose MLE is an empirical (conditional) proportion."""
    dag = chain_components(g)
    out = []
    for tau in dag.components:
        pa, _ = dag_relations(dag, tau)
        if len(tau) == 1 or (not pa and is_complete(g, tau)):
            out.append(tuple(sorted(tau)))
    return out


def singleton_conditional(model: ComponentModel, n: np.ndarray):
    """Empirical p(i_v | i_pa_G(v)) spread over the parent-component states.

    A singleton depends only on its own parents, so parent-component vertices
    outside pa_G(v) are summed out first (the two coincide when pa_G = pa_D).
    """
    (v,) = model.tau
    own = set(model.pa_g[(v,)])
    drop = tuple(k for k, w in enumerate(model.pa) if w not in own)
    pooled = n.sum(axis=drop, keepdims=True) if drop else n
    return np.broadcast_to(empirical_conditional(pooled, 1), n.shape).copy()


def empirical_conditional(n: np.ndarray, n_tau: int):
    """Empirical conditional proportions; zero-margin parent states get the uniform table."""
    axes = tuple(range(n.ndim - n_tau, n.ndim))
    margin = n.sum(axis=axes, keepdims=True)
    size = int(np.prod(n.shape[n.ndim - n_tau:]))
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = np.where(margin > 0, n / np.where(margin > 0, margin, 1), 1.0 / size)
    return cond


def _zero_margins(model, n):
    if not model.pa:
        return []
    axes = tuple(range(len(model.pa), n.ndim))
    margin = n.sum(axis=axes)
    return [dict(zip(model.pa, [int(k) + 1 for k in idx]))
            for idx in np.argwhere(margin == 0)]


def fit_component(g: ChainGraph, tau, counts: CountTable, options: FitOptions | None = None,
                  model: ComponentModel | None = None, closed_form: bool | None = None,
                  seed_offset: int = 0) -> ComponentFit:
    options = options or FitOptions()
    if model is None:
        model = ComponentModel(g, tau)
    n = component_counts(counts, model.tau, model.pa)
    zero = _zero_margins(model, n)
    if closed_form is None:
        closed_form = options.use_closed_form and model.tau in closed_form_components(g)
    if closed_form:
        if model.n_tau == 1:
            cond = singleton_conditional(model, n)
        else:
            cond = empirical_conditional(n, model.n_tau)
        pos = n > 0
        ll = float(np.sum(n[pos] * np.log(cond[pos])))
        theta = model.params_from_conditional(cond)
        return ComponentFit(model.tau, theta, cond, ll, True, 0, 0.0, 0, 0.0,
                            closed_form=True, start_logliks=[ll], zero_margin_states=zero)

    rng = np.random.default_rng([options.seed, seed_offset])
    starts = [model.independence_point()]
    for _ in range(options.starts - 1):
        starts.append(model.random_point(rng)[0])
    axes = tuple(range(len(model.pa), n.ndim))
    boundary = bool(np.any((n == 0) & (n.sum(axis=axes, keepdims=True) > 0)))
    solver = maximize_with_barrier if boundary else maximize_component
    runs = []
    for k, t0 in enumerate(starts):
        theta, f, ok, iters, gnorm = solver(model, n, t0, options.max_iter,
                                            options.gtol, options.ftol)
        runs.append((f, k, theta, ok, iters, gnorm))
    best = max(runs, key=lambda r: (r[0], -r[1]))
    lls = [r[0] for r in runs]
    f, k, theta, ok, iters, gnorm = best
    spread = max(lls) - min(lls)
    if spread > 1e-6 * max(1.0, abs(f)):
        log.info("component %s: multistart log-likelihoods differ by %.3g", model.tau, spread)
    if not ok:
        log.warning("component %s: optimizer did not converge (gradient norm %.3g)",
                    model.tau, gnorm)
    if boundary:
        log.info("component %s: empty cells, the supremum is approached on the boundary",
                 model.tau)
    cond = model.conditional(theta)
    return ComponentFit(model.tau, theta, cond, f, ok, iters, gnorm, len(starts), spread,
                        boundary=boundary, start_logliks=lls, zero_margin_states=zero)


def fit(g: ChainGraph, counts: CountTable, options: FitOptions | None = None) -> FitResult:
    options = options or FitOptions()
    if tuple(counts.vertices) != tuple(g.vertices):
        raise TableError("counts and graph have different vertex sets")
    for v, d in counts.levels.items():
        if g.d(v) != d:
            raise TableError(f"vertex {v}: graph declares {g.d(v)} levels, counts have {d}")
    models = component_models(g)

    def run(k):
        return fit_component(g, models[k].tau, counts, options, model=models[k], seed_offset=k)

    if options.threads > 1:
        with ThreadPoolExecutor(max_workers=options.threads) as pool:
            fits = list(pool.map(run, range(len(models))))
    else:
        fits = [run(k) for k in range(len(models))]
    p_hat = assemble_joint(g, {f.component: f.conditional for f in fits})
    q_hat = MoebiusParams({m.tau: m.split(f.theta) for m, f in zip(models, fits)})
    ll = loglik(p_hat, counts)
    dim = model_dimension(g)
    bic = -2 * ll + dim * math.log(counts.n) if counts.n > 0 else math.nan
    return FitResult(p_hat, q_hat, ll, dim, bic, counts.n, fits)


@dataclass
class LrtResult:
    statistic: float
    df: int
    diagnostic: str | None = None

    def to_json(self):
        return {"statistic": self.statistic, "df": self.df, "diagnostic": self.diagnostic}


def lrt(null_fit: FitResult, alt_fit: FitResult, tol=1e-8) -> LrtResult:
    """Likelihood-ratio statistic for nested models (nesting is the caller's claim)."""
    stat = 2.0 * (alt_fit.loglik - null_fit.loglik)
    diag = None
    if stat < -tol * max(1.0, abs(alt_fit.loglik)):
        diag = ("negative likelihood-ratio statistic: the alternative fit is worse than the "
                "null fit, which signals an optimization failure or non-nested models")
        log.warning(diag)
    return LrtResult(stat, alt_fit.dim - null_fit.dim, diag)
