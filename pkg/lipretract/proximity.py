# -*- coding: utf-8 -*-

"""
Nearest point maps onto convex compacta.

Euclidean models are solved by away-step Frank-Wolfe over the vertices
returned by the diamond oracle, with an exact multiplier projection as
cross check. Other norms go through a subgradient method with gauge
scaling and a simplex polish. The renorming
|||x||| = sqrt(||x||^2 + sum_n (f_n(x) / 2^n)^2) and the probes for
rotundity and uniform continuity live here as well.

Probe verdicts come from falsifier searches. A probe that finds no
witness is evidence, never a proof.
"""

import logging
import math

import numpy as np
from scipy.optimize import brentq
from scipy.optimize import minimize

from lipretract import core
from lipretract.core import DEFAULT_SCALES
from lipretract.core import PairSampler
from lipretract.core import Point
from lipretract.exceptions import PreconditionError
from lipretract.smallness import grid_points

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-9

FW_TOL = 1e-12

GAP_PASS = 1e-8
"""
Largest Frank-Wolfe duality gap of a result that counts as solved.
General solver results carry no gap, their simplex spread is not
compared against this value
"""

UNIQUE_TOL = 1e-6
"""
Multi-start dispersion above which a nearest point is reported
as non-unique
"""

GRID_LIMIT = 5 * 10 ** 7

PROBE_NOTE = ('falsifier search: a missing witness is evidence, '
              'not proof')


def _unwrap(space, x):
    if isinstance(x, Point):
        return space.as_array(x.coeffs)
    return space.as_array(x)


def lmo_diamond(g, compact):
    """
    Linear minimization oracle of a diamond: a vertex y of K minimizing
    <g, y>. The block k with the largest r_k ||g_k||_* wins, ties go to
    the first such block, and the vertex is -r_k times a norming point
    of the block unit ball.

    :param g: functional as a :py:class:`lipretract.core.Point` or array
    :param compact: the diamond
    :type compact: :py:class:`lipretract.diamond.DiamondCompact`
    :return: (vertex, flagged), flagged is True for a zero functional
             and the vertex is then 0
    :rtype: tuple
    """
    space = compact.space
    arr = _unwrap(space, g)
    vertex = np.zeros(space.dim)
    flagged = not np.any(arr)
    if flagged:
        logger.warning('Zero functional passed to the diamond oracle')
    else:
        best = None
        best_score = -1.0
        for k in range(1, compact.depth + 1):
            value, point = space.block_support(arr[space.block_slice(k)], k)
            score = compact.radii[k - 1] * value
            if score > best_score:
                best, best_score, best_point = k, score, point
        vertex[space.block_slice(best)] = (-compact.radii[best - 1] *
                                           best_point)
    if isinstance(g, Point):
        return Point(space, vertex), flagged
    return vertex, flagged


class NearestPointResult(object):
    """
    Outcome of a nearest point solver
    """

    def __init__(self, point, distance, iterations, gap,
                 note='unique', converged=True, solver='fw', spread=None):
        """
        Constructor

        :param point: the argmin found, inside K
        :param distance: distance from the query to `point`
        :param iterations: iterations spent
        :param gap: Frank-Wolfe duality gap, comparable to GAP_PASS.
                    Zero for exact projections, None for the general
                    solver which has no duality gap
        :param note: 'unique' or 'non-unique'
        :param converged: False when the budget ran out first
        :param solver: 'fw', 'exact' or 'general'
        :param spread: spread of the final Nelder-Mead simplex values
                       of the general solver, a stopping measure only
                       and not a bound on the distance error
        """
        self.point = point
        self.distance = float(distance)
        self.iterations = int(iterations)
        self.gap = None if gap is None else float(gap)
        self.note = note
        self.converged = bool(converged)
        self.solver = solver
        self.spread = None if spread is None else float(spread)

    def to_dict(self):
        return {'point': np.asarray(self.point).tolist(),
                'distance': self.distance,
                'iterations': self.iterations,
                'gap': self.gap,
                'spread': self.spread,
                'note': self.note,
                'converged': self.converged,
                'solver': self.solver}


def _check_euclidean(space, name):
    if not space.is_euclidean:
        raise PreconditionError(name + ' needs the Euclidean model, '
                                'use nearest_point_general for '
                                'other norms')


def _find_vertex(active, v):
    for i, a in enumerate(active):
        if np.array_equal(a, v):
            return i
    return None


def _polish(x, active, weights, current):
    """
    Affine least squares over the active face. Vertices with negative
    multipliers are dropped one at a time, the candidate is accepted
    only if it does not increase the objective.
    """
    verts = np.array([a for a, w in zip(active, weights) if w > 1e-12])
    target = float(np.sum((current - x) ** 2))
    while len(verts) > 0:
        k = len(verts)
        kkt = np.zeros((k + 1, k + 1))
        kkt[:k, :k] = verts @ verts.T
        kkt[:k, k] = 1.0
        kkt[k, :k] = 1.0
        rhs = np.append(verts @ x, 1.0)
        lam = np.linalg.lstsq(kkt, rhs, rcond=None)[0][:k]
        if lam.min() >= -1e-13:
            lam = np.clip(lam, 0.0, None)
            lam = lam / lam.sum()
            cand = lam @ verts
            if float(np.sum((cand - x) ** 2)) <= target:
                return cand
            return None
        verts = np.delete(verts, int(np.argmin(lam)), axis=0)
    return None


def nearest_point_fw(x, compact, iters=1000, tol=FW_TOL):
    """
    Euclidean nearest point of `x` in the diamond by away-step
    Frank-Wolfe on 1/2 ||x - y||^2 with exact line search, finished
    by a fully corrective polish on the active face.

    :param x: query point
    :param compact: diamond in a Euclidean block space
    :param iters: iteration budget, at least 1
    :param tol: duality gap at which iterations stop
    :raises PreconditionError: for non-Euclidean ambient norms
    :rtype: :py:class:`NearestPointResult`
    """
    space = compact.space
    _check_euclidean(space, 'Frank-Wolfe')
    if iters < 1:
        raise PreconditionError('iters must be at least 1')
    x = _unwrap(space, x)
    if compact.gauge(x) <= 1.0:
        return NearestPointResult(x.copy(), 0.0, 0, 0.0)

    first, _ = lmo_diamond(-x, compact)
    active = [first]
    weights = [1.0]
    y = first.copy()
    gap = np.inf
    count = 0
    for count in range(1, iters + 1):
        grad = y - x
        v, _ = lmo_diamond(grad, compact)
        gap = float(grad @ (y - v))
        if gap <= tol:
            break
        scores = [float(grad @ a) for a in active]
        away = int(np.argmax(scores))
        if gap >= scores[away] - float(grad @ y):
            d = v - y
            limit = 1.0
            toward = True
        else:
            d = y - active[away]
            w = weights[away]
            limit = w / (1.0 - w) if w < 1.0 else np.inf
            toward = False
        length = float(d @ d)
        if length == 0.0:
            break
        gamma = min(max(-float(grad @ d) / length, 0.0), limit)
        if toward:
            if gamma >= 1.0:
                active, weights = [v], [1.0]
            else:
                weights = [w * (1.0 - gamma) for w in weights]
                idx = _find_vertex(active, v)
                if idx is None:
                    active.append(v)
                    weights.append(gamma)
                else:
                    weights[idx] += gamma
        else:
            weights = [w * (1.0 + gamma) for w in weights]
            if gamma >= limit:
                del active[away]
                del weights[away]
            else:
                weights[away] -= gamma
        y = np.dot(weights, np.array(active))

    polished = _polish(x, active, weights, y)
    if polished is not None:
        v, _ = lmo_diamond(polished - x, compact)
        y = polished
        gap = max(float((polished - x) @ (polished - v)), 0.0)
    converged = gap <= GAP_PASS
    if not converged:
        logger.info('Frank-Wolfe stopped with gap ' + str(gap) +
                    ' after ' + str(count) + ' iterations')
    return NearestPointResult(y, np.linalg.norm(x - y), count, gap,
                              converged=converged)


def project_euclidean_diamond(x, compact):
    """
    Exact Euclidean projection onto a diamond. Block norms shrink to
    max(0, ||x_i|| - lambda / r_i) with the multiplier lambda solving
    sum max(0, ||x_i|| - lambda / r_i) / r_i = 1.

    :raises PreconditionError: for non-Euclidean ambient norms
    :rtype: :py:class:`numpy.ndarray`
    """
    space = compact.space
    _check_euclidean(space, 'Exact projection')
    x = _unwrap(space, x)
    if compact.gauge(x) <= 1.0:
        return x.copy()
    norms = space.block_norms(x)
    radii = compact.radii

    def excess(lam):
        return float(np.sum(np.maximum(0.0, norms - lam / radii) /
                            radii)) - 1.0

    lam = brentq(excess, 0.0, float(np.max(norms * radii)), xtol=1e-15)
    kept = np.maximum(0.0, norms - lam / radii)
    safe = np.where(norms > 0, norms, 1.0)
    scale = np.where(norms > 0, kept / safe, 0.0)
    return x * scale[space.block_index]


def minkowski_retraction(gauge):
    """
    The map y -> y / max(1, gauge(y)), which fixes the set
    {gauge <= 1}

    :param gauge: callable on row batches
    """
    def retraction(y):
        y = np.asarray(y, dtype=float)
        return y / np.maximum(1.0, np.asarray(gauge(y)))[..., None]

    return retraction


def _scale_into(compact, z):
    return z / max(1.0, float(compact.gauge(z)))


def _numeric_gradient(func, y, step=1e-7):
    grad = np.empty(len(y))
    for i in range(len(y)):
        e = np.zeros(len(y))
        e[i] = step
        grad[i] = (func(y + e) - func(y - e)) / (2.0 * step)
    return grad


def _descend(x, compact, norm, start, iters):
    """
    One start of the general solver: projected subgradient steps with
    diminishing length, then Nelder-Mead on z -> ||x - z/max(1, g(z))||
    """
    def dist(y):
        return float(norm(x - y))

    y = _scale_into(compact, start)
    best, best_val = y, dist(y)
    step = 0.5 * best_val
    count = 0
    for count in range(1, iters + 1):
        grad = _numeric_gradient(dist, y)
        length = float(np.linalg.norm(grad))
        if length == 0.0:
            break
        y = _scale_into(compact, y - step / math.sqrt(count) * grad / length)
        val = dist(y)
        if val < best_val:
            best, best_val = y, val

    res = minimize(lambda z: dist(_scale_into(compact, z)), best,
                   method='Nelder-Mead',
                   options={'xatol': 1e-12, 'fatol': 1e-15,
                            'maxiter': 400 * len(x)})
    point = _scale_into(compact, res.x)
    val = dist(point)
    if val > best_val:
        point, val = best, best_val
    spread = float(np.ptp(res.final_simplex[1]))
    return point, val, count + int(res.nit), spread, bool(res.success)


def nearest_point_general(x, compact, norm=None, starts=3, iters=200,
                          seed=0, workers=1):
    """
    Nearest point of `x` in a compact under an arbitrary norm.

    Every start runs projected subgradient descent with gauge scaling
    as the feasibility projection, then a Nelder-Mead polish. The first
    start is the gauge scaling of `x`, the others are random points of
    the compact. The best start wins. When near-optimal starts disagree
    by more than UNIQUE_TOL the result is marked non-unique.

    :param norm: callable on rows, defaults to the ambient norm
    :param starts: number of starts
    :param iters: subgradient steps per start
    :param workers: threads running the starts
    :rtype: :py:class:`NearestPointResult`
    """
    space = compact.space
    norm = norm or space.norm
    x = _unwrap(space, x)
    if compact.gauge(x) <= 1.0:
        return NearestPointResult(x.copy(), 0.0, 0, None, solver='general',
                                  spread=0.0)
    if starts < 1:
        raise PreconditionError('starts must be at least 1')
    rng = np.random.default_rng(seed)
    inits = [x] + list(compact.sample_inside(rng, starts - 1))
    tasks = [(x, compact, norm, y0, iters) for y0 in inits]
    outcomes = core.run_chunks(_descend, tasks, workers=workers)
    best = min(outcomes, key=lambda o: o[1])
    close = [o[0] for o in outcomes
             if o[1] <= best[1] + 1e-9 * (1.0 + best[1])]
    dispersion = max(float(norm(p - best[0])) for p in close)
    note = 'unique'
    if dispersion > UNIQUE_TOL:
        note = 'non-unique'
        logger.warning('Nearest point is not unique, multi-start '
                       'dispersion ' + str(dispersion))
    if not best[4]:
        logger.info('General solver stopped on its iteration budget')
    return NearestPointResult(best[0], best[1],
                              sum(o[2] for o in outcomes), None,
                              note=note, converged=best[4],
                              solver='general', spread=best[3])


def grid_oracle(compact, norm=None, resolution=1e-3):
    """
    Brute force nearest point over the grid points of the compact,
    the oracle for solvers in dims <= 3.

    The grid is built once and the returned callable maps a query x
    to (point, distance). Rounding every coordinate of a nearest
    point toward zero lands on a grid point of K, so in Euclidean
    models the oracle distance exceeds the true one by at most
    sqrt(dim) * resolution.

    :raises PreconditionError: above three dims or for grids that are
                               too fine
    """
    space = compact.space
    if space.dim > 3:
        raise PreconditionError('Grid oracles are limited to 3 dims')
    bounds = compact.coordinate_bounds()
    sizes = [2 * math.ceil(1.1 * b / resolution) + 1 for b in bounds]
    if np.prod(sizes, dtype=float) > GRID_LIMIT:
        raise PreconditionError('Grid of ' + str(sizes) +
                                ' points is too fine')
    norm = norm or space.norm
    pts = grid_points(bounds, resolution)
    pts = pts[compact.contains(pts)]
    logger.debug('Grid oracle over ' + str(pts.shape[0]) + ' points')

    def nearest(x):
        dists = norm(_unwrap(space, x) - pts)
        best = int(np.argmin(dists))
        return pts[best], float(dists[best])

    return nearest


def grid_nearest_point(x, compact, norm=None, resolution=1e-3):
    """
    Single query form of :py:func:`grid_oracle`

    :return: (point, distance)
    """
    return grid_oracle(compact, norm=norm, resolution=resolution)(x)


def nearest_point_map(compact, solver='fw', norm=None, **options):
    """
    The nearest point map as a function of row batches

    :param solver: 'fw', 'exact' or 'general'
    :param options: passed on to the solver
    """
    if solver == 'fw':
        def single(row):
            return nearest_point_fw(row, compact, **options).point
    elif solver == 'exact':
        def single(row):
            return project_euclidean_diamond(row, compact)
    elif solver == 'general':
        def single(row):
            return nearest_point_general(row, compact, norm=norm,
                                         **options).point
    else:
        raise PreconditionError('Unknown solver: ' + str(solver))
    return core.rowwise(single)


def uniform_retraction(compact, proximity, rho=1.0):
    """
    Radial retraction onto rho B_X followed by a nearest point map,
    a uniformly continuous retraction of the whole space onto K

    :param proximity: nearest point map on row batches
    :raises PreconditionError: unless K lies in rho B_X
    """
    if not compact.radii[0] <= rho:
        raise PreconditionError('K must lie in the ball of radius ' +
                                str(rho))
    space = compact.space

    def retraction(x):
        return proximity(space.radial_projection(x, rho))

    return retraction


class UREDNorm(object):
    """
    Equivalent norm |||x||| = sqrt(||x||^2 + ||Tx||_2^2) with
    Tx = (w_n f_n(x)) and weights w_n = 2^-n. It is uniformly rotund in
    every direction whenever the functionals separate points.
    """

    def __init__(self, space, functionals, weights=None):
        """
        Constructor

        :param space: base block space
        :type space: :py:class:`lipretract.core.BlockSpace`
        :param functionals: array of shape (count, dim), each of dual
                            norm one
        :param weights: defaults to 2^-n
        :raises PreconditionError: if the table does not separate
                                   points or a functional is not of
                                   norm one
        """
        table = np.atleast_2d(np.asarray(functionals, dtype=float))
        if table.shape[1] != space.dim:
            raise PreconditionError('Functionals need ' + str(space.dim) +
                                    ' coefficients')
        if np.linalg.matrix_rank(table) < space.dim:
            raise PreconditionError('Functional table does not separate '
                                    'points of the span')
        for f in table:
            size = space.dual_norm(f)
            if abs(size - 1.0) > 1e-9:
                raise PreconditionError('Functionals must have dual norm '
                                        'one, got ' + str(size))
        if weights is None:
            weights = 2.0 ** -np.arange(1, table.shape[0] + 1, dtype=float)
        self._space = space
        self._table = table
        self._weights = np.asarray(weights, dtype=float)
        self.constant = math.sqrt(1.0 + float(np.sum(self._weights ** 2)))

    @property
    def space(self):
        return self._space

    @property
    def functionals(self):
        return self._table

    def transform(self, x):
        """
        Tx = (w_n f_n(x))
        """
        return (self._space.as_array(x) @ self._table.T) * self._weights

    def norm(self, x):
        """
        |||x||| for a single vector or row batch
        """
        x = self._space.as_array(x)
        base = self._space.norm(x)
        extra = np.sum(self.transform(x) ** 2, axis=-1)
        return np.sqrt(base * base + extra)

    __call__ = norm

    def sandwich_violation(self, samples=1000, seed=0):
        """
        Largest violation of ||x|| <= |||x||| <= C ||x|| over sampled x,
        zero or negative when the sandwich holds
        """
        rng = np.random.default_rng(seed)
        x = rng.standard_normal(size=(samples, self._space.dim))
        base = self._space.norm(x)
        value = self.norm(x)
        return float(max(np.max(base - value),
                         np.max(value - self.constant * base * (1 + 1e-12))))

    def to_dict(self):
        return {'functionals': self._table.tolist(),
                'weights': self._weights.tolist(),
                'constant': self.constant}


def ured_renorm(space, functionals=None, depth=None):
    """
    Builds the renorming of `space`

    :param functionals: table of norm one functionals, defaults to the
                        coordinate functionals scaled to dual norm one
    :param depth: number of functionals of the table to use
    :rtype: :py:class:`UREDNorm`
    """
    if functionals is None:
        functionals = np.eye(space.dim)
        sizes = [space.dual_norm(f) for f in functionals]
        functionals = functionals / np.array(sizes)[:, None]
    table = np.atleast_2d(np.asarray(functionals, dtype=float))
    if depth is not None:
        table = table[:depth]
    return UREDNorm(space, table)


class RotundityReport(object):
    """
    Worst witness found by :py:func:`rotundity_probe`
    """

    def __init__(self, found, gap, x, y, midpoint_norm, eta, samples):
        self.found = bool(found)
        self.gap = float(gap)
        self.x = x
        self.y = y
        self.midpoint_norm = float(midpoint_norm)
        self.eta = eta
        self.samples = samples
        self.note = PROBE_NOTE

    def to_dict(self):
        return {'found': self.found, 'gap': self.gap,
                'x': None if self.x is None else self.x.tolist(),
                'y': None if self.y is None else self.y.tolist(),
                'midpoint_norm': self.midpoint_norm, 'eta': self.eta,
                'samples': self.samples, 'note': self.note}


def rotundity_probe(norm, z, samples=2000, eta=1e-4, seed=0,
                    min_gap=0.1, steps=60):
    """
    Searches unit pairs x, y = x - s z with ||(x + y)/2|| >= 1 - eta and
    ||x - y|| >= min_gap. For every sampled unit x the largest s keeping
    y in the unit ball is found by bisection, for both signs of z.

    :param norm: callable on row batches
    :param z: direction of norm one
    :raises PreconditionError: if ||z|| differs from one or eta <= 0
    :rtype: :py:class:`RotundityReport`
    """
    z = np.asarray(z, dtype=float)
    size = float(norm(z))
    if abs(size - 1.0) > 1e-9:
        raise PreconditionError('Direction must have norm one, got ' +
                                str(size))
    if not eta > 0:
        raise PreconditionError('eta must be positive')
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal(size=(samples, len(z)))
    lengths = np.asarray(norm(gauss), dtype=float)
    lengths[lengths == 0.0] = 1.0
    x = gauss / lengths[:, None]

    best = RotundityReport(False, 0.0, None, None, 0.0, eta, samples)
    for sign in (1.0, -1.0):
        lo = np.zeros(samples)
        hi = np.full(samples, 2.0 + 1e-9)
        for _ in range(steps):
            mid = 0.5 * (lo + hi)
            inside = norm(x - sign * mid[:, None] * z) <= 1.0 + 1e-12
            lo = np.where(inside, mid, lo)
            hi = np.where(inside, hi, mid)
        y = x - sign * lo[:, None] * z
        mids = norm(0.5 * (x + y))
        valid = (mids >= 1.0 - eta) & (lo >= min_gap)
        if valid.any():
            pick = int(np.argmax(np.where(valid, lo, -1.0)))
            if lo[pick] > best.gap:
                best = RotundityReport(True, lo[pick], x[pick], y[pick],
                                       mids[pick], eta, samples)
    logger.debug('Rotundity probe gap ' + str(best.gap))
    return best


class ContinuityReport(object):
    """
    Sampled modulus of a nearest point map with the probe verdict
    """

    def __init__(self, table, passed, threshold):
        self.table = table
        self.passed = bool(passed)
        self.threshold = threshold
        self.note = PROBE_NOTE

    def to_dict(self):
        data = self.table.to_dict()
        data.update({'pass': self.passed, 'threshold': self.threshold,
                     'note': self.note})
        return data


def uniform_continuity_probe(proximity, space, scales=DEFAULT_SCALES,
                             samples=2000, seed=0, threshold=0.1,
                             workers=1):
    """
    Sampled modulus omega(t) of `proximity` on the unit ball. PASS means
    omega at the smallest scale is at most `threshold`.

    :param proximity: map on row batches
    :param space: domain block space
    :rtype: :py:class:`ContinuityReport`
    """
    def clip(y):
        return space.radial_projection(y, 1.0)

    sampler = PairSampler(space, scales=scales,
                          draw=space.sample_unit_ball, clip=clip)
    table = core.estimate_modulus(proximity, sorted(scales), samples, seed,
                                  sampler, workers=workers)
    passed = table.omega[0] <= threshold and table.is_monotone()
    return ContinuityReport(table, passed, threshold)
