# -*- coding: utf-8 -*-

"""
A convex compact that is small yet admits no Lipschitz retraction.

Blocks X_n are explicit sup-norm spaces l_inf^d(n). Each one carries
a subspace Y_n that is almost Euclidean: the images of the unit
vectors of R^n under the embedding c -> (f_j(c))_j given by an epsilon
net f_1, ..., f_d of the Euclidean dual sphere. The tubes

    B_n^delta = {x in X_n : d(x, B_Y_n) <= delta}

scaled by lambda_n are glued into ``K = conv(U lambda_n B_n^delta_n)``.
Any retraction onto K restricts to retractions F_n of B_E_n onto the
tubes. Their constants are bounded below in terms of n^(1/4), which
grows without bound.

Sampling cannot prove that no retraction exists. The audit here only
shows where the constants of a given candidate grow.
"""

import logging
import math

import numpy as np
from scipy.optimize import minimize

from lipretract import core
from lipretract import diamond
from lipretract import linearize
from lipretract import smallness
from lipretract.core import BlockSpace
from lipretract.core import PairSampler
from lipretract.exceptions import NetConstructionError
from lipretract.exceptions import PreconditionError
from lipretract.exceptions import RetractionAuditError

logger = logging.getLogger(__name__)

BLOCK_DIM_LIMIT = 4

MEMBERSHIP_TOL = 1e-9

BISECT_TOL = 1e-7
"""
Relative width of the final bracket in :py:func:`tube_gauge_bisect`
"""

MAX_DOUBLINGS = 60

FIXES_TOL = 1e-6
"""
Largest displacement of a point of K tolerated by the audit
"""

AUDIT_NOTE = ('evidence only: sampled constants are lower estimates '
              'and cannot show that no retraction exists')


def _sup(values):
    return np.max(np.abs(values), axis=-1, initial=0.0)


def _check_open_epsilon(epsilon):
    if not 0.0 < epsilon < 1.0:
        raise PreconditionError('epsilon must lie in (0, 1): ' +
                                str(epsilon))
    return float(epsilon)


def M_n(n, epsilon=smallness.DEFAULT_EPSILON, d=1.0):
    """
    n^(1/4) (1 - eps) / (25 d), below which no retraction of B_E_n
    onto a thin enough tube exists

    :param n: block index, at least 1
    :param epsilon: Euclidean distortion of Y_n, in (0, 1)
    :param d: distance of E_n to l_inf^m, at least 1
    :rtype: float
    """
    if n < 1:
        raise PreconditionError('n must be at least 1: ' + str(n))
    epsilon = _check_open_epsilon(epsilon)
    if d < 1.0:
        raise PreconditionError('d must be at least 1: ' + str(d))
    return n ** 0.25 * (1.0 - epsilon) / (25.0 * d)


def lind_bound(n):
    """
    n^(1/4) / 3, a lower bound for retractions of l_inf onto l_2^n
    """
    if n < 1:
        raise PreconditionError('n must be at least 1: ' + str(n))
    return n ** 0.25 / 3.0


def transfer(lipschitz, d=1.0, epsilon=smallness.DEFAULT_EPSILON):
    """
    2 d L / (1 - eps): constant of the retraction of l_inf onto l_2^n
    obtained from an L-Lipschitz retraction of B_E_n onto B_Y_n
    """
    if lipschitz < 0:
        raise PreconditionError('Lipschitz constant must be '
                                'nonnegative: ' + str(lipschitz))
    if d < 1.0:
        raise PreconditionError('d must be at least 1: ' + str(d))
    epsilon = _check_open_epsilon(epsilon)
    return 2.0 * d * lipschitz / (1.0 - epsilon)


def chain_bound(n, epsilon=smallness.DEFAULT_EPSILON, d=1.0):
    """
    transfer(4 M_n) = 8 n^(1/4) / 25, what a retraction of constant
    M_n onto every tube would give after smoothing. It stays below
    :py:func:`lind_bound`.
    """
    return transfer(4.0 * M_n(n, epsilon, d), d, epsilon)


def circle_functionals(count):
    """
    `count` unit functionals of the plane at angles k pi / count.
    Up to sign they cover the circle with gaps of pi / count.
    """
    if count < 2:
        raise PreconditionError('Need at least 2 directions, got ' +
                                str(count))
    angles = np.arange(count) * np.pi / count
    return np.column_stack((np.cos(angles), np.sin(angles)))


def _unit_coefficients(n, samples, seed):
    rng = np.random.default_rng(seed)
    gauss = rng.standard_normal(size=(samples, n))
    gauss /= np.linalg.norm(gauss, axis=1)[:, None]
    rows = [gauss, np.eye(n), -np.eye(n)]
    if n == 2:
        angles = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        rows.append(np.column_stack((np.cos(angles), np.sin(angles))))
    return np.vstack(rows)


class ModelBlock(object):
    """
    Sup-norm block l_inf^d with the frame a_1, ..., a_n of Y_n.

    ``frame`` has shape (n, d), row i is a_i. For unit c,
    ``(1 - distortion) <= ||sum c_i a_i||_inf <= 1``.
    """

    def __init__(self, n, frame, epsilon, distortion):
        self.n = int(n)
        self.frame = np.asarray(frame, dtype=float)
        self.epsilon = float(epsilon)
        self.distortion = float(distortion)

    @property
    def dim(self):
        return self.frame.shape[1]

    def space(self):
        """
        The block as a one block :py:class:`BlockSpace`
        """
        return BlockSpace([self.dim], block_norm='inf', ambient_rule='inf')

    def embed(self, c):
        """
        sum c_i a_i for coefficient rows `c`
        """
        return np.asarray(c, dtype=float) @ self.frame

    def coefficients(self, y):
        """
        Least squares coefficients of `y` against the frame
        """
        y = np.asarray(y, dtype=float)
        solved = np.linalg.lstsq(self.frame.T, y.T, rcond=None)[0]
        return solved.T

    def to_dict(self):
        return {'n': self.n, 'dim': self.dim, 'epsilon': self.epsilon,
                'distortion': self.distortion,
                'frame': self.frame.tolist()}

    @staticmethod
    def from_dict(data):
        return ModelBlock(data['n'], data['frame'], data['epsilon'],
                          data['distortion'])


def audit_distortion(frame, samples=2000, seed=0):
    """
    Largest sampled 1 - ||sum c_i a_i||_inf over unit c

    :raises NetConstructionError: if some unit c has image of norm
                                  above one
    """
    frame = np.asarray(frame, dtype=float)
    c = _unit_coefficients(frame.shape[0], samples, seed)
    norms = _sup(c @ frame)
    worst = int(np.argmax(norms))
    if norms[worst] > 1.0 + 1e-12:
        raise NetConstructionError('Frame expands ' +
                                   str(c[worst].tolist()) + ' to norm ' +
                                   str(norms[worst]), witness=c[worst])
    return float(max(0.0, np.max(1.0 - norms)))


def build_block(n, epsilon=smallness.DEFAULT_EPSILON, directions=None,
                seed=0, samples=2000):
    """
    Model block with an almost Euclidean n dimensional subspace.

    n = 1 is the line itself. For n = 2 `directions` picks the regular
    table of :py:func:`circle_functionals`; otherwise a greedy epsilon
    net of the Euclidean dual sphere is used, keeping one functional of
    every pair +f, -f.

    :param n: dimension of Y_n
    :param epsilon: net radius, in (0, 1]
    :param directions: number of regular directions, n = 2 only
    :raises PreconditionError: on n < 1 or directions with n != 2
    :raises NetConstructionError: if n exceeds 4 or the net is too
                                  coarse for `epsilon`
    :rtype: :py:class:`ModelBlock`
    """
    if n < 1:
        raise PreconditionError('n must be at least 1: ' + str(n))
    if n > BLOCK_DIM_LIMIT:
        raise NetConstructionError('Model blocks are limited to ' +
                                   str(BLOCK_DIM_LIMIT) + ' dims, got ' +
                                   str(n))
    epsilon = smallness.check_epsilon(epsilon)
    euclid = BlockSpace([n])
    if directions is not None:
        if n != 2:
            raise PreconditionError('Regular directions need n = 2, '
                                    'got ' + str(n))
        table = circle_functionals(directions)
        linearize.epsnet_polyhedral_norm(euclid, epsilon, functionals=table,
                                         seed=seed)
    elif n == 1:
        table = np.ones((1, 1))
    else:
        net = linearize.epsnet_polyhedral_norm(euclid, epsilon, seed=seed,
                                               samples=samples)
        table = net.functionals[::2]
    frame = table.T.copy()
    if np.linalg.matrix_rank(frame) < n:
        raise NetConstructionError('Net functionals do not span R^' + str(n))
    distortion = audit_distortion(frame, samples=samples, seed=seed + 1)
    logger.info('Block n=' + str(n) + ' in l_inf^' + str(frame.shape[1]) +
                ' with distortion ' + str(distortion))
    return ModelBlock(n, frame, epsilon, distortion)


class TubeSet(object):
    """
    B^delta = {x : d(x, B_Y) <= delta} inside a model block, equal to
    the Minkowski sum B_Y + delta B_X
    """

    def __init__(self, block, delta):
        if delta < 0:
            raise PreconditionError('Tube thickness must be nonnegative: ' +
                                    str(delta))
        self.block = block
        self.delta = float(delta)

    def sample(self, rng, count):
        """
        Points c A + delta z with ||c||_2 <= 1 and ||z||_inf <= 1
        """
        c = core.uniform_lp_ball(rng, count, self.block.n, 2.0)
        z = rng.uniform(-1.0, 1.0, size=(count, self.block.dim))
        return self.block.embed(c) + self.delta * z

    def sandwich_violation(self, samples=200, seed=0):
        """
        Worst sampled excess of B_Y in B^delta in (1 + delta) B_X

        :return: excess, <= 0 when both inclusions hold
        """
        rng = np.random.default_rng(seed)
        c = core.uniform_lp_ball(rng, samples, self.block.n, 2.0)
        inner = max(dist_to_euclidean_ball(y, self.block)
                    for y in self.block.embed(c))
        outer = np.max(_sup(self.sample(rng, samples))) - (1.0 + self.delta)
        return float(max(inner - MEMBERSHIP_TOL, outer))

    def convexity_violation(self, samples=100, seed=0):
        """
        Worst sampled gauge excess of t u + (1 - t) v for u, v in the
        tube
        """
        rng = np.random.default_rng(seed)
        u = self.sample(rng, samples)
        v = self.sample(rng, samples)
        t = rng.uniform(0.0, 1.0, size=samples)[:, None]
        mixed = t * u + (1.0 - t) * v
        return float(max(tube_gauge(w, self) for w in mixed) - 1.0)

    def gauge_audit(self, samples=50, seed=0):
        """
        Largest relative gap between :py:func:`tube_gauge` and
        :py:func:`tube_gauge_bisect` on sampled points
        """
        rng = np.random.default_rng(seed)
        scale = 2.0 * (1.0 + self.delta)
        pts = rng.uniform(-scale, scale, size=(samples, self.block.dim))
        gaps = []
        for x in pts:
            direct = tube_gauge(x, self)
            bisected = tube_gauge_bisect(x, self)
            gaps.append(abs(direct - bisected) / max(1.0, bisected))
        return float(max(gaps))

    def to_dict(self):
        return {'delta': self.delta, 'block': self.block.to_dict()}


def _residual(x, frame, c):
    return _sup(x - c @ frame)


def _into_ball(c):
    length = np.linalg.norm(c)
    if length > 1.0:
        return c / length
    return c


def _epigraph(x, frame, start, t0, radial, scale):
    """
    min t subject to |x - c A|_j <= scale t and `radial` on (c, t)
    """
    n = frame.shape[0]

    def residual_cons(v):
        r = x - v[:n] @ frame
        return np.concatenate((scale * v[n] - r, scale * v[n] + r))

    def residual_jac(v):
        jac = np.zeros((2 * frame.shape[1], n + 1))
        jac[:frame.shape[1], :n] = frame.T
        jac[frame.shape[1]:, :n] = -frame.T
        jac[:, n] = scale
        return jac

    cons = [{'type': 'ineq', 'fun': residual_cons, 'jac': residual_jac},
            radial]
    objective = np.zeros(n + 1)
    objective[n] = 1.0
    res = minimize(lambda v: v[n], np.append(start, t0),
                   jac=lambda v: objective, method='SLSQP',
                   constraints=cons,
                   bounds=[(None, None)] * n + [(0.0, None)],
                   options={'ftol': 1e-14, 'maxiter': 500})
    if not res.success:
        logger.debug('SLSQP stopped: ' + str(res.message))
    return res.x[:n]


def dist_to_euclidean_ball(x, block):
    """
    min over ||c||_2 <= 1 of ||x - sum c_i a_i||_inf

    The value returned is attained by a feasible c, so it never
    undershoots the distance.

    :param x: point of the block
    :type x: :py:class:`numpy.ndarray`
    :param block: the model block
    :type block: :py:class:`ModelBlock`
    :rtype: float
    """
    x = np.asarray(x, dtype=float)
    frame = block.frame
    start = _into_ball(block.coefficients(x))
    best = float(_residual(x, frame, start))
    if best == 0.0:
        return best
    n = frame.shape[0]
    ball = {'type': 'ineq', 'fun': lambda v: 1.0 - v[:n] @ v[:n],
            'jac': lambda v: np.append(-2.0 * v[:n], 0.0)}
    found = _into_ball(_epigraph(x, frame, start, best, ball, 1.0))
    return min(best, float(_residual(x, frame, found)))


def tube_membership(x, tube, tol=MEMBERSHIP_TOL):
    """
    True if d(x, B_Y) <= delta + tol
    """
    return dist_to_euclidean_ball(x, tube.block) <= tube.delta + tol


def _gauge_value(x, frame, delta, c):
    if delta == 0.0:
        return float(np.linalg.norm(c))
    return max(float(np.linalg.norm(c)), float(_residual(x, frame, c)) /
               delta)


def tube_gauge(x, tube):
    """
    Minkowski gauge of the tube, solved as the convex program
    min_c max(||c||_2, ||x - sum c_i a_i||_inf / delta).

    For delta = 0 the tube is B_Y and points off Y have infinite
    gauge.

    :rtype: float
    """
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        return 0.0
    frame = tube.block.frame
    start = tube.block.coefficients(x)
    if tube.delta == 0.0:
        scale = max(1.0, float(_sup(x)))
        if _residual(x, frame, start) > MEMBERSHIP_TOL * scale:
            return math.inf
        return float(np.linalg.norm(start))
    best = _gauge_value(x, frame, tube.delta, start)
    n = frame.shape[0]
    cone = {'type': 'ineq', 'fun': lambda v: v[n] * v[n] - v[:n] @ v[:n],
            'jac': lambda v: np.append(-2.0 * v[:n], 2.0 * v[n])}
    found = _epigraph(x, frame, start, best, cone, tube.delta)
    return min(best, _gauge_value(x, frame, tube.delta, found))


def tube_gauge_bisect(x, tube, tol=BISECT_TOL):
    """
    Gauge by bisection on t -> [x / t in the tube]

    :raises PreconditionError: if no t up to 2^60 brackets the
                               boundary
    """
    x = np.asarray(x, dtype=float)
    if not np.any(x):
        return 0.0
    hi = 1.0
    for _ in range(MAX_DOUBLINGS):
        if tube_membership(x / hi, tube):
            break
        hi *= 2.0
    else:
        raise PreconditionError('Gauge bisection found no bracket for ' +
                                str(x.tolist()))
    lo = 0.0
    while hi - lo > tol * hi:
        mid = 0.5 * (lo + hi)
        if tube_membership(x / mid, tube):
            hi = mid
        else:
            lo = mid
    return hi


class AssembledCompact(object):
    """
    K = conv(U lambda_n B_n^delta_n) in the sup-sum of the model
    blocks.

    The blocks are disjoint coordinate groups, so the gauge of K is
    the sum of the block gauges, each divided by lambda_n. The Y_n
    frame of block n plays the role of a_sigma(n-1)+1, ..., a_sigma(n)
    for the triangular sigma.
    """

    def __init__(self, blocks, deltas, lambdas, epsilon):
        if not len(blocks) == len(deltas) == len(lambdas):
            raise PreconditionError('Need one delta and one lambda per '
                                    'block')
        if len(blocks) == 0:
            raise PreconditionError('At least one block is required')
        if min(lambdas) <= 0:
            raise PreconditionError('Scales lambda_n must be positive')
        self._tubes = [TubeSet(b, d) for b, d in zip(blocks, deltas)]
        self._lambdas = np.asarray(lambdas, dtype=float)
        self._epsilon = float(epsilon)
        self._space = BlockSpace([b.dim for b in blocks], block_norm='inf',
                                 ambient_rule='inf')

    @property
    def space(self):
        return self._space

    @property
    def depth(self):
        return len(self._tubes)

    @property
    def tubes(self):
        return self._tubes

    @property
    def lambdas(self):
        return self._lambdas

    @property
    def epsilon(self):
        return self._epsilon

    def frame_indices(self, n):
        """
        Global indices of the frame vectors of block n
        """
        first = smallness.triangular_sigma(n - 1) if n > 1 else 0
        return list(range(first + 1, smallness.triangular_sigma(n) + 1))

    def embed(self, n, y):
        """
        The point with block n equal to `y` and zeros elsewhere
        """
        y = np.asarray(y, dtype=float)
        full = np.zeros(y.shape[:-1] + (self._space.dim,))
        full[..., self._space.block_slice(n)] = y
        return full

    def block_gauges(self, x):
        x = self._space.as_array(x)
        return np.array([tube_gauge(x[self._space.block_slice(n)], tube) /
                         lam
                         for n, (tube, lam) in enumerate(
                             zip(self._tubes, self._lambdas), start=1)])

    def _gauge_row(self, x):
        return float(np.sum(self.block_gauges(x)))

    def gauge(self, x):
        """
        Gauge of K at a point or a batch of rows
        """
        return core.rowwise(self._gauge_row)(x)

    def contains(self, x, tol=MEMBERSHIP_TOL):
        return self.gauge(x) <= 1.0 + tol

    def sample_inside(self, rng, count):
        """
        Convex combinations sum w_n lambda_n y_n with y_n in the tubes
        and sum w_n < 1
        """
        weights = rng.dirichlet(np.ones(self.depth + 1), size=count)
        parts = [w[:, None] * lam * tube.sample(rng, count)
                 for w, lam, tube in zip(weights.T, self._lambdas,
                                         self._tubes)]
        return np.hstack(parts)

    def fdd_constant(self, samples=2000, seed=0):
        """
        Measured sup_n ||Q_n x|| / ||x|| over sampled x
        """
        rng = np.random.default_rng(seed)
        x = self._space.sample_sphere(rng, samples)
        norms = self._space.norm(x)
        best = 1.0
        for n in range(1, self.depth):
            heads = self._space.norm(self._space.projection(x, n))
            best = max(best, float(np.max(heads / norms)))
        return best

    def e_space(self, n):
        """
        E_n, the first n blocks
        """
        return self._space.truncate(n)

    def to_dict(self):
        return {'epsilon': self._epsilon,
                'lambdas': self._lambdas.tolist(),
                'deltas': [t.delta for t in self._tubes],
                'frame_indices': [self.frame_indices(n)
                                  for n in range(1, self.depth + 1)],
                'blocks': [t.block.to_dict() for t in self._tubes]}

    @staticmethod
    def from_dict(data):
        blocks = [ModelBlock.from_dict(b) for b in data['blocks']]
        return AssembledCompact(blocks, data['deltas'], data['lambdas'],
                                data['epsilon'])


def build_assembled(depth, epsilon=smallness.DEFAULT_EPSILON,
                    tube_delta=0.5, radii=None, seed=0):
    """
    Assembled compact with blocks n = 1..depth and delta_n =
    tube_delta / n.

    :param radii: the scales lambda_n, by default the radii of
                  :py:func:`lipretract.diamond.default_schedule`, which
                  shrink fast enough for K to be small
    :rtype: :py:class:`AssembledCompact`
    """
    if radii is None:
        radii = diamond.default_schedule(depth).r
    if len(radii) != depth:
        raise PreconditionError('Expected ' + str(depth) + ' radii, got ' +
                                str(len(radii)))
    if tube_delta < 0:
        raise PreconditionError('Tube thickness must be nonnegative: ' +
                                str(tube_delta))
    blocks = [build_block(n, epsilon, seed=seed + n)
              for n in range(1, depth + 1)]
    deltas = [tube_delta / n for n in range(1, depth + 1)]
    return AssembledCompact(blocks, deltas, list(radii), epsilon)


class AuditRecord(object):
    """
    Induced retraction F_n for one block
    """

    def __init__(self, n, lam, delta, report, m_n, fdd_constant):
        self.n = n
        self.lam = float(lam)
        self.delta = float(delta)
        self.report = report
        self.m_n = float(m_n)
        self.fdd_constant = float(fdd_constant)

    @property
    def estimate(self):
        return self.report.estimate

    @property
    def threshold(self):
        """
        M_n / 2M: a candidate below it for this n would contradict the
        lower bound
        """
        return self.m_n / (2.0 * self.fdd_constant)

    @property
    def clears_bound(self):
        return self.estimate >= self.m_n

    def to_row(self):
        return [self.n, self.lam, self.delta, self.estimate, self.m_n,
                self.threshold]

    def to_dict(self):
        data = {'n': self.n, 'lambda': self.lam, 'delta': self.delta,
                'M_n': self.m_n, 'threshold': self.threshold,
                'clears_bound': self.clears_bound}
        data.update(self.report.to_dict())
        return data


class AuditReport(object):
    """
    Outcome of :py:func:`retraction_audit`
    """

    ROW_HEADER = ['n', 'lambda', 'delta', 'estimate', 'M_n', 'threshold']

    def __init__(self, records, fdd_constant, displacement, note=AUDIT_NOTE):
        self.records = records
        self.fdd_constant = float(fdd_constant)
        self.displacement = float(displacement)
        self.note = note

    @property
    def implied_lipschitz(self):
        """
        max_n est(F_n) / 2M, a lower estimate for the candidate itself
        """
        if not self.records:
            return 0.0
        return max(r.estimate for r in self.records) / (
            2.0 * self.fdd_constant)

    def to_rows(self):
        return [r.to_row() for r in self.records]

    def to_dict(self):
        return {'fdd_constant': self.fdd_constant,
                'displacement': self.displacement,
                'implied_lipschitz': self.implied_lipschitz,
                'note': self.note,
                'records': [r.to_dict() for r in self.records]}


def fixes_audit(candidate, compact, samples=200, seed=0, tol=FIXES_TOL):
    """
    Checks that `candidate` fixes sampled points of K

    :return: largest displacement seen
    :raises RetractionAuditError: if a point moves by more than `tol`
    """
    rng = np.random.default_rng(seed)
    pts = compact.sample_inside(rng, samples)
    moved = np.asarray(candidate(pts), dtype=float)
    if moved.shape != pts.shape:
        raise RetractionAuditError('Candidate returned shape ' +
                                   str(moved.shape) + ' for ' +
                                   str(pts.shape))
    shifts = compact.space.norm(moved - pts)
    worst = int(np.argmax(shifts))
    if shifts[worst] > tol:
        raise RetractionAuditError('Candidate moves a point of K by ' +
                                   str(shifts[worst]),
                                   witness=pts[worst],
                                   displacement=float(shifts[worst]))
    return float(shifts[worst])


def induced_map(candidate, compact, n):
    """
    F_n(x) = lambda_n^-1 (block n of candidate(lambda_n x)) on E_n
    """
    lam = compact.lambdas[n - 1]
    head = compact.space.offsets[n]
    sl = compact.space.block_slice(n)

    def mapped(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        full = np.zeros((x.shape[0], compact.space.dim))
        full[:, :head] = lam * x
        out = np.asarray(candidate(full), dtype=float)
        return out[:, sl] / lam

    return mapped


def _audit_stage(candidate, compact, n, pairs, seed, m_n, fdd):
    sampler = PairSampler(compact.e_space(n), box=1.0)
    report = core.estimate_lipschitz(induced_map(candidate, compact, n),
                                     sampler, pairs, seed, out_norm=_sup)
    logger.info('F_' + str(n) + ' estimate ' + str(report.estimate) +
                ' against M_n ' + str(m_n))
    return AuditRecord(n, compact.lambdas[n - 1], compact.tubes[n - 1].delta,
                       report, m_n, fdd)


def retraction_audit(candidate, compact, depths=None, fdd_constant=None,
                     pairs=2000, fixed_samples=200, seed=0, tol=FIXES_TOL,
                     workers=1):
    """
    Audits a candidate retraction onto the assembled compact.

    The candidate must fix sampled points of K. For every n the
    induced F_n is a retraction of B_E_n onto B_n^delta_n; its sampled
    constant is set against M_n and M_n / 2M. The result is evidence
    of where the candidate's constant grows, never a proof that no
    retraction exists.

    :param candidate: map on row batches of the full space
    :param compact: the assembled compact
    :type compact: :py:class:`AssembledCompact`
    :param depths: block index or list of them, all blocks by default
    :param fdd_constant: M with ||Q_n|| <= M, measured when omitted
    :param workers: blocks audited in parallel
    :raises PreconditionError: on a block index out of range or M < 1
    :raises RetractionAuditError: if the candidate moves a point of K
    :rtype: :py:class:`AuditReport`
    """
    if depths is None:
        depths = list(range(1, compact.depth + 1))
    elif isinstance(depths, int):
        depths = [depths]
    for n in depths:
        if not 1 <= n <= compact.depth:
            raise PreconditionError('Block index ' + str(n) +
                                    ' out of range 1..' +
                                    str(compact.depth))
    if fdd_constant is None:
        fdd_constant = compact.fdd_constant(seed=seed)
    if fdd_constant < 1.0:
        raise PreconditionError('FDD constant must be at least 1: ' +
                                str(fdd_constant))
    displacement = fixes_audit(candidate, compact, samples=fixed_samples,
                               seed=seed, tol=tol)
    tasks = [(candidate, compact, n, pairs, seed + n,
              M_n(n, compact.epsilon), fdd_constant) for n in depths]
    records = core.run_chunks(_audit_stage, tasks, workers=workers)
    return AuditReport(records, fdd_constant, displacement)
