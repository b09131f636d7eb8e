# -*- coding: utf-8 -*-

"""
Diamond compacta K = conv(r_1 B_{X_1} u r_2 B_{X_2} u ...) in a block
space, their gauges, the seam functions f_m, the factor maps F_{n,m},
the retraction onto K and the radii schedules that bound its
Lipschitz constant.

Everything is realized at a finite depth N equal to the number of
blocks. The Lipschitz budget 1 + delta (5(1 + delta) for blocks of
dimension above one) does not depend on N, so deepening a truncation
never breaks a passing bound.
"""

import logging
import math

import numpy as np
from scipy.optimize import linprog

from lipretract.core import PairSampler
from lipretract.core import Point
from lipretract.core import DEFAULT_SCALES
from lipretract.core import dual_exponent
from lipretract.core import pnorm
from lipretract.exceptions import PreconditionError
from lipretract.smallness import smallness_bound_value

logger = logging.getLogger(__name__)

SEAM_GUARD = 1e-14
"""
Block norms below this value are treated as zero in the seam case
of F_{n,m} and the retraction
"""

MEMBERSHIP_TOL = 1e-9


def a_sequence(depth):
    """
    Default constants A_m = 2m for m = 1..depth

    :rtype: :py:class:`numpy.ndarray`
    """
    return 2.0 * np.arange(1, depth + 1, dtype=float)


class RadiiSchedule(object):
    """
    The sequences r_n, q_n, delta_n, a_n, alpha_n and A_m governing a
    diamond compact. Arrays are stored 0-based, so ``r[0]`` is r_1.
    """

    def __init__(self, r, q, delta, a, alpha, A, target_delta):
        """
        Constructor

        :param r: radii, positive and nonincreasing
        :param q: ratio bounds with r_n/r_{n-1} <= q_n
        :param delta: budget split with prod(1 + delta_n) <= 1 + target
        :param a: weights a_n
        :param alpha: tails alpha_n = sum_{k>n} a_k A_k
        :param A: constants A_m
        :param target_delta: overall budget delta
        :type target_delta: float
        :raises PreconditionError: on length mismatch
        """
        arrays = [np.array(v, dtype=float) for v in (r, q, delta, a,
                                                     alpha, A)]
        depth = len(arrays[0])
        if depth < 1 or any(len(v) != depth for v in arrays):
            raise PreconditionError('Schedule sequences must share a '
                                    'positive length')
        for v in arrays:
            v.setflags(write=False)
        (self._r, self._q, self._delta, self._a,
         self._alpha, self._A) = arrays
        self._target = float(target_delta)

    @property
    def depth(self):
        return len(self._r)

    @property
    def r(self):
        return self._r

    @property
    def q(self):
        return self._q

    @property
    def delta(self):
        return self._delta

    @property
    def a(self):
        return self._a

    @property
    def alpha(self):
        return self._alpha

    @property
    def A(self):
        return self._A

    @property
    def target_delta(self):
        return self._target

    def budget_product(self):
        """
        prod(1 + delta_n) over the truncation
        """
        return float(np.prod(1.0 + self._delta))

    def violations(self, tol=1e-12):
        """
        Lists the invariants that fail

        :return: descriptions of failed invariants, empty if valid
        :rtype: list
        """
        found = []
        if not np.all(self._r > 0):
            found.append('radii must be positive')
        if np.any(np.diff(self._r) > 0):
            found.append('radii must be nonincreasing')
        if np.any(self._alpha > self._delta / 2.0 + tol):
            found.append('alpha_n exceeds delta_n/2')
        ratios = self._r[1:] / self._r[:-1]
        if np.any(ratios > self._q[1:] * (1.0 + tol)):
            found.append('r_n/r_{n-1} exceeds q_n')
        if self.budget_product() > 1.0 + self._target + tol:
            found.append('prod(1 + delta_n) exceeds 1 + delta')
        return found

    def validate(self):
        """
        :raises PreconditionError: if an invariant fails
        """
        found = self.violations()
        if found:
            raise PreconditionError('Invalid schedule: ' + '; '.join(found))
        return self

    def with_radii(self, r):
        """
        Same schedule with replaced radii
        """
        return RadiiSchedule(r, self._q, self._delta, self._a,
                             self._alpha, self._A, self._target)

    def to_dict(self):
        return {'r': self._r.tolist(), 'q': self._q.tolist(),
                'delta': self._delta.tolist(), 'a': self._a.tolist(),
                'alpha': self._alpha.tolist(), 'A': self._A.tolist(),
                'target_delta': self._target}

    @staticmethod
    def from_dict(data):
        return RadiiSchedule(data['r'], data['q'], data['delta'],
                             data['a'], data['alpha'], data['A'],
                             data['target_delta'])


def _radii_from_ratios(q, r1):
    r = np.empty(len(q))
    r[0] = r1
    for n in range(1, len(q)):
        r[n] = r[n - 1] * q[n]
    return r


def default_schedule(depth, r1=1.0):
    """
    The explicit schedule q_n = a_n = 1/(n 2^(n+1)), delta_n = 2^(-n+1),
    alpha_n = 2^(-n), A_m = 2m with r_1 = `r1` and r_n = r_{n-1} q_n.

    alpha_n is the infinite tail sum, so it does not depend on the
    truncation depth.

    :param depth: number of blocks N
    :type depth: int
    :rtype: :py:class:`RadiiSchedule`
    """
    if depth < 1:
        raise PreconditionError('Depth must be at least 1')
    if not r1 > 0:
        raise PreconditionError('r_1 must be positive')
    n = np.arange(1, depth + 1, dtype=float)
    q = 1.0 / (n * 2.0 ** (n + 1))
    delta = 2.0 ** (-n + 1)
    alpha = 2.0 ** (-n)
    target = float(np.prod(1.0 + 2.0 ** -np.arange(0, 64, dtype=float))) - 1
    return RadiiSchedule(_radii_from_ratios(q, r1), q, delta, q.copy(),
                         alpha, a_sequence(depth), target).validate()


def schedule_for_delta(delta, depth, A=None, deltas=None, r1=1.0):
    """
    Schedule whose retraction is (1 + delta)-Lipschitz for monotone
    Schauder bases (5(1 + delta) for finite dimensional decompositions).

    delta_n defaults to log(1 + delta) 2^(-n), a_n is chosen so that the
    tails alpha_n stay below delta_n/2 and
    q_n = min(a_n, delta_n/(2 A_{n-1})), with A_0 treated as 0.

    :param delta: overall budget, positive
    :type delta: float
    :param depth: number of blocks N
    :param A: constants A_m, defaults to 2m
    :param deltas: explicit delta_n, must satisfy prod(1+delta_n) <= 1+delta
    :param r1: first radius
    :raises PreconditionError: if delta is not positive or the deltas
                               overshoot the budget
    :rtype: :py:class:`RadiiSchedule`
    """
    if not delta > 0:
        raise PreconditionError('delta must be positive: ' + str(delta))
    if depth < 1:
        raise PreconditionError('Depth must be at least 1')
    n = np.arange(1, depth + 1, dtype=float)
    A = a_sequence(depth) if A is None else np.array(A, dtype=float)
    if len(A) != depth:
        raise PreconditionError('Need ' + str(depth) + ' values of A_m')
    if deltas is None:
        deltas = math.log1p(delta) * 2.0 ** (-n)
    else:
        deltas = np.array(deltas, dtype=float)
        if len(deltas) != depth or np.any(deltas <= 0):
            raise PreconditionError('Need ' + str(depth) +
                                    ' positive values of delta_n')
        if np.prod(1.0 + deltas) > 1.0 + delta:
            raise PreconditionError('prod(1 + delta_n) exceeds 1 + delta')

    # a_k A_k = 2^(-k-1) min_{j<=k} delta_j keeps every tail below
    # delta_n 2^(-n-1)
    mass = 2.0 ** (-n - 1) * np.minimum.accumulate(deltas)
    a = mass / A
    tails = np.cumsum(mass[::-1])[::-1]
    alpha = np.append(tails[1:], 0.0)
    previous = np.concatenate(([0.0], A[:-1]))
    with np.errstate(divide='ignore'):
        ceiling = np.where(previous > 0, deltas / (2.0 * previous), np.inf)
    q = np.minimum(a, ceiling)
    return RadiiSchedule(_radii_from_ratios(q, r1), q, deltas, a, alpha,
                         A, delta).validate()


def small_schedule(depth, epsilon=0.5, r1=1.0):
    """
    The default schedule with ratios tightened to
    q_{k+1} <= smallness_bound(k) / (2k), so the diamond is also small
    for one dimensional blocks, every strictly increasing sigma
    and every exponent of the ambient p-sum

    :param depth: number of blocks N
    :param epsilon: smallness parameter in (0, 1]
    :rtype: :py:class:`RadiiSchedule`
    """
    base = default_schedule(depth, r1=r1)
    q = np.array(base.q)
    for n in range(2, depth + 1):
        k = n - 1
        ceiling = 0.5 * smallness_bound_value(k, epsilon) / k
        q[n - 1] = min(q[n - 1], ceiling)
    return RadiiSchedule(_radii_from_ratios(q, r1), q, base.delta, base.a,
                         base.alpha, base.A, base.target_delta).validate()


def shrunk_schedule(schedule, k, m):
    """
    Radii r^{k,m} = (r_1, ..., r_m, r_{m+1}/k, r_{m+2}/k, ...).

    The ratios only shrink, so the retraction keeps its Lipschitz
    budget, and as k grows the diamond collapses onto K_m.

    :param k: shrinking factor, at least 1
    :param m: number of radii kept
    :rtype: :py:class:`RadiiSchedule`
    """
    if k < 1:
        raise PreconditionError('Shrinking factor must be at least 1')
    if m < 0 or m > schedule.depth:
        raise PreconditionError('m out of range 0..' + str(schedule.depth))
    r = np.array(schedule.r)
    r[m:] = r[m:] / float(k)
    return schedule.with_radii(r)


class HullCheck(object):
    """
    Outcome of :py:meth:`DiamondCompact.hull_check`
    """

    def __init__(self, passed, checked, witness=None):
        self.passed = passed
        self.checked = checked
        self.witness = witness


class DiamondCompact(object):
    """
    The compact conv(r_1 B_{X_1} u ... u r_N B_{X_N}) of a block space.
    Its gauge is sum ||x_i|| / r_i.
    """

    def __init__(self, space, schedule):
        """
        Constructor

        :param space: block space with N blocks
        :type space: :py:class:`lipretract.core.BlockSpace`
        :param schedule: radii schedule of depth N
        :type schedule: :py:class:`RadiiSchedule`
        :raises PreconditionError: if the depths differ
        """
        if schedule.depth != space.block_count:
            raise PreconditionError('Schedule depth ' +
                                    str(schedule.depth) +
                                    ' does not match ' +
                                    str(space.block_count) + ' blocks')
        self._space = space
        self._schedule = schedule

    @property
    def space(self):
        return self._space

    @property
    def schedule(self):
        return self._schedule

    @property
    def depth(self):
        return self._schedule.depth

    @property
    def radii(self):
        return self._schedule.r

    def partial_gauges(self, x):
        """
        Running sums sum_{i<=k} ||x_i|| / r_i for k = 1..N

        :return: array of shape (..., N)
        """
        return np.cumsum(self._space.block_norms(x) / self.radii, axis=-1)

    def gauge(self, x, n=None):
        """
        sum_{i<=n} ||x_i|| / r_i, with n defaulting to the depth
        """
        n = self.depth if n is None else n
        if n < 0 or n > self.depth:
            raise PreconditionError('Depth ' + str(n) +
                                    ' out of range 0..' + str(self.depth))
        x = self._space.as_array(x)
        if n == 0:
            return np.zeros(x.shape[:-1])
        return self.partial_gauges(x)[..., n - 1]

    def contains(self, x, tol=0.0):
        """
        Membership test gauge(x) <= 1 + tol
        """
        return self.gauge(x) <= 1.0 + tol

    def f_m(self, x, m):
        """
        Seam function, f_1 = r_1 and
        f_m(x) = r_m (1 - sum_{i<m} ||x_i|| / r_i)
        """
        if m < 1 or m > self.depth:
            raise PreconditionError('m out of range 1..' + str(self.depth))
        x = self._space.as_array(x)
        if m == 1:
            return np.full(x.shape[:-1], self.radii[0])
        return self.radii[m - 1] * (1.0 - self.gauge(x, m - 1))

    def f_m_lipschitz_bound(self, m):
        """
        r_m A_{m-1} / r_{m-1}, zero for the constant f_1
        """
        if m == 1:
            return 0.0
        r = self.radii
        return float(r[m - 1] * self._schedule.A[m - 2] / r[m - 2])

    def factor_bounds(self, j):
        """
        Quotient bounds of F_{j,j} on pairs of P_j(X): the first when
        both partial sums are at most one, the second otherwise
        """
        extra = self.f_m_lipschitz_bound(j)
        return 5.0 + extra, 1.0 + extra

    def lipschitz_bound(self):
        """
        Budget of the retraction: 1 + delta for one dimensional blocks,
        5(1 + delta) otherwise
        """
        factor = 1.0 if max(self._space.dims) == 1 else 5.0
        return factor * (1.0 + self._schedule.target_delta)

    def _seam_scale(self, norms, values, radii):
        # relative to the block radius, radii reach 1e-60 at depth 20
        tiny = norms < SEAM_GUARD * radii
        if np.any(tiny & (values > 0)):
            logger.warning('Seam block norm below ' + str(SEAM_GUARD) +
                           ', using the continuity limit')
        safe = np.where(tiny, 1.0, norms)
        return np.where(tiny, 0.0, values / safe)

    def F_nm(self, x, n, m, tol=MEMBERSHIP_TOL):
        """
        Factor map F_{n,m} on E_{n,m} = P_m(X) u K_n:

        * x if sum_{i<=m} ||x_i|| / r_i <= 1
        * P_{m-1}x if sum_{i<m} ||x_i|| / r_i >= 1
        * P_{m-1}x + f_m(x) x_m / ||x_m|| otherwise

        :raises PreconditionError: if a point is outside E_{n,m}
        """
        if not 1 <= m <= n <= self.depth:
            raise PreconditionError('Need 1 <= m <= n <= ' +
                                    str(self.depth) + ', got m=' +
                                    str(m) + ' n=' + str(n))
        x = self._space.as_array(x)
        single = x.ndim == 1
        rows = np.atleast_2d(x)
        sums = self.partial_gauges(rows)
        bid = self._space.block_index
        supported = np.all(rows[:, bid >= m] == 0.0, axis=1)
        inside = sums[:, n - 1] <= 1.0 + tol
        if not np.all(supported | inside):
            raise PreconditionError('Point outside E_{' + str(n) + ',' +
                                    str(m) + '}')
        current = sums[:, m - 1]
        previous = sums[:, m - 2] if m >= 2 else np.zeros(len(rows))
        keep = current <= 1.0
        cut = ~keep & (previous >= 1.0)
        seam = ~keep & ~cut

        out = rows.copy()
        out[np.ix_(cut | seam, bid >= m - 1)] = 0.0
        if seam.any():
            cols = bid == m - 1
            norms = self._space.block_norms(rows[seam])[:, m - 1]
            scale = self._seam_scale(norms, self.f_m(rows[seam], m),
                                     self.radii[m - 1])
            out[np.ix_(seam, cols)] = rows[np.ix_(seam, cols)] * scale[:, None]
        return out[0] if single else out

    def retract(self, x):
        """
        Closed form of F_{N,1} o ... o F_{N,N} o P_N: with m the largest
        k in 1..N+1 such that sum_{i<k} ||x_i|| / r_i <= 1 it returns
        P_{m-1}x + f_m(x) x_m / ||x_m|| when m <= N and x otherwise.
        """
        x = self._space.as_array(x)
        single = x.ndim == 1
        rows = np.atleast_2d(x)
        sums = self.partial_gauges(rows)
        depth = self.depth
        seam_block = np.count_nonzero(sums <= 1.0, axis=1)
        out = rows.copy()
        moving = np.nonzero(seam_block < depth)[0]
        if len(moving) > 0:
            j = seam_block[moving]
            sub = rows[moving]
            norms = self._space.block_norms(sub)[np.arange(len(moving)), j]
            before = np.where(j > 0, sums[moving, np.maximum(j - 1, 0)], 0.0)
            scale = self._seam_scale(norms, self.radii[j] * (1.0 - before),
                                     self.radii[j])
            bid = self._space.block_index[None, :]
            jj = j[:, None]
            out[moving] = np.where(bid < jj, sub,
                                   np.where(bid == jj,
                                            sub * scale[:, None], 0.0))
        return out[0] if single else out

    def retract_composite(self, x):
        """
        The retraction as the literal composition
        F_{N,1} o ... o F_{N,N} o P_N
        """
        y = self._space.projection(x, self.depth)
        for m in range(self.depth, 0, -1):
            y = self.F_nm(y, self.depth, m)
        return y

    def block_ball_retraction(self, x, n, tol=MEMBERSHIP_TOL):
        """
        Retraction of K onto r_n B_{X_n}: the block n component, clamped
        radially to radius r_n

        :raises PreconditionError: if a point lies outside K
        """
        x = self._space.as_array(x)
        if not np.all(self.contains(x, tol)):
            raise PreconditionError('Point outside K beyond tolerance ' +
                                    str(tol))
        part = self._space.components(x)[n - 1] if n >= 1 else None
        if part is None or n > self.depth:
            raise PreconditionError('Block ' + str(n) + ' out of range')
        return self._space.radial_projection(part, self.radii[n - 1])

    def scaled(self, factor):
        """
        The compact factor * K
        """
        if not factor > 0:
            raise PreconditionError('Scale factor must be positive')
        return DiamondCompact(self._space,
                              self._schedule.with_radii(self.radii * factor))

    def shrunk(self, k, m):
        """
        Diamond on the radii r^{k,m}
        """
        return DiamondCompact(self._space,
                              shrunk_schedule(self._schedule, k, m))

    def _random_points(self, rng, count):
        weights = np.exp(rng.normal(0.0, 1.5,
                                    size=(count, self.depth)))
        scale = (weights * self.radii)[:, self._space.block_index]
        pts = rng.standard_normal(size=(count, self._space.dim)) * scale
        sizes = self.gauge(pts)
        sizes[sizes == 0.0] = 1.0
        return pts / sizes[:, None]

    def sample_boundary(self, rng, count):
        """
        Points of gauge one spread over all blocks
        """
        return self._random_points(rng, count)

    def sample_inside(self, rng, count):
        """
        Points of K with gauge strictly below one
        """
        levels = rng.uniform(0.0, 1.0 - 1e-12, size=count)
        return self._random_points(rng, count) * levels[:, None]

    def extreme_points(self, rng, count):
        """
        Points r_k u with u on the unit sphere of a random block k
        """
        space = self._space
        blocks = rng.integers(1, self.depth + 1, size=count)
        pts = np.zeros((count, space.dim))
        for k in np.unique(blocks):
            rows = np.nonzero(blocks == k)[0]
            sl = space.block_slice(int(k))
            dirs = rng.standard_normal(size=(len(rows), sl.stop - sl.start))
            pts[np.ix_(rows, np.arange(sl.start, sl.stop))] = dirs
            sizes = space.block_norm(pts[rows], int(k))
            sizes[sizes == 0.0] = 1.0
            pts[rows] *= (self.radii[k - 1] / sizes)[:, None]
        return pts

    def coordinate_bounds(self):
        """
        Largest absolute value of every coordinate over K
        """
        return (self.radii[self._space.block_index] *
                self._space.coordinate_bounds())

    def shell_points(self, rng, count, jitter=1e-6):
        """
        Points whose partial gauge at a random depth is close to one,
        the seams of the factor maps
        """
        pts = self._random_points(rng, count)
        depth = rng.integers(1, self.depth + 1, size=count)
        sums = self.partial_gauges(pts)[np.arange(count), depth - 1]
        sums[sums == 0.0] = 1.0
        wobble = 1.0 + jitter * rng.standard_normal(size=count)
        return pts / sums[:, None] * wobble[:, None]

    def pair_sampler(self, box=2.0, scales=DEFAULT_SCALES):
        """
        Pair sampler over box * K with seam pairs

        :param box: gauge level of the sampled region
        :rtype: :py:class:`lipretract.core.PairSampler`
        """
        def draw(rng, count):
            levels = rng.uniform(0.0, box, size=count)
            return self._random_points(rng, count) * levels[:, None]

        return PairSampler(self._space, scales=scales, draw=draw,
                           shell=self.shell_points)

    def inside_sampler(self, scales=DEFAULT_SCALES):
        """
        Pair sampler restricted to K, perturbed points are pulled back
        by gauge scaling
        """
        def clip(y):
            sizes = self.gauge(y)
            return y / np.maximum(1.0, sizes)[:, None]

        return PairSampler(self._space, scales=scales,
                           draw=self.sample_inside, clip=clip)

    def inner_radius_analytic(self, k):
        """
        Largest ball of E = X_1 + ... + X_k centered at 0 inside K,
        1 / ||(1/r_1, ..., 1/r_k)||_q with q the dual exponent
        """
        if k < 1:
            return 0.0
        q = dual_exponent(self._space.ambient_p)
        return float(1.0 / pnorm(1.0 / self.radii[:k], q))

    def height_analytic(self, k):
        """
        sup over K of the distance to X_1 + ... + X_k, which is r_{k+1}
        """
        if k >= self.depth:
            return 0.0
        return float(self.radii[k])

    def vertices(self):
        """
        Extreme points of K for polyhedral blocks

        :raises PreconditionError: if a block norm is not polyhedral
        """
        space = self._space
        verts = []
        for i in range(1, self.depth + 1):
            sl = space.block_slice(i)
            dim = sl.stop - sl.start
            tag = space.block_tags[i - 1]
            if isinstance(tag, np.ndarray) or (dim > 1 and tag == 2.0):
                raise PreconditionError('Block ' + str(i) +
                                        ' is not polyhedral')
            if dim == 1 or tag == 1.0:
                local = np.vstack((np.eye(dim), -np.eye(dim)))
            else:
                grids = np.meshgrid(*([[-1.0, 1.0]] * dim), indexing='ij')
                local = np.stack([g.ravel() for g in grids], axis=1)
            block = np.zeros((local.shape[0], space.dim))
            block[:, sl] = local * self.radii[i - 1]
            verts.append(block)
        return np.vstack(verts)

    def hull_check(self, samples=100, seed=0):
        """
        Confirms {gauge <= 1} = conv(union of r_k B_{X_k}) on sampled
        points by linear programming over the vertices, for polyhedral
        blocks

        :rtype: :py:class:`HullCheck`
        """
        verts = self.vertices().T
        rng = np.random.default_rng(seed)
        inside = self.sample_inside(rng, samples)
        outside = (self.sample_boundary(rng, samples) *
                   rng.uniform(1.01, 2.0, size=samples)[:, None])
        cols = verts.shape[1]
        for pt, expected in ([(p, True) for p in inside] +
                             [(p, False) for p in outside]):
            res = linprog(np.zeros(cols), A_ub=np.ones((1, cols)),
                          b_ub=[1.0], A_eq=verts, b_eq=pt,
                          bounds=[(0, None)] * cols, method='highs')
            if (res.status == 0) != expected:
                return HullCheck(False, 2 * samples, witness=pt)
        return HullCheck(True, 2 * samples)

    def span_rank(self, samples=None, seed=0):
        """
        Rank of the span of sampled points of K
        """
        rng = np.random.default_rng(seed)
        samples = samples or 4 * self._space.dim
        pts = self.sample_inside(rng, samples)
        return int(np.linalg.matrix_rank(pts))

    def to_dict(self):
        return {'space': self._space.to_dict(),
                'schedule': self._schedule.to_dict()}


def gauge(compact, x, n=None):
    """
    Gauge of the point `x` at depth `n`

    :type compact: :py:class:`DiamondCompact`
    :type x: :py:class:`lipretract.core.Point`
    :rtype: float
    """
    return float(compact.gauge(x.coeffs, n))


def f_m(compact, x, m):
    """
    Seam function f_m at the point `x`
    """
    return float(compact.f_m(x.coeffs, m))


def F_nm(compact, x, n, m):
    """
    Factor map F_{n,m} at the point `x`
    """
    return Point(x.space, compact.F_nm(x.coeffs, n, m))


def retract(compact, x):
    """
    Retraction of the point `x` onto the compact
    """
    return Point(x.space, compact.retract(x.coeffs))


def block_ball_retraction(compact, x, n):
    """
    Retraction of K onto r_n B_{X_n} at the point `x`
    """
    return Point(x.space, compact.block_ball_retraction(x.coeffs, n))


def rescaled_family(retraction, n):
    """
    The retraction x -> n R(x/n) onto nK

    :param retraction: retraction onto K acting on row batches
    :param n: scale, at least 1
    :return: retraction onto nK acting on row batches and points
    """
    if n < 1:
        raise PreconditionError('Scale must be at least 1')

    def rescaled(x):
        if isinstance(x, Point):
            return Point(x.space, rescaled(x.coeffs))
        return n * np.asarray(retraction(np.asarray(x, dtype=float) / n))

    return rescaled
