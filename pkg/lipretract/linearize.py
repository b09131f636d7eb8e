# -*- coding: utf-8 -*-

"""
From a Lipschitz retraction onto a small compact to linear projections.

The pipeline for a given n works inside G, the span of the first
phi(n) coordinates, and E, the span of the first sigma(n):

1. ``R~ = C o R`` restricted to G, where C keeps the first sigma(n)
   coordinates. For the p-sums of block norms used here that
   truncation is a nearest point map onto E.
2. ``R_tau``, the average of R~ over x + tau B_G (:py:func:`begun_smooth`).
3. The mean derivative of R_tau over the box
   ``r B_{l_1} + delta sum [-a_i, a_i]`` (:py:func:`average_derivative`).
4. ``P~ = (P|_E)^-1 o P`` and its norm against 4 ||R||
   (:py:func:`extract_projection`).

:py:func:`pi_certificate` runs all of it for a list of n.
"""

import logging
import math

import numpy as np

from lipretract import core
from lipretract.core import PairSampler
from lipretract.core import uniform_lp_ball
from lipretract.exceptions import LipRetractError
from lipretract.exceptions import NetConstructionError
from lipretract.exceptions import PreconditionError
from lipretract.exceptions import SamplingError
from lipretract import smallness

logger = logging.getLogger(__name__)

PROJECTION_TOL = 1e-6

AUERBACH_TOL = 1e-9

FD_RELATIVE_STEP = 1e-4
"""
Default finite difference step as a fraction of the box diameter
"""

MIN_RELATIVE_STEP = 1e-12

SINGULAR_CONDITION = 1e12

NORM_MARGIN = 1.25
"""
Factor applied to the empirical Lipschitz estimate for the margin
bounds, since the estimate is a lower bound
"""

DEFAULT_LADDER = (1e-1, 1e-2, 1e-3)
"""
Box thicknesses delta_k, relative to the inner radius r_n
"""

GREEDY_DIM_LIMIT = 4

ESTIMATORS = ('fd', 'segment')


class SmoothedMap(object):
    """
    x -> mean of f(x + u) over a fixed antithetic sample of u in tau B.

    The offsets are drawn once, so evaluation is deterministic and
    linear maps pass through unchanged up to rounding.
    """

    def __init__(self, func, tau, offsets, lipschitz=1.0, defect=0.0,
                 radius=None, space=None):
        self._func = func
        self.tau = float(tau)
        self._offsets = offsets
        self.lipschitz = float(lipschitz)
        self.defect = float(defect)
        self.radius = radius
        self._space = space

    @property
    def samples(self):
        return self._offsets.shape[0]

    @property
    def dim(self):
        return self._offsets.shape[1]

    @property
    def budget(self):
        """
        L (1 + D h / (L tau)), the Lipschitz bound of the smoothed map
        """
        return self.lipschitz * (1.0 + self.dim * self.defect /
                                 (self.lipschitz * self.tau))

    @property
    def deviation_bound(self):
        """
        L tau + 2 h, the distance between the smoothed and the base map
        """
        return self.lipschitz * self.tau + 2.0 * self.defect

    def _check_domain(self, rows):
        if self.radius is None:
            return
        reach = self._space.norm(rows) + self.tau
        if np.any(reach > self.radius):
            raise PreconditionError('Point outside the smoothing domain '
                                    'of radius ' + str(self.radius))

    def _evaluate(self, rows):
        count = rows.shape[0]
        shifted = (rows[:, None, :] + self._offsets[None, :, :])
        values = np.asarray(self._func(shifted.reshape(-1, self.dim)),
                            dtype=float)
        values = values.reshape(count, self.samples, -1)
        return values

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        rows = np.atleast_2d(x)
        self._check_domain(rows)
        out = self._evaluate(rows).mean(axis=1)
        return out[0] if single else out

    def with_error(self, x):
        """
        Value and three standard errors of the Monte-Carlo mean
        """
        rows = np.atleast_2d(np.asarray(x, dtype=float))
        self._check_domain(rows)
        values = self._evaluate(rows)
        spread = values.std(axis=1) / math.sqrt(self.samples)
        return values.mean(axis=1), 3.0 * spread

    def to_dict(self):
        return {'tau': self.tau, 'samples': self.samples,
                'lipschitz': self.lipschitz, 'defect': self.defect,
                'budget': self.budget,
                'deviation_bound': self.deviation_bound}


def begun_smooth(func, tau, samples=64, seed=0, space=None, lipschitz=1.0,
                 defect=0.0, radius=None):
    """
    Smooths a coarse Lipschitz map by averaging it over balls.

    If ``||f(x) - f(y)|| <= L ||x - y|| + 2h`` then the average over
    x + tau B is Lipschitz with constant L (1 + D h / (L tau)), D the
    dimension, and stays within L tau + 2h of f.

    :param func: map acting on row batches
    :param tau: ball radius, positive
    :param samples: offsets per evaluation, rounded up to even
    :param seed: seed of the offsets
    :param space: domain space, its unit ball is used for the offsets
    :type space: :py:class:`lipretract.core.BlockSpace`
    :param lipschitz: L
    :param defect: h
    :param radius: if set, the map is only evaluated inside this ball,
                   the offsets included
    :raises PreconditionError: if tau or samples are not positive
    :rtype: :py:class:`SmoothedMap`
    """
    if not tau > 0:
        raise PreconditionError('tau must be positive: ' + str(tau))
    if samples < 1:
        raise PreconditionError('samples must be at least 1')
    if space is None:
        raise PreconditionError('A domain space is required')
    rng = np.random.default_rng(seed)
    half = space.sample_unit_ball(rng, (samples + 1) // 2) * tau
    offsets = np.vstack((half, -half))
    offsets.setflags(write=False)
    logger.debug('Smoothing at tau=' + str(tau) + ' with ' +
                 str(offsets.shape[0]) + ' offsets')
    return SmoothedMap(func, tau, offsets, lipschitz=lipschitz,
                       defect=defect, radius=radius, space=space)


class Frame(object):
    """
    Basis (a_i) of G with biorthogonal functionals (a_i*), whose first
    sigma vectors span E, the span of the first sigma coordinates.
    """

    def __init__(self, space, vectors, sigma):
        """
        Constructor

        :param space: the space G
        :type space: :py:class:`lipretract.core.BlockSpace`
        :param vectors: rows a_1..a_phi in coordinates of G
        :param sigma: dimension of E
        :raises PreconditionError: if the rows are not a basis or E is
                                   not a union of whole blocks
        """
        vectors = np.array(vectors, dtype=float)
        if vectors.shape != (space.dim, space.dim):
            raise PreconditionError('Frame needs ' + str(space.dim) +
                                    ' vectors of length ' +
                                    str(space.dim))
        if np.linalg.matrix_rank(vectors) < space.dim:
            raise PreconditionError('Frame vectors are linearly dependent')
        if not 1 <= sigma <= space.dim:
            raise PreconditionError('sigma must lie in 1..' +
                                    str(space.dim) + ', got ' + str(sigma))
        blocks = space.blocks_spanning(sigma)
        if blocks is None:
            raise PreconditionError('E must be spanned by whole blocks, '
                                    'sigma=' + str(sigma) + ' cuts one')
        if np.any(vectors[:sigma, sigma:] != 0.0):
            raise PreconditionError('The first ' + str(sigma) +
                                    ' frame vectors must lie in E')
        vectors.setflags(write=False)
        functionals = np.linalg.inv(vectors).T
        functionals.setflags(write=False)
        self._space = space
        self._vectors = vectors
        self._functionals = functionals
        self._sigma = int(sigma)
        self._e_space = space.truncate(blocks)

    @staticmethod
    def coordinate(space, sigma):
        """
        Unit coordinate vectors of G scaled to norm one
        """
        eye = np.eye(space.dim)
        return Frame(space, eye / space.norm(eye)[:, None], sigma)

    @property
    def space(self):
        return self._space

    @property
    def e_space(self):
        return self._e_space

    @property
    def vectors(self):
        return self._vectors

    @property
    def functionals(self):
        return self._functionals

    @property
    def sigma(self):
        return self._sigma

    @property
    def dim(self):
        return self._space.dim

    @property
    def e_vectors(self):
        """
        a_1..a_sigma in coordinates of E
        """
        return self._vectors[:self._sigma, :self._sigma]

    def to_coords(self, x):
        return np.asarray(x, dtype=float) @ self._functionals.T

    def from_coords(self, c):
        return np.asarray(c, dtype=float) @ self._vectors

    def e_coords(self, y):
        """
        Frame coordinates of points of E given in coordinates of E
        """
        return np.asarray(y, dtype=float) @ np.linalg.inv(self.e_vectors)

    def e_norm(self, y):
        """
        Norm of points of E given in coordinates of E
        """
        return self._e_space.norm(y)

    def check_auerbach(self, tol=AUERBACH_TOL):
        """
        Every a_i has norm one, and for i <= sigma the functional a_i*
        has norm one on E

        :raises PreconditionError: naming the first offending index
        """
        lengths = self._space.norm(self._vectors)
        for i, length in enumerate(lengths, start=1):
            if abs(length - 1.0) > tol:
                raise PreconditionError('Frame vector a_' + str(i) +
                                        ' has norm ' + str(length))
        for i in range(self._sigma):
            dual = self._e_space.dual_norm(
                self._functionals[i, :self._sigma])
            if abs(dual - 1.0) > tol:
                raise PreconditionError('Frame is not Auerbach on E: '
                                        '||a_' + str(i + 1) + '*|| = ' +
                                        str(dual))
        gram = self._functionals @ self._vectors.T
        if np.max(np.abs(gram - np.eye(self.dim))) > tol:
            raise PreconditionError('Frame functionals are not '
                                    'biorthogonal')
        return self

    def to_dict(self):
        return {'sigma': self._sigma, 'space': self._space.to_dict(),
                'vectors': self._vectors.tolist()}


class AveragingBox(object):
    """
    ``r conv{+-a_i : i <= sigma} + delta sum_{i > sigma} [-a_i, a_i]``,
    an l_1 ball of radius r in E times a cube of half width delta.
    Volumes are measured in frame coordinates.
    """

    def __init__(self, frame, radius, delta, n=None, k=None):
        self.frame = frame
        self.radius = float(radius)
        self.delta = float(delta)
        self.n = n
        self.k = k

    @property
    def sigma(self):
        return self.frame.sigma

    @property
    def dim(self):
        return self.frame.dim

    def volume(self):
        """
        2^phi r^sigma delta^(phi - sigma) / sigma!
        """
        return (2.0 ** self.dim * self.radius ** self.sigma *
                self.delta ** (self.dim - self.sigma) /
                math.factorial(self.sigma))

    def section_volume(self):
        """
        Volume of the box with one base coordinate removed,
        2^(phi-1) r^(sigma-1) delta^(phi-sigma) / (sigma-1)!
        """
        return (2.0 ** (self.dim - 1) * self.radius ** (self.sigma - 1) *
                self.delta ** (self.dim - self.sigma) /
                math.factorial(self.sigma - 1))

    def measure_ratio(self):
        return self.sigma / (2.0 * self.radius)

    def diameter(self):
        """
        Triangle inequality bound 2 (r + (phi - sigma) delta)
        """
        return 2.0 * (self.radius + (self.dim - self.sigma) * self.delta)

    def _cube(self, rng, count):
        return rng.uniform(-self.delta, self.delta,
                           size=(count, self.dim - self.sigma))

    def sample_coords(self, rng, count):
        """
        Uniform samples in frame coordinates
        """
        base = uniform_lp_ball(rng, count, self.sigma, 1.0) * self.radius
        return np.hstack((base, self._cube(rng, count)))

    def sample(self, rng, count):
        return self.frame.from_coords(self.sample_coords(rng, count))

    def sample_section(self, rng, count, i):
        """
        Uniform points of the section through coordinate `i` (0-based)
        together with the half length of the chord along a_i

        :return: (coords with coordinate i set to 0, half lengths)
        """
        if i < self.sigma:
            others = uniform_lp_ball(rng, count, self.sigma - 1, 1.0)
            others = others * self.radius
            half = self.radius - np.abs(others).sum(axis=1)
            base = np.insert(others, i, 0.0, axis=1)
            coords = np.hstack((base, self._cube(rng, count)))
        else:
            coords = self.sample_coords(rng, count)
            coords[:, i] = 0.0
            half = np.full(count, self.delta)
        return coords, half

    def to_dict(self):
        return {'n': self.n, 'k': self.k, 'sigma': self.sigma,
                'phi': self.dim, 'radius': self.radius,
                'delta': self.delta, 'volume': self.volume(),
                'measure_ratio': self.measure_ratio()}


def build_box(n, k, frame, r_n, delta_k):
    """
    The averaging box B_{n,k} over `frame`

    :raises PreconditionError: on a non Auerbach frame, r_n <= 0 or
                               delta_k < 0
    :rtype: :py:class:`AveragingBox`
    """
    if not r_n > 0:
        raise PreconditionError('Box radius must be positive: ' + str(r_n))
    if not delta_k >= 0:
        raise PreconditionError('Box thickness must be nonnegative: ' +
                                str(delta_k))
    frame.check_auerbach()
    return AveragingBox(frame, r_n, delta_k, n=n, k=k)


class AveragedDerivative(object):
    """
    Mean derivative over a box. Column j is the averaged derivative
    along a_{directions[j]} in the output coordinates of the map.
    """

    def __init__(self, matrix, directions, estimator, step, samples,
                 stderr, workers=1):
        self.matrix = matrix
        self.directions = list(directions)
        self.estimator = estimator
        self.step = step
        self.samples = samples
        self.stderr = stderr
        self.workers = workers

    def to_dict(self):
        return {'matrix': self.matrix.tolist(),
                'directions': self.directions,
                'estimator': self.estimator, 'step': self.step,
                'samples': self.samples,
                'stderr': float(np.max(self.stderr, initial=0.0)),
                'workers': self.workers}


def _centered(func, x, v, step, floor):
    while True:
        try:
            return (np.asarray(func(x + step * v), dtype=float) -
                    np.asarray(func(x - step * v), dtype=float)), step
        except PreconditionError as e:
            if step / 10.0 < floor:
                raise SamplingError('Finite difference step underflow '
                                    'below ' + str(floor) + ': ' + str(e))
            logger.warning('Shrinking finite difference step from ' +
                           str(step) + ' to ' + str(step / 10.0))
            step = step / 10.0


def _fd_chunk(func, box, directions, step, floor, count, seed_seq):
    rng = np.random.default_rng(seed_seq)
    x = box.sample(rng, count)
    sums, squares, steps = [], [], []
    for j in directions:
        diff, used = _centered(func, x, box.frame.vectors[j], step, floor)
        values = diff / (2.0 * used)
        sums.append(values.sum(axis=0))
        squares.append((values * values).sum(axis=0))
        steps.append(used)
    weights = np.full(len(directions), float(count))
    return np.array(sums), np.array(squares), weights, min(steps)


def _segment_chunk(func, box, directions, step, floor, count, seed_seq):
    rng = np.random.default_rng(seed_seq)
    frame = box.frame
    sums, squares, weights, steps = [], [], [], [step]
    for j in directions:
        if j >= box.sigma and box.delta == 0.0:
            # flat direction, no chord to integrate along
            x = box.sample(rng, count)
            diff, used = _centered(func, x, frame.vectors[j], step, floor)
            values = diff / (2.0 * used)
            sums.append(values.sum(axis=0))
            squares.append((values * values).sum(axis=0))
            weights.append(float(count))
            steps.append(used)
            continue
        coords, half = box.sample_section(rng, count, j)
        shift = np.zeros_like(coords)
        shift[:, j] = half
        upper = frame.from_coords(coords + shift)
        lower = frame.from_coords(coords - shift)
        diff = (np.asarray(func(upper), dtype=float) -
                np.asarray(func(lower), dtype=float))
        sums.append(diff.sum(axis=0))
        squares.append((diff * diff).sum(axis=0))
        weights.append(float(np.sum(2.0 * half)))
    return np.array(sums), np.array(squares), np.array(weights), min(steps)


def average_derivative(func, box, directions=None, samples=4000,
                       fd_step=None, seed=0, estimator='fd', workers=1):
    """
    Averaged derivative (1 / |B|) integral over B of dR(x)[a_j].

    ``fd`` averages centered differences (f(x + h a_j) - f(x - h a_j))
    / 2h over uniform x in the box. The step defaults to 1e-4 times
    the box diameter and shrinks tenfold whenever the map rejects an
    evaluation point.

    ``segment`` integrates along chords: by Fubini the average equals
    the mean endpoint difference over the section divided by the mean
    chord length. The ratio form makes it exact for linear maps.

    :param func: map acting on row batches of G coordinates
    :param box: the box
    :type box: :py:class:`AveragingBox`
    :param directions: 0-based frame indices, all by default
    :raises PreconditionError: on an unknown estimator or a bad step
    :raises SamplingError: if the step underflows
    :rtype: :py:class:`AveragedDerivative`
    """
    if estimator not in ESTIMATORS:
        raise PreconditionError('Unknown estimator: ' + str(estimator))
    if samples < 1:
        raise PreconditionError('samples must be at least 1')
    if directions is None:
        directions = list(range(box.dim))
    diameter = box.diameter()
    step = FD_RELATIVE_STEP * diameter if fd_step is None else fd_step
    if not step > 0:
        raise PreconditionError('Finite difference step must be '
                                'positive: ' + str(step))
    floor = MIN_RELATIVE_STEP * diameter
    worker = _fd_chunk if estimator == 'fd' else _segment_chunk
    tasks = [(func, box, directions, step, floor, count, seq)
             for count, seq in core.chunk_plan(seed, samples)]
    results = core.run_chunks(worker, tasks, workers=workers)

    sums = results[0][0]
    squares = results[0][1]
    weights = results[0][2]
    used = results[0][3]
    for part in results[1:]:
        sums = sums + part[0]
        squares = squares + part[1]
        weights = weights + part[2]
        used = min(used, part[3])
    means = sums / weights[:, None]
    # ratio estimator error, the chord mean is 1 for differences
    spread = np.sqrt(np.maximum(squares / samples -
                                (sums / samples) ** 2, 0.0) / samples)
    spread = spread / (weights / samples)[:, None]
    logger.debug(estimator + ' derivative over ' + str(samples) +
                 ' samples, step ' + str(used))
    return AveragedDerivative(means.T, directions, estimator, used,
                              samples, spread.T, workers=workers)


def compare_estimators(func, box, samples=4000, seed=0, workers=1):
    """
    Both estimators on the base directions a_1..a_sigma

    :return: (fd, segment, largest entry difference)
    :rtype: tuple
    """
    base = list(range(box.sigma))
    fd = average_derivative(func, box, directions=base, samples=samples,
                            seed=seed, estimator='fd', workers=workers)
    seg = average_derivative(func, box, directions=base, samples=samples,
                             seed=seed, estimator='segment',
                             workers=workers)
    return fd, seg, float(np.max(np.abs(fd.matrix - seg.matrix)))


def _final_bound(lipschitz, epsilon):
    if epsilon >= 1.0:
        return float('inf')
    return 8.0 * lipschitz / (1.0 - epsilon)


class ProjectionCertificate(object):
    """
    The projection P~ = (P|_E)^-1 o P with its checks. `matrix` maps
    frame coordinates of G to frame coordinates of E and is None when
    the restriction is singular.
    """

    def __init__(self, matrix, norm, lipschitz, epsilon, identity_residual,
                 idempotence_residual, restriction_deviation,
                 singular=False, diagnostics=None, tol=PROJECTION_TOL):
        self.matrix = matrix
        self.norm = norm
        self.lipschitz = float(lipschitz)
        self.epsilon = float(epsilon)
        self.identity_residual = identity_residual
        self.idempotence_residual = idempotence_residual
        self.restriction_deviation = restriction_deviation
        self.singular = singular
        self.diagnostics = diagnostics
        self.tol = tol
        self.bound_4L = 4.0 * self.lipschitz
        self.bound_final = _final_bound(self.lipschitz, self.epsilon)
        self.margin_4L = NORM_MARGIN * self.bound_4L
        self.margin_final = _final_bound(NORM_MARGIN * self.lipschitz,
                                         self.epsilon)

    @property
    def pass_4L(self):
        return (not self.singular and
                self.norm <= self.bound_4L + self.tol)

    @property
    def lambda_bound(self):
        """
        2 ||P~|| / (1 - eps), the resulting bound on lambda(E, X)
        """
        if self.singular:
            return float('inf')
        if self.epsilon >= 1.0:
            return float('inf')
        return 2.0 * self.norm / (1.0 - self.epsilon)

    @property
    def pass_final(self):
        return (not self.singular and
                self.lambda_bound <= self.bound_final + self.tol)

    @property
    def half_condition(self):
        """
        ||Px - x|| <= ||x|| / 2 on E
        """
        return (self.restriction_deviation is not None and
                self.restriction_deviation <= 0.5)

    @property
    def passed(self):
        return (self.pass_4L and self.identity_residual <= self.tol and
                self.idempotence_residual <= self.tol)

    def to_dict(self):
        return {'matrix': (None if self.matrix is None
                           else self.matrix.tolist()),
                'norm': self.norm, 'lipschitz': self.lipschitz,
                'epsilon': self.epsilon,
                'bound_4L': self.bound_4L,
                'bound_final': _json_float(self.bound_final),
                'margin_4L': self.margin_4L,
                'margin_final': _json_float(self.margin_final),
                'lambda_bound': _json_float(self.lambda_bound),
                'identity_residual': self.identity_residual,
                'idempotence_residual': self.idempotence_residual,
                'restriction_deviation': self.restriction_deviation,
                'half_condition': self.half_condition,
                'singular': self.singular,
                'diagnostics': self.diagnostics,
                'pass_4L': self.pass_4L, 'pass_final': self.pass_final,
                'pass': self.passed}


def _json_float(value):
    return value if math.isfinite(value) else None


def _sphere_probes(space, rng, samples):
    probes = [space.sample_sphere(rng, samples)]
    eye = np.eye(space.dim)
    signs = rng.choice(np.array([-1.0, 1.0]), size=(samples, space.dim))
    for extra in (eye, signs):
        probes.append(extra / space.norm(extra)[:, None])
    return np.vstack(probes)


def _frame_operator_norm(op, frame, rng, samples):
    """
    sup over the unit sphere of G of ||op x|| with op in frame
    coordinates, from below
    """
    x = _sphere_probes(frame.space, rng, samples)
    out = frame.to_coords(x) @ op.T
    images = out @ frame.e_vectors
    return float(np.max(frame.e_norm(images) / frame.space.norm(x)))


def _restriction_deviation(restriction, frame, rng, samples):
    e_space = frame.e_space
    y = _sphere_probes(e_space, rng, samples)
    c = frame.e_coords(y)
    moved = (c @ restriction.T - c) @ frame.e_vectors
    return float(np.max(e_space.norm(moved) / e_space.norm(y)))


def extract_projection(avg_op, frame, lipschitz=1.0, epsilon=0.5,
                       samples=20000, seed=0, tol=PROJECTION_TOL):
    """
    Turns the averaged operator P: G -> E into the projection
    P~ = (P|_E)^-1 o P and checks it.

    A singular restriction does not raise, the certificate fails and
    carries the diagnostics.

    :param avg_op: averaged derivative or matrix of shape (sigma, phi)
                   whose columns are P(a_j) in coordinates of E
    :param frame: frame of G
    :type frame: :py:class:`Frame`
    :param lipschitz: ||R||, enters the 4 ||R|| and 8 ||R|| / (1 - eps)
                      bounds
    :param samples: sphere samples of the norm estimate
    :raises PreconditionError: on a shape mismatch
    :rtype: :py:class:`ProjectionCertificate`
    """
    matrix = np.asarray(getattr(avg_op, 'matrix', avg_op), dtype=float)
    sigma = frame.sigma
    if matrix.shape != (sigma, frame.dim):
        raise PreconditionError('Averaged operator has shape ' +
                                str(matrix.shape) + ', expected ' +
                                str((sigma, frame.dim)))
    rng = np.random.default_rng(seed)
    in_frame = np.linalg.inv(frame.e_vectors).T @ matrix
    restriction = in_frame[:, :sigma]
    deviation = _restriction_deviation(restriction, frame, rng, samples)
    condition = np.linalg.cond(restriction)
    if not np.isfinite(condition) or condition > SINGULAR_CONDITION:
        message = ('Restriction of the averaged operator to E is '
                   'singular, condition number ' + str(condition) +
                   ', ||Px - x|| / ||x|| up to ' + str(deviation))
        logger.warning(message)
        return ProjectionCertificate(None, float('inf'), lipschitz, epsilon,
                                     float('inf'), float('inf'), deviation,
                                     singular=True, diagnostics=message,
                                     tol=tol)
    projection = np.linalg.solve(restriction, in_frame)
    identity = float(np.max(np.abs(projection[:, :sigma] -
                                   np.eye(sigma))))
    idempotence = float(np.max(np.abs(projection[:, :sigma] @ projection -
                                      projection)))
    norm = _frame_operator_norm(projection, frame, rng, samples)
    diagnostics = None
    if deviation > 0.5:
        diagnostics = ('||Px - x|| / ||x|| reaches ' + str(deviation) +
                       ' on E, above 1/2')
    logger.info('Projection norm ' + str(norm) + ' against 4L = ' +
                str(4.0 * lipschitz))
    return ProjectionCertificate(projection, norm, lipschitz, epsilon,
                                 identity, idempotence, deviation,
                                 diagnostics=diagnostics, tol=tol)


def write_projection_csv(path, certificate, frame):
    """
    Row-major CSV dump of P~ with a commented metadata header
    """
    header = ['sigma: ' + str(frame.sigma),
              'phi: ' + str(frame.dim),
              'frame: ' + ','.join(str(v) for v in
                                   frame.vectors.ravel().tolist()),
              'norm: ' + str(certificate.norm),
              'bound_4L: ' + str(certificate.bound_4L),
              'pass_4L: ' + str(certificate.pass_4L)]
    matrix = certificate.matrix
    if matrix is None:
        matrix = np.zeros((0, frame.dim))
    np.savetxt(path, matrix, delimiter=',', fmt='%.17g',
               header='\n'.join(header))


class EpsilonNetNorm(object):
    """
    |x| = max_j |f_j(x)| for a symmetric table of dual norm one
    functionals, the norm of the isometric image of x in l_inf^N
    """

    def __init__(self, space, functionals, epsilon):
        self.space = space
        self.functionals = np.asarray(functionals, dtype=float)
        self.epsilon = float(epsilon)

    @property
    def size(self):
        return self.functionals.shape[0]

    @property
    def size_bound(self):
        return smallness.net_size_bound(self.space.dim, self.epsilon)

    def embed(self, x):
        return np.asarray(x, dtype=float) @ self.functionals.T

    def norm(self, x):
        return np.max(np.abs(self.embed(x)), axis=-1)

    def __call__(self, x):
        return self.norm(x)

    def sandwich_violation(self, samples=4000, seed=0, tol=1e-9):
        """
        Worst sampled point of (1 - eps) ||x|| <= |x| <= ||x||

        :return: (excess, witness), excess <= 0 when the sandwich holds
        """
        rng = np.random.default_rng(seed)
        x = _sphere_probes(self.space, rng, samples)
        if self.space.dim == 2:
            angles = np.linspace(0.0, 2.0 * np.pi, 4 * samples,
                                 endpoint=False)
            ring = np.column_stack((np.cos(angles), np.sin(angles)))
            x = np.vstack((x, ring / self.space.norm(ring)[:, None]))
        base = self.space.norm(x)
        net = self.norm(x)
        excess = np.maximum(net - base - tol,
                            (1.0 - self.epsilon) * base - net - tol)
        worst = int(np.argmax(excess))
        return float(excess[worst]), x[worst]

    def to_dict(self):
        return {'epsilon': self.epsilon, 'size': self.size,
                'size_bound': self.size_bound,
                'functionals': self.functionals.tolist()}


def _dual_norms(space, rows):
    return np.array([space.dual_norm(row) for row in rows])


def _greedy_net(space, epsilon, candidates):
    net = []
    for f in candidates:
        if net:
            gaps = _dual_norms(space, np.asarray(net) - f)
            if np.min(gaps) <= epsilon:
                continue
        net.append(f)
        net.append(-f)
    return np.asarray(net)


def epsnet_polyhedral_norm(space, epsilon, functionals=None, samples=2000,
                           seed=0, check_samples=4000):
    """
    Polyhedral norm from an epsilon net of the dual sphere.

    Without `functionals` a symmetric net is built greedily from
    normalized random functionals, which keeps it epsilon separated
    and so below floor((1 + 2/eps)^n) elements.

    :param space: the normed space
    :type space: :py:class:`lipretract.core.BlockSpace`
    :param epsilon: covering radius, in (0, 1]
    :param functionals: optional table of dual norm one functionals
    :raises PreconditionError: if a given functional has dual norm
                               other than one
    :raises NetConstructionError: if the sandwich fails (the witness is
                                  attached) or a greedy net is asked
                                  for in more than 4 dims
    :rtype: :py:class:`EpsilonNetNorm`
    """
    epsilon = smallness.check_epsilon(epsilon)
    if functionals is None:
        if space.dim > GREEDY_DIM_LIMIT:
            raise NetConstructionError('Greedy nets are limited to ' +
                                       str(GREEDY_DIM_LIMIT) + ' dims')
        rng = np.random.default_rng(seed)
        gauss = rng.standard_normal(size=(samples, space.dim))
        candidates = gauss / _dual_norms(space, gauss)[:, None]
        table = _greedy_net(space, epsilon, candidates)
        logger.info('Greedy net of ' + str(table.shape[0]) +
                    ' functionals for epsilon=' + str(epsilon))
    else:
        table = np.atleast_2d(np.asarray(functionals, dtype=float))
        duals = _dual_norms(space, table)
        bad = np.nonzero(np.abs(duals - 1.0) > 1e-9)[0]
        if len(bad) > 0:
            raise PreconditionError('Functionals must have dual norm one, '
                                    'got ' + str(duals[bad[0]]))
    result = EpsilonNetNorm(space, table, epsilon)
    excess, witness = result.sandwich_violation(samples=check_samples,
                                                seed=seed + 1)
    if excess > 0.0:
        raise NetConstructionError('Net too coarse: sandwich violated by ' +
                                   str(excess) + ' at ' +
                                   str(witness.tolist()), witness=witness)
    return result


class PiPlan(object):
    """
    Resolved parameters of one index n
    """

    def __init__(self, n, sigma_n, phi_nominal, g_dim, height, radius,
                 lipschitz):
        self.n = n
        self.sigma_n = sigma_n
        self.phi_nominal = phi_nominal
        self.phi = g_dim
        self.height = float(height)
        self.radius = float(radius)
        self.lipschitz = float(lipschitz)
        self.tau = self.phi * self.height / self.lipschitz
        self.rho = self.height * (self.phi + 2)
        if self.tau > 0:
            self.budget = self.lipschitz * (
                1.0 + self.phi * self.height / (self.lipschitz * self.tau))
        else:
            self.budget = self.lipschitz
        if self.radius > 0:
            self.seam_bound = self.sigma_n * self.rho / self.radius
        else:
            self.seam_bound = float('inf')
        self.condition_bound = self.sigma_n * self.seam_bound

    def ladder_bound(self, delta):
        """
        (sigma ||R_n|| phi delta + sigma rho) / r, the seam bound at a
        box thickness delta
        """
        if self.radius <= 0:
            return float('inf')
        return (self.sigma_n * self.budget * self.phi * delta +
                self.sigma_n * self.rho) / self.radius

    def to_dict(self):
        return {'n': self.n, 'sigma': self.sigma_n,
                'phi_nominal': self.phi_nominal, 'phi': self.phi,
                'height': self.height, 'inner_radius': self.radius,
                'lipschitz': self.lipschitz, 'tau': self.tau,
                'rho': self.rho, 'budget': self.budget,
                'seam_bound': _json_float(self.seam_bound),
                'condition_bound': _json_float(self.condition_bound)}


def _g_dim(space, phi_n):
    """
    Smallest block boundary at or above min(phi_n, dim)
    """
    target = min(phi_n, space.dim)
    return int(space.offsets[np.searchsorted(space.offsets, target)])


def pi_plan(compact, epsilon=smallness.DEFAULT_EPSILON, sigma=None,
            depths=(1,), lipschitz=1.0):
    """
    sigma(n), phi(n), h_n, r_n, tau_n = phi h_n / L, rho_n = h_n (phi + 2)
    and the smoothing budget for every n in `depths`, without running
    anything.

    G is truncated to the space when phi(n) exceeds its dimension and
    widened to whole blocks, and phi then means dim G.

    :rtype: list
    """
    epsilon = smallness.check_epsilon(epsilon)
    func = smallness.resolve_sigma(sigma)
    space = compact.space
    plans = []
    for n in depths:
        s = int(func(n))
        if s > space.dim:
            raise PreconditionError('sigma(' + str(n) + ') = ' + str(s) +
                                    ' exceeds the dimension ' +
                                    str(space.dim))
        nominal = smallness.phi(n, epsilon, sigma=func)
        g_dim = _g_dim(space, max(nominal, s))
        if g_dim < nominal:
            logger.info('G truncated to ' + str(g_dim) + ' of phi(' +
                        str(n) + ')=' + str(nominal) + ' dims')
        plans.append(PiPlan(n, s, nominal, g_dim,
                            smallness.height(compact, n=s),
                            smallness.inner_radius(compact, n=s),
                            lipschitz))
    return plans


class LadderStep(object):
    """
    Averaged operator at one box thickness
    """

    def __init__(self, delta, seam_error, seam_bound, derivative):
        self.delta = delta
        self.seam_error = seam_error
        self.seam_bound = seam_bound
        self.derivative = derivative

    @property
    def within(self):
        return self.seam_error <= self.seam_bound

    def to_dict(self):
        return {'delta': self.delta, 'seam_error': self.seam_error,
                'seam_bound': _json_float(self.seam_bound),
                'within': self.within}


class PiStage(object):
    """
    Pipeline outcome for one n
    """

    def __init__(self, plan, steps=None, trend=None, certificate=None,
                 diagnostics=None):
        self.plan = plan
        self.steps = steps or []
        self.trend = trend
        self.certificate = certificate
        self.diagnostics = diagnostics

    @property
    def passed(self):
        return (self.diagnostics is None and self.certificate is not None
                and self.certificate.passed)

    def to_row(self):
        cert = self.certificate
        seam = self.steps[-1].seam_error if self.steps else None
        return [self.plan.n, self.plan.sigma_n, self.plan.phi,
                self.plan.height, self.plan.radius, self.plan.tau,
                self.plan.rho, self.plan.budget, seam,
                None if cert is None else cert.norm,
                4.0 * self.plan.lipschitz,
                'PASS' if self.passed else 'FAIL']

    def to_dict(self):
        return {'plan': self.plan.to_dict(),
                'ladder': [s.to_dict() for s in self.steps],
                'trend': self.trend,
                'certificate': (None if self.certificate is None
                                else self.certificate.to_dict()),
                'diagnostics': self.diagnostics, 'pass': self.passed}


class PiReport(object):
    """
    Per-n stages with the uniform verdict
    """

    ROW_HEADER = ['n', 'sigma', 'phi', 'height', 'inner_radius', 'tau',
                  'rho', 'budget', 'seam_error', 'norm', 'bound_4L',
                  'pass']

    def __init__(self, stages, lipschitz, epsilon, smallness_certificate,
                 lipschitz_note=None):
        self.stages = list(stages)
        self.lipschitz = lipschitz
        self.epsilon = epsilon
        self.smallness = smallness_certificate
        self.lipschitz_note = lipschitz_note

    @property
    def passed(self):
        return bool(self.stages) and all(s.passed for s in self.stages)

    @property
    def uniform_norm(self):
        norms = [s.certificate.norm for s in self.stages
                 if s.certificate is not None]
        return max(norms) if norms else None

    @property
    def final_bound(self):
        return _final_bound(self.lipschitz, self.epsilon)

    def to_rows(self):
        return [s.to_row() for s in self.stages]

    def to_dict(self):
        return {'lipschitz': self.lipschitz,
                'lipschitz_note': self.lipschitz_note,
                'epsilon': self.epsilon,
                'smallness': (None if self.smallness is None
                              else self.smallness.to_dict()),
                'stages': [s.to_dict() for s in self.stages],
                'uniform_norm': self.uniform_norm,
                'final_bound': _json_float(self.final_bound),
                'pass': self.passed}


def _trend(steps):
    if len(steps) < 2:
        return None
    deltas = np.array([s.delta for s in steps])
    errors = np.array([s.seam_error for s in steps])
    slope, intercept = np.polyfit(deltas, errors, 1)
    order = np.argsort(deltas)
    return {'slope': float(slope), 'intercept': float(intercept),
            'monotone': bool(np.all(np.diff(errors[order]) >= -1e-12))}


def _truncated_retraction(retraction, dim, sigma):
    def mapped(y):
        y = np.atleast_2d(np.asarray(y, dtype=float))
        full = np.zeros((y.shape[0], dim))
        full[:, :y.shape[1]] = y
        return np.atleast_2d(retraction(full))[:, :sigma]
    return mapped


def _seam_error(derivative, frame):
    sigma = frame.sigma
    moved = derivative.matrix[:, :sigma].T - frame.e_vectors
    return float(np.max(frame.e_norm(moved)))


def _run_stage(plan, space, retraction, epsilon, ladder, samples,
               smoothing_samples, estimator, seed, workers, norm_samples):
    g_blocks = space.blocks_spanning(plan.phi)
    g_space = space.truncate(g_blocks)
    frame = Frame.coordinate(g_space, plan.sigma_n)
    base = _truncated_retraction(retraction, space.dim, plan.sigma_n)
    if plan.tau > 0:
        mapped = begun_smooth(base, plan.tau, samples=smoothing_samples,
                              seed=seed, space=g_space,
                              lipschitz=plan.lipschitz,
                              defect=plan.height)
    else:
        logger.info('Height vanishes at n=' + str(plan.n) +
                    ', no smoothing needed')
        mapped = base
    steps = []
    for k, relative in enumerate(sorted(ladder, reverse=True), start=1):
        delta = relative * plan.radius
        box = build_box(plan.n, k, frame, plan.radius, delta)
        derivative = average_derivative(mapped, box, samples=samples,
                                        seed=seed + k, estimator=estimator,
                                        workers=workers)
        steps.append(LadderStep(delta, _seam_error(derivative, frame),
                                plan.ladder_bound(delta), derivative))
        logger.debug('n=' + str(plan.n) + ' delta=' + str(delta) +
                     ' seam error ' + str(steps[-1].seam_error))
    certificate = extract_projection(steps[-1].derivative, frame,
                                     lipschitz=plan.lipschitz,
                                     epsilon=epsilon, samples=norm_samples,
                                     seed=seed)
    return PiStage(plan, steps, _trend(steps), certificate,
                   diagnostics=certificate.diagnostics
                   if certificate.singular else None)


def pi_certificate(space, compact, retraction,
                   epsilon=smallness.DEFAULT_EPSILON, sigma=None,
                   depths=(1,), lipschitz=None, pairs=20000,
                   ladder=DEFAULT_LADDER, samples=2000, smoothing_samples=64,
                   estimator='segment', seed=0, workers=1,
                   norm_samples=20000, require_small=True):
    """
    Runs smoothing, averaging and extraction for every n in `depths`
    and compares ||P~_n|| with 4 ||R|| and 2 ||P~_n|| / (1 - eps) with
    8 ||R|| / (1 - eps).

    A failing n yields a diagnostic in its stage, the other n still
    run.

    :param retraction: map onto `compact` acting on row batches
    :param lipschitz: ||R||, estimated from `pairs` sampled pairs when
                      None (a lower estimate)
    :param ladder: box thicknesses relative to r_n, the smallest one is
                   certified
    :param require_small: raise unless the smallness certificate passes
    :raises PreconditionError: if the compact lives in another space or
                               is not small when required
    :rtype: :py:class:`PiReport`
    """
    if compact.space != space:
        raise PreconditionError('Compact lives in ' + repr(compact.space) +
                                ', not ' + repr(space))
    epsilon = smallness.check_epsilon(epsilon)
    func = smallness.resolve_sigma(sigma)
    depths = list(depths)
    cert = None
    if require_small:
        cert = smallness.check_small(compact, epsilon=epsilon, sigma=func,
                                     depth=max(depths))
        if not cert.passed:
            raise PreconditionError('Smallness certificate failed for '
                                    'epsilon=' + str(epsilon))
    note = None
    if lipschitz is None:
        sampler = getattr(compact, 'pair_sampler', None)
        sampler = sampler() if sampler else PairSampler(space)
        report = core.estimate_lipschitz(retraction, sampler, pairs, seed,
                                         workers=workers)
        lipschitz = report.estimate
        note = report.note
    plans = pi_plan(compact, epsilon, sigma=func, depths=depths,
                    lipschitz=lipschitz)
    stages = []
    for plan in plans:
        try:
            stages.append(_run_stage(plan, space, retraction, epsilon,
                                     ladder, samples, smoothing_samples,
                                     estimator, seed + 1000 * plan.n,
                                     workers, norm_samples))
        except LipRetractError as e:
            logger.error('Stage n=' + str(plan.n) + ' failed: ' + str(e))
            stages.append(PiStage(plan, diagnostics=str(e)))
    return PiReport(stages, lipschitz, epsilon, cert, lipschitz_note=note)
