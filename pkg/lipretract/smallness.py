# -*- coding: utf-8 -*-

"""
Inner radii, heights and smallness certificates of bounded convex sets.

A set K is small with respect to a fundamental sequence (e_n), an
epsilon in (0, 1) and a strictly increasing index map sigma when

    0 < h_s / r_s <= 1 / (2 s^2 ((1 + 2/eps)^s + 2)),  s = sigma(n)

for every n, where r_k is the inner radius of K in span(e_1..e_k) and
h_k the largest distance from a point of K to that span.

Sets are duck typed. Anything with a ``space`` attribute and a
``contains`` method works through the numeric path; sets that also
provide ``inner_radius_analytic`` and ``height_analytic`` (diamonds)
use the closed forms whenever the subspace is a union of whole blocks.
"""

import logging
import math

import numpy as np
from scipy.optimize import minimize

from lipretract.exceptions import PreconditionError

logger = logging.getLogger(__name__)

PHI_CAP = 10 ** 9

DEFAULT_EPSILON = 0.5

DEFAULT_ETA = 0.05
"""
Relative safety margin of numeric estimates: inner radii are shrunk
and heights inflated by this factor
"""


def check_epsilon(epsilon):
    """
    :raises PreconditionError: unless 0 < epsilon <= 1
    """
    if not 0.0 < epsilon <= 1.0:
        raise PreconditionError('epsilon must lie in (0, 1]: ' +
                                str(epsilon))
    return float(epsilon)


def identity_sigma(n):
    return int(n)


def triangular_sigma(n):
    """
    sigma(1) = 1 and sigma(n) = sigma(n-1) + n
    """
    if n < 1:
        raise PreconditionError('sigma is defined for n >= 1')
    return n * (n + 1) // 2


def resolve_sigma(sigma):
    """
    Turns a sigma specification into a callable

    :param sigma: None or 'identity' for the identity, 'triangular',
                  a sequence (sigma(1), sigma(2), ...) or a callable
    :raises PreconditionError: on unknown names
    """
    if sigma is None or sigma == 'identity':
        return identity_sigma
    if sigma == 'triangular':
        return triangular_sigma
    if callable(sigma):
        return sigma
    if isinstance(sigma, str):
        raise PreconditionError('Unknown sigma: ' + sigma)
    values = [int(v) for v in sigma]

    def lookup(n):
        if n < 1 or n > len(values):
            raise PreconditionError('sigma not defined at ' + str(n))
        return values[n - 1]
    return lookup


def sigma_values(sigma, count):
    """
    sigma(1..count), checked to be strictly increasing and positive
    """
    func = resolve_sigma(sigma)
    values = [int(func(n)) for n in range(1, count + 1)]
    if values and values[0] < 1:
        raise PreconditionError('sigma must be positive')
    if any(b <= a for a, b in zip(values, values[1:])):
        raise PreconditionError('sigma must be strictly increasing: ' +
                                str(values))
    return values


def smallness_bound_value(s, epsilon):
    """
    1 / (2 s^2 ((1 + 2/eps)^s + 2)) for a given s = sigma(n)
    """
    epsilon = check_epsilon(epsilon)
    if s < 1:
        raise PreconditionError('sigma(n) must be at least 1')
    return 1.0 / (2.0 * s * s * ((1.0 + 2.0 / epsilon) ** s + 2.0))


def smallness_bound(n, epsilon=DEFAULT_EPSILON, sigma=None):
    """
    Bound on h_{sigma(n)} / r_{sigma(n)} in the definition of small sets

    :param n: index, at least 1
    :param epsilon: in (0, 1]
    :param sigma: index map, identity by default
    :rtype: float
    """
    return smallness_bound_value(resolve_sigma(sigma)(n), epsilon)


def net_size_bound(dim, epsilon):
    """
    floor((1 + 2/eps)^dim), the size bound of an epsilon net of the
    unit sphere of a dim-dimensional space

    :raises PreconditionError: if the value exceeds 10^9
    """
    epsilon = check_epsilon(epsilon)
    log_value = dim * math.log(1.0 + 2.0 / epsilon)
    if log_value > math.log(PHI_CAP):
        raise PreconditionError('(1 + 2/eps)^' + str(dim) +
                                ' exceeds the cap of ' + str(PHI_CAP))
    return int(math.floor((1.0 + 2.0 / epsilon) ** dim + 1e-9))


def phi(n, epsilon=DEFAULT_EPSILON, sigma=None):
    """
    floor((1 + 2/eps)^sigma(n)), the dimension of the averaging space
    """
    return net_size_bound(resolve_sigma(sigma)(n), epsilon)


class FundamentalSequence(object):
    """
    Ordered vectors e_1, ..., e_N spanning the truncation, with the
    subspaces E_k = span(e_1..e_k)
    """

    def __init__(self, vectors):
        """
        :param vectors: array of shape (N, dim), one vector per row
        :raises PreconditionError: if the vectors are dependent
        """
        vectors = np.array(vectors, dtype=float)
        if vectors.ndim != 2 or vectors.shape[0] == 0:
            raise PreconditionError('Need a nonempty 2-D array of vectors')
        if np.linalg.matrix_rank(vectors) < vectors.shape[0]:
            raise PreconditionError('Fundamental sequence vectors are '
                                    'linearly dependent')
        vectors.setflags(write=False)
        self._vectors = vectors

    @staticmethod
    def canonical(space):
        """
        The coordinate vectors of `space`
        """
        return FundamentalSequence(np.eye(space.dim))

    @property
    def vectors(self):
        return self._vectors

    def __len__(self):
        return self._vectors.shape[0]

    def basis(self, k):
        """
        Rows e_1..e_k
        """
        if k < 0 or k > len(self):
            raise PreconditionError('Subspace index ' + str(k) +
                                    ' out of range 0..' + str(len(self)))
        return self._vectors[:k]

    def is_coordinate_prefix(self, k):
        """
        True if e_1..e_k are the first k coordinate vectors
        """
        dim = self._vectors.shape[1]
        return np.array_equal(self._vectors[:k], np.eye(dim)[:k])


def distance_to_span(space, x, basis):
    """
    Ambient distance from the rows of `x` to span(basis)

    Coordinate prefixes that end on a block boundary use the tail norm,
    Euclidean models use least squares and everything else is solved
    numerically starting from least squares.
    """
    x = np.atleast_2d(space.as_array(x))
    k = basis.shape[0]
    if k == 0:
        return space.norm(x)
    if k == space.dim:
        return np.zeros(x.shape[0])
    if (np.array_equal(basis, np.eye(space.dim)[:k]) and
            space.blocks_spanning(k) is not None):
        return space.norm(x - space.projection(x, space.blocks_spanning(k)))
    coef = np.linalg.lstsq(basis.T, x.T, rcond=None)[0].T
    if space.is_euclidean:
        return np.linalg.norm(x - coef @ basis, axis=1)
    out = np.empty(x.shape[0])
    for i, row in enumerate(x):
        start = space.norm(row - coef[i] @ basis)
        res = minimize(lambda c: float(space.norm(row - c @ basis)),
                       coef[i], method='Powell',
                       options={'xtol': 1e-12, 'ftol': 1e-14})
        out[i] = min(start, float(res.fun))
    return out


class BallSet(object):
    """
    The ball of radius `radius` of a block space, as a set with a
    membership test
    """

    def __init__(self, space, radius=1.0):
        self.space = space
        self.radius = float(radius)

    def contains(self, x, tol=0.0):
        return self.space.norm(x) <= self.radius + tol

    def sample_boundary(self, rng, count):
        return self.space.sample_sphere(rng, count) * self.radius

    def coordinate_bounds(self):
        return self.space.coordinate_bounds() * self.radius


def _boundary_distance(container, directions, center=None, hi=None,
                       steps=60):
    """
    Largest t with center + t u inside for every row u of directions,
    found by bisection
    """
    count, dim = directions.shape
    center = np.zeros(dim) if center is None else center
    if hi is None:
        hi = 2.0 * float(np.max(np.abs(container.coordinate_bounds()))) + 1
    lo = np.zeros(count)
    up = np.full(count, hi)
    for _ in range(steps):
        mid = 0.5 * (lo + up)
        inside = container.contains(center + directions * mid[:, None])
        lo = np.where(inside, mid, lo)
        up = np.where(inside, up, mid)
    return lo


def _subspace_directions(space, basis, rng, count):
    coefs = rng.standard_normal(size=(count, basis.shape[0]))
    dirs = coefs @ basis
    lengths = space.norm(dirs)
    lengths[lengths == 0.0] = 1.0
    return dirs / lengths[:, None]


def inner_radius(container, beta=None, n=None, samples=512, seed=0,
                 eta=DEFAULT_ETA):
    """
    Inner radius of `container` in E_n = span(e_1..e_n), centered at 0.

    The analytic formula is used for diamonds when E_n is a union of
    whole blocks. Otherwise unit directions of E_n are sampled, the
    boundary distance is found by bisection and the minimum is shrunk
    by the factor (1 - eta), giving a lower estimate.

    :return: radius, 0 when the origin is not an interior point
    :rtype: float
    """
    space = container.space
    if beta is None:
        beta = FundamentalSequence.canonical(space)
    n = len(beta) if n is None else n
    if n == 0:
        return 0.0
    basis = beta.basis(n)
    blocks = space.blocks_spanning(n)
    if (hasattr(container, 'inner_radius_analytic') and
            beta.is_coordinate_prefix(n) and blocks is not None):
        return float(container.inner_radius_analytic(blocks))
    if not np.all(container.contains(np.zeros((1, space.dim)))):
        return 0.0
    rng = np.random.default_rng(seed)
    dirs = _subspace_directions(space, basis, rng, samples)
    dirs = np.vstack((dirs, -dirs))
    reach = _boundary_distance(container, dirs)
    return float((1.0 - eta) * np.min(reach))


def height(container, beta=None, n=None, samples=512, seed=0,
           eta=DEFAULT_ETA):
    """
    sup over the set of the distance to E_n = span(e_1..e_n).

    Diamonds use the analytic value r_{n+1} when E_n is a union of
    whole blocks. Otherwise boundary points (and extreme points when
    the set lists them) are sampled and the largest distance is
    inflated by (1 + eta), giving an upper estimate.

    :rtype: float
    """
    space = container.space
    if beta is None:
        beta = FundamentalSequence.canonical(space)
    n = len(beta) if n is None else n
    if n >= space.dim:
        return 0.0
    blocks = space.blocks_spanning(n)
    if (hasattr(container, 'height_analytic') and
            beta.is_coordinate_prefix(n) and blocks is not None):
        return float(container.height_analytic(blocks))
    rng = np.random.default_rng(seed)
    pts = [container.sample_boundary(rng, samples)]
    if hasattr(container, 'extreme_points'):
        pts.append(container.extreme_points(rng, samples))
    pts = np.vstack(pts)
    dist = distance_to_span(space, pts, beta.basis(n))
    return float((1.0 + eta) * np.max(dist))


def grid_points(bounds, resolution):
    """
    Symmetric grid k * resolution covering 1.1 times the bounds
    """
    axes = []
    for b in bounds:
        steps = int(math.ceil(1.1 * b / resolution))
        axes.append(resolution * np.arange(-steps, steps + 1))
    mesh = np.meshgrid(*axes, indexing='ij')
    return np.stack([m.ravel() for m in mesh], axis=1)


def grid_inner_radius(container, n, resolution=1e-3):
    """
    Brute force inner radius of a set in dims <= 3: the smallest norm
    of a grid point of E_n (first n coordinates) outside the set

    :raises PreconditionError: above three dimensions
    """
    space = container.space
    if space.dim > 3:
        raise PreconditionError('Grid oracles are limited to 3 dims')
    bounds = container.coordinate_bounds()[:n]
    sub = grid_points(bounds, resolution)
    pts = np.zeros((sub.shape[0], space.dim))
    pts[:, :n] = sub
    outside = ~container.contains(pts)
    if not outside.any():
        return float(np.max(space.norm(pts)))
    return float(np.min(space.norm(pts[outside])))


def grid_height(container, n, resolution=1e-3):
    """
    Brute force height of a set in dims <= 3 with respect to the
    first n coordinates: the largest tail norm over grid points inside
    """
    space = container.space
    if space.dim > 3:
        raise PreconditionError('Grid oracles are limited to 3 dims')
    pts = grid_points(container.coordinate_bounds(), resolution)
    pts = pts[container.contains(pts)]
    tail = pts.copy()
    tail[:, :n] = 0.0
    return float(np.max(space.norm(tail), initial=0.0))


class SmallnessRecord(object):
    """
    One row of a smallness certificate
    """

    def __init__(self, n, sigma_n, inner_radius, height, bound, method):
        self.n = n
        self.sigma_n = sigma_n
        self.inner_radius = float(inner_radius)
        self.height = float(height)
        self.bound = float(bound)
        self.method = method
        if self.inner_radius > 0:
            self.ratio = self.height / self.inner_radius
        else:
            self.ratio = float('inf')
        self.passed = bool(0.0 < self.ratio <= self.bound)

    def to_row(self):
        return [self.n, self.sigma_n, self.inner_radius, self.height,
                self.ratio, self.bound, 'PASS' if self.passed else 'FAIL']

    def to_dict(self):
        return {'n': self.n, 'sigma': self.sigma_n,
                'inner_radius': self.inner_radius, 'height': self.height,
                'ratio': self.ratio if math.isfinite(self.ratio) else None,
                'bound': self.bound, 'method': self.method,
                'pass': self.passed}


class SmallnessCertificate(object):
    """
    Per-n smallness records with the overall verdict
    """

    ROW_HEADER = ['n', 'sigma', 'inner_radius', 'height', 'ratio',
                  'bound', 'pass']

    def __init__(self, epsilon, sigma, records):
        self.epsilon = epsilon
        self.sigma = list(sigma)
        self.records = list(records)

    @property
    def passed(self):
        return bool(self.records) and all(r.passed for r in self.records)

    def to_rows(self):
        return [r.to_row() for r in self.records]

    def to_dict(self):
        return {'epsilon': self.epsilon, 'sigma': self.sigma,
                'records': [r.to_dict() for r in self.records],
                'pass': self.passed}


def _measure(container, beta, k, samples, seed, eta):
    return (inner_radius(container, beta, k, samples=samples, seed=seed,
                         eta=eta),
            height(container, beta, k, samples=samples, seed=seed,
                   eta=eta))


def _is_analytic(container, beta, k):
    return (hasattr(container, 'inner_radius_analytic') and
            beta.is_coordinate_prefix(k) and
            container.space.blocks_spanning(k) is not None)


def check_small(container, beta=None, epsilon=DEFAULT_EPSILON, sigma=None,
                depth=None, samples=512, seed=0, eta=DEFAULT_ETA):
    """
    Smallness certificate of `container` for n = 1..depth.

    Numeric rows that pass are measured again with four times the
    samples and the more conservative values are kept, so a PASS does
    not depend on a lucky sample.

    :param depth: number of checked indices, defaults to the largest n
                  with sigma(n) below the length of beta
    :rtype: :py:class:`SmallnessCertificate`
    """
    epsilon = check_epsilon(epsilon)
    if beta is None:
        beta = FundamentalSequence.canonical(container.space)
    if depth is None:
        func = resolve_sigma(sigma)
        depth = 0
        while func(depth + 1) < len(beta):
            depth += 1
    values = sigma_values(sigma, depth)
    if values and values[-1] > len(beta):
        raise PreconditionError('sigma(' + str(depth) + ') = ' +
                                str(values[-1]) + ' exceeds the ' +
                                str(len(beta)) + ' basis vectors')
    records = []
    for n, s in enumerate(values, start=1):
        bound = smallness_bound_value(s, epsilon)
        analytic = _is_analytic(container, beta, s)
        r, h = _measure(container, beta, s, samples, seed, eta)
        record = SmallnessRecord(n, s, r, h, bound,
                                 'analytic' if analytic else 'numeric')
        if record.passed and not analytic:
            r4, h4 = _measure(container, beta, s, 4 * samples, seed + 1,
                              eta)
            record = SmallnessRecord(n, s, min(r, r4), max(h, h4), bound,
                                     'numeric')
        if record.inner_radius == 0.0:
            logger.warning('Inner radius vanishes at sigma(n)=' + str(s))
        logger.debug('smallness n=' + str(n) + ' ratio=' +
                     str(record.ratio) + ' bound=' + str(bound))
        records.append(record)
    return SmallnessCertificate(epsilon, values, records)

