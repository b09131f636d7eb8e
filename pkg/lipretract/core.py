# -*- coding: utf-8 -*-

"""
Finite dimensional block space model shared by every other module:
points addressed by block, ambient norms built from block norms,
canonical projections of the decomposition and the sampling based
estimators of Lipschitz constants and moduli of continuity.
"""

import logging
from concurrent.futures import ThreadPoolExecutor

import numpy as np
from scipy.optimize import linprog

from lipretract.exceptions import PreconditionError
from lipretract.exceptions import SamplingError

logger = logging.getLogger(__name__)

CHUNK_SIZE = 4096
"""
Number of pairs drawn from a single seed stream. Fixed so that
the sampled pairs never depend on the number of workers
"""

MAX_RESAMPLES = 100
"""
Number of times coincident pairs are redrawn before giving up
"""

LIPSCHITZ_NOTE = 'one-sided lower estimate of the true Lipschitz norm'

DEFAULT_SCALES = (1e-1, 1e-2, 1e-3)
"""
Distance scales used for local pairs
"""


def parse_exponent(value):
    """
    Converts a norm tag into an exponent

    :param value: one of 1, 2, inf given as number or string
    :return: exponent
    :rtype: float
    """
    if isinstance(value, str):
        cleaned = value.strip().lower()
        if cleaned in ('inf', 'infinity', 'max'):
            return np.inf
        value = cleaned
    try:
        p = float(value)
    except (TypeError, ValueError):
        raise PreconditionError('Unsupported norm tag: ' + str(value))
    if p not in (1.0, 2.0, np.inf):
        raise PreconditionError('Norm exponent must be one of '
                                '1, 2, inf: ' + str(value))
    return p


def dual_exponent(p):
    """
    Conjugate exponent q with 1/p + 1/q = 1

    :param p: exponent in {1, 2, inf}
    :type p: float
    :rtype: float
    """
    if p == 1.0:
        return np.inf
    if p == np.inf:
        return 1.0
    return p / (p - 1.0)


def exponent_tag(p):
    """
    Text form of an exponent as used in serialized spaces
    """
    if p == np.inf:
        return 'inf'
    return str(int(p))


def pnorm(values, p, axis=-1):
    """
    p-norm of `values` along `axis` for p in {1, 2, inf}

    :param values: array
    :param p: exponent
    :type p: float
    :return: array with `axis` removed
    """
    mags = np.abs(values)
    if p == 1.0:
        return mags.sum(axis=axis)
    if p == np.inf:
        return np.max(mags, axis=axis, initial=0.0)
    return np.sqrt((mags * mags).sum(axis=axis))


def uniform_lp_ball(rng, count, dim, p):
    """
    Exact uniform samples from the unit ball of l_p^dim

    :param rng: random generator
    :type rng: :py:class:`numpy.random.Generator`
    :param count: number of samples
    :param dim: dimension
    :param p: exponent in {1, 2, inf}
    :return: array of shape (count, dim)
    """
    if dim == 0:
        return np.zeros((count, 0))
    if p == np.inf:
        return rng.uniform(-1.0, 1.0, size=(count, dim))
    if p == 1.0:
        spacings = rng.exponential(size=(count, dim + 1))
        simplex = spacings[:, :dim] / spacings.sum(axis=1)[:, None]
        signs = rng.choice(np.array([-1.0, 1.0]), size=(count, dim))
        return simplex * signs
    gauss = rng.standard_normal(size=(count, dim))
    lengths = np.linalg.norm(gauss, axis=1)
    lengths[lengths == 0.0] = 1.0
    radii = rng.uniform(0.0, 1.0, size=count) ** (1.0 / dim)
    return gauss * (radii / lengths)[:, None]


class BlockSpace(object):
    """
    Finite truncation of a Banach space with a finite dimensional
    decomposition, given as an ordered list of blocks.

    Each block carries a dimension and a block norm. A block norm is
    either an exponent (1, 2 or inf) or a table of norming functionals
    (a 2-D array whose rows are functionals), in which case the block
    norm of y is ``max_j |f_j(y)|``. The ambient norm is the p-sum of
    the block norms.

    Blocks are addressed with 1-based indices, matching X_1, X_2, ...
    and the projections P_0 = 0, P_1, ..., P_N.
    """

    def __init__(self, dims, block_norm=2, ambient_rule=2, monotone=True):
        """
        Constructor

        :param dims: dimension of each block
        :type dims: list
        :param block_norm: norm tag shared by all blocks, a list with
                           one tag per block, or a 2-D array of
                           functionals shared by all blocks
        :param ambient_rule: exponent of the p-sum combining block norms
        :param monotone: asserts every canonical projection has norm 1
        :type monotone: bool
        :raises PreconditionError: on invalid dimensions or tags
        """
        dims = [int(d) for d in dims]
        if len(dims) == 0 or min(dims) < 1:
            raise PreconditionError('Every block needs a positive '
                                    'dimension: ' + str(dims))
        if isinstance(block_norm, (list, tuple)):
            if len(block_norm) != len(dims):
                raise PreconditionError('Expected ' + str(len(dims)) +
                                        ' block norms, got ' +
                                        str(len(block_norm)))
            raw_tags = list(block_norm)
        else:
            raw_tags = [block_norm] * len(dims)

        tags = []
        for dim, tag in zip(dims, raw_tags):
            tags.append(self._check_tag(tag, dim))
        self._dims = tuple(dims)
        self._tags = tuple(tags)
        self._ambient_p = parse_exponent(ambient_rule)
        self._monotone = bool(monotone)
        self._offsets = np.concatenate(([0], np.cumsum(dims))).astype(int)
        self._block_index = np.repeat(np.arange(len(dims)), dims)

    @staticmethod
    def _check_tag(tag, dim):
        """
        Validates a single block norm tag
        """
        if np.ndim(tag) == 2:
            table = np.array(tag, dtype=float)
            if table.shape[1] != dim:
                raise PreconditionError('Functional table has ' +
                                        str(table.shape[1]) +
                                        ' columns for a block of '
                                        'dimension ' + str(dim))
            if np.linalg.matrix_rank(table) < dim:
                raise PreconditionError('Functional table does not '
                                        'separate points of the block')
            table.setflags(write=False)
            return table
        return parse_exponent(tag)

    @property
    def dims(self):
        return self._dims

    @property
    def block_count(self):
        return len(self._dims)

    @property
    def dim(self):
        return int(self._offsets[-1])

    @property
    def ambient_p(self):
        return self._ambient_p

    @property
    def monotone(self):
        return self._monotone

    @property
    def block_tags(self):
        return self._tags

    @property
    def offsets(self):
        """
        Coordinate offsets, block i occupies ``offsets[i-1]:offsets[i]``
        """
        return self._offsets

    @property
    def block_index(self):
        """
        0-based block index of every coordinate
        """
        return self._block_index

    @property
    def is_euclidean(self):
        """
        True if the ambient norm is the plain Euclidean norm
        """
        return self.effective_exponent() == 2.0

    def effective_exponent(self):
        """
        If the ambient norm is a plain l_p norm over all coordinates
        return p, otherwise None
        """
        for dim, tag in zip(self._dims, self._tags):
            if isinstance(tag, np.ndarray):
                return None
            if dim > 1 and tag != self._ambient_p:
                return None
        return self._ambient_p

    def _check_block(self, i):
        if i < 1 or i > self.block_count:
            raise PreconditionError('Block index ' + str(i) +
                                    ' out of range 1..' +
                                    str(self.block_count))

    def block_slice(self, i):
        """
        Coordinate slice of block `i` (1-based)
        """
        self._check_block(i)
        return slice(int(self._offsets[i - 1]), int(self._offsets[i]))

    def as_array(self, x):
        """
        Converts `x` to a float array whose last axis matches the space

        :raises PreconditionError: if the length does not match
        """
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0 or arr.shape[-1] != self.dim:
            raise PreconditionError('Expected vectors of length ' +
                                    str(self.dim) + ', got shape ' +
                                    str(arr.shape))
        return arr

    @staticmethod
    def _tag_norm(values, tag):
        if isinstance(tag, np.ndarray):
            return np.max(np.abs(values @ tag.T), axis=-1, initial=0.0)
        return pnorm(values, tag)

    def block_norms(self, x):
        """
        Norms of all block components

        :param x: array of shape (..., dim)
        :return: array of shape (..., block_count)
        """
        x = self.as_array(x)
        cols = []
        for i, tag in enumerate(self._tags):
            sl = slice(int(self._offsets[i]), int(self._offsets[i + 1]))
            cols.append(self._tag_norm(x[..., sl], tag))
        return np.stack(cols, axis=-1)

    def block_norm(self, x, i):
        """
        Norm of the block `i` component of `x`
        """
        sl = self.block_slice(i)
        return self._tag_norm(self.as_array(x)[..., sl], self._tags[i - 1])

    def norm(self, x):
        """
        Ambient norm, the p-sum of the block norms

        :param x: array of shape (..., dim)
        :return: array of shape (...)
        """
        return pnorm(self.block_norms(x), self._ambient_p)

    def components(self, x):
        """
        Block components x_i = (P_i - P_{i-1})x, zero padded

        :return: list with one array per block
        """
        x = self.as_array(x)
        parts = []
        for i in range(self.block_count):
            part = np.zeros_like(x)
            sl = slice(int(self._offsets[i]), int(self._offsets[i + 1]))
            part[..., sl] = x[..., sl]
            parts.append(part)
        return parts

    def projection(self, x, n):
        """
        Canonical projection P_n, keeps blocks 1..n

        :raises PreconditionError: if n is not in 0..block_count
        """
        if n < 0 or n > self.block_count:
            raise PreconditionError('Projection index ' + str(n) +
                                    ' out of range 0..' +
                                    str(self.block_count))
        x = self.as_array(x)
        out = np.zeros_like(x)
        stop = int(self._offsets[n])
        out[..., :stop] = x[..., :stop]
        return out

    def ell1_block_sum(self, x, m):
        """
        Sum of the block norms of blocks 1..m
        """
        if m < 0 or m > self.block_count:
            raise PreconditionError('Block count ' + str(m) +
                                    ' out of range 0..' +
                                    str(self.block_count))
        return self.block_norms(x)[..., :m].sum(axis=-1)

    def block_support(self, g, i):
        """
        Support function of the unit ball of block `i`.

        :param g: functional restricted to block `i`, shape (dims[i-1],)
        :return: (value, point) with value the dual block norm of `g`
                 and point a norming vector of the block unit ball
        :rtype: tuple
        """
        self._check_block(i)
        g = np.asarray(g, dtype=float)
        tag = self._tags[i - 1]
        dim = self._dims[i - 1]
        if isinstance(tag, np.ndarray):
            res = linprog(-g, A_ub=np.vstack((tag, -tag)),
                          b_ub=np.ones(2 * tag.shape[0]),
                          bounds=[(None, None)] * dim, method='highs')
            if res.status != 0:
                raise PreconditionError('Unable to evaluate support '
                                        'function of block ' + str(i) +
                                        ': ' + str(res.message))
            return float(-res.fun), np.asarray(res.x, dtype=float)
        point = np.zeros(dim)
        if tag == 1.0:
            k = int(np.argmax(np.abs(g)))
            point[k] = 1.0 if g[k] >= 0 else -1.0
            return float(abs(g[k])), point
        if tag == np.inf:
            point = np.where(g >= 0, 1.0, -1.0)
            return float(np.abs(g).sum()), point
        length = float(np.linalg.norm(g))
        if length == 0.0:
            point[0] = 1.0
            return 0.0, point
        return length, g / length

    def dual_norm(self, f):
        """
        Dual norm of the functional `f` (a vector of length dim)
        """
        f = self.as_array(f)
        duals = [self.block_support(f[self.block_slice(i)], i)[0]
                 for i in range(1, self.block_count + 1)]
        return float(pnorm(np.array(duals), dual_exponent(self._ambient_p)))

    def coordinate_bounds(self):
        """
        Largest absolute value of every coordinate on the unit ball
        """
        bounds = np.zeros(self.dim)
        for i in range(1, self.block_count + 1):
            sl = self.block_slice(i)
            for j in range(sl.start, sl.stop):
                unit = np.zeros(sl.stop - sl.start)
                unit[j - sl.start] = 1.0
                bounds[j] = self.block_support(unit, i)[0]
        return bounds

    def sample_unit_ball(self, rng, count):
        """
        Uniform samples from the unit ball of the ambient norm.
        Exact for plain l_p norms, rejection from the bounding
        box otherwise.

        :raises SamplingError: if rejection sampling stalls
        """
        p = self.effective_exponent()
        if p is not None:
            return uniform_lp_ball(rng, count, self.dim, p)
        bounds = self.coordinate_bounds()
        accepted = []
        found = 0
        for _ in range(1000):
            cand = rng.uniform(-1.0, 1.0, size=(max(count, 64), self.dim))
            cand = cand * bounds
            keep = cand[self.norm(cand) <= 1.0]
            accepted.append(keep)
            found += keep.shape[0]
            if found >= count:
                return np.concatenate(accepted)[:count]
        raise SamplingError('Rejection sampling of the unit ball stalled')

    def sample_sphere(self, rng, count):
        """
        Directions of ambient norm one (normalized Gaussians)
        """
        gauss = rng.standard_normal(size=(count, self.dim))
        lengths = self.norm(gauss)
        lengths[lengths == 0.0] = 1.0
        return gauss / lengths[:, None]

    def radial_projection(self, x, rho):
        """
        x if ||x|| <= rho else rho x/||x||, rows handled independently

        :raises PreconditionError: if rho is not positive
        """
        if not rho > 0:
            raise PreconditionError('Radius must be positive: ' + str(rho))
        x = self.as_array(x)
        lengths = self.norm(x)
        safe = np.where(lengths > 0, lengths, 1.0)
        scale = np.where(lengths > rho, rho / safe, 1.0)
        return x * scale[..., None]

    def truncate(self, k):
        """
        Space made of the first `k` blocks
        """
        if k < 1 or k > self.block_count:
            raise PreconditionError('Cannot keep ' + str(k) + ' of ' +
                                    str(self.block_count) + ' blocks')
        return BlockSpace(self._dims[:k], list(self._tags[:k]),
                          ambient_rule=self._ambient_p,
                          monotone=self._monotone)

    def blocks_spanning(self, coords):
        """
        Number of blocks whose coordinates are exactly the first
        `coords` coordinates, or None if `coords` cuts a block
        """
        hits = np.nonzero(self._offsets == coords)[0]
        if len(hits) == 0:
            return None
        return int(hits[0])

    def to_dict(self):
        """
        Plain representation following the text schema with keys
        blocks, dims, block_norm, ambient_rule and monotone
        """
        tags = []
        for tag in self._tags:
            if isinstance(tag, np.ndarray):
                tags.append(tag.tolist())
            else:
                tags.append(exponent_tag(tag))
        return {'blocks': self.block_count,
                'dims': list(self._dims),
                'block_norm': tags,
                'ambient_rule': exponent_tag(self._ambient_p),
                'monotone': self._monotone}

    @staticmethod
    def from_dict(data):
        """
        Inverse of :py:meth:`to_dict`

        :raises PreconditionError: if blocks disagrees with dims
        """
        dims = list(data['dims'])
        if 'blocks' in data and int(data['blocks']) != len(dims):
            raise PreconditionError('blocks=' + str(data['blocks']) +
                                    ' but ' + str(len(dims)) +
                                    ' dims given')
        return BlockSpace(dims, block_norm=list(data['block_norm']),
                          ambient_rule=data['ambient_rule'],
                          monotone=data.get('monotone', True))

    def __eq__(self, other):
        if not isinstance(other, BlockSpace):
            return False
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self._dims, exponent_tag(self._ambient_p)))

    def __repr__(self):
        return ('BlockSpace(dims=' + str(list(self._dims)) +
                ', ambient_rule=' + exponent_tag(self._ambient_p) + ')')


class Point(object):
    """
    Coefficient vector over a :py:class:`BlockSpace`
    """

    def __init__(self, space, coeffs):
        """
        Constructor

        :param space: space the point lives in
        :type space: :py:class:`BlockSpace`
        :param coeffs: dense coefficients, one per coordinate
        :raises PreconditionError: if the length does not match
        """
        arr = np.array(coeffs, dtype=float)
        if arr.shape != (space.dim,):
            raise PreconditionError('Point needs ' + str(space.dim) +
                                    ' coefficients, got shape ' +
                                    str(arr.shape))
        arr.setflags(write=False)
        self._space = space
        self._coeffs = arr

    @staticmethod
    def zeros(space):
        return Point(space, np.zeros(space.dim))

    @property
    def space(self):
        return self._space

    @property
    def coeffs(self):
        return self._coeffs

    def block(self, i):
        """
        Coefficients of block `i` (not padded)
        """
        return self._coeffs[self._space.block_slice(i)]

    def __len__(self):
        return self._space.dim

    def __eq__(self, other):
        if not isinstance(other, Point):
            return False
        return (self._space == other._space and
                np.array_equal(self._coeffs, other._coeffs))

    def __repr__(self):
        return 'Point(' + str(self._coeffs.tolist()) + ')'


def block_components(x):
    """
    Splits `x` into its block components x_i = (P_i - P_{i-1})x

    :param x: point
    :type x: :py:class:`Point`
    :return: one zero padded point per block
    :rtype: list
    """
    return [Point(x.space, part) for part in x.space.components(x.coeffs)]


def canonical_projection(x, n):
    """
    P_n(x), the sum of the first `n` block components

    :raises PreconditionError: if `n` is out of range
    """
    return Point(x.space, x.space.projection(x.coeffs, n))


def ambient_norm(x):
    """
    Ambient norm of `x`
    """
    return float(x.space.norm(x.coeffs))


def block_norm(x, i):
    """
    Norm of block component `i` of `x`
    """
    return float(x.space.block_norm(x.coeffs, i))


def ell1_block_sum(x, m):
    """
    Sum of the norms of the first `m` block components of `x`
    """
    return float(x.space.ell1_block_sum(x.coeffs, m))


def a_m_default(m):
    """
    Default constant A_m = 2m bounding the l_1 block sum of P_m x
    by A_m ||P_m x||
    """
    return 2.0 * m


def radial_projection(x, rho):
    """
    Retraction of the space onto the ball of radius `rho`

    :param x: point
    :type x: :py:class:`Point`
    :param rho: radius
    :type rho: float
    :rtype: :py:class:`Point`
    """
    return Point(x.space, x.space.radial_projection(x.coeffs, rho))


def write_points_csv(path, points):
    """
    Writes points as flat CSV rows
    """
    rows = np.atleast_2d(np.array([getattr(p, 'coeffs', p) for p in points],
                                  dtype=float))
    np.savetxt(path, rows, delimiter=',', fmt='%.17g')


def read_points_csv(path, space):
    """
    Reads points written by :py:func:`write_points_csv`
    """
    rows = np.atleast_2d(np.loadtxt(path, delimiter=',', ndmin=2))
    return [Point(space, row) for row in rows]


def rowwise(func):
    """
    Lifts a function of a single point to a function of row batches
    """
    def lifted(x):
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            return np.asarray(func(x), dtype=float)
        return np.array([func(row) for row in x], dtype=float)
    return lifted


def seed_streams(seed, count):
    """
    Independent child seed sequences of `seed`
    """
    return np.random.SeedSequence(seed).spawn(count)


def chunk_plan(seed, total, chunk_size=CHUNK_SIZE):
    """
    Splits `total` samples into fixed size chunks each with its own
    seed stream

    :return: list of (count, seed sequence)
    :rtype: list
    """
    chunks = max(1, -(-int(total) // chunk_size))
    counts = [chunk_size] * (chunks - 1)
    counts.append(int(total) - chunk_size * (chunks - 1))
    return list(zip(counts, seed_streams(seed, chunks)))


def run_chunks(worker, tasks, workers=1):
    """
    Evaluates `worker(*task)` for every task, in order

    :param workers: threads to use, 1 runs serially
    :return: results in task order
    :rtype: list
    """
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [worker(*task) for task in tasks]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda task: worker(*task), tasks))


class PairSampler(object):
    """
    Draws pairs of points for Lipschitz and modulus estimation.

    Pairs mix three regimes: independent points of the domain, local
    pairs at distance scales 10^-k and, when a `shell` callable is
    given, pairs straddling the seams of piecewise maps.
    """

    def __init__(self, space, box=1.0, scales=DEFAULT_SCALES, draw=None,
                 shell=None, clip=None):
        """
        Constructor

        :param space: space of the sampled points
        :type space: :py:class:`BlockSpace`
        :param box: half width of the default uniform box
        :type box: float
        :param scales: distance scales of local pairs
        :param draw: callable (rng, count) -> points replacing the box
        :param shell: callable (rng, count) -> points near seams
        :param clip: callable mapping perturbed points back into the
                     domain
        """
        self._space = space
        self._box = float(box)
        self._scales = tuple(float(s) for s in scales)
        self._draw = draw
        self._shell = shell
        self._clip = clip

    @property
    def space(self):
        return self._space

    @property
    def scales(self):
        return self._scales

    def draw_points(self, rng, count):
        """
        Independent points of the domain

        :raises SamplingError: if the domain yields no points
        """
        if self._draw is None:
            pts = rng.uniform(-self._box, self._box,
                              size=(count, self._space.dim))
        else:
            pts = np.asarray(self._draw(rng, count), dtype=float)
        if count > 0 and pts.shape[0] == 0:
            raise SamplingError('Sampler domain is empty')
        return pts

    def _perturb(self, rng, base, scales):
        count = base.shape[0]
        picks = np.asarray(scales)[rng.integers(0, len(scales), size=count)]
        dist = picks * rng.uniform(0.0, 1.0, size=count)
        other = base + self._space.sample_sphere(rng, count) * dist[:, None]
        if self._clip is not None:
            other = np.asarray(self._clip(other), dtype=float)
        return other

    def local_pairs(self, rng, count, scales=None):
        """
        Pairs (x, x + t u) with t below one of the distance scales
        """
        base = self.draw_points(rng, count)
        return base, self._perturb(rng, base, scales or self._scales)

    def pairs(self, rng, count):
        """
        Mixed pairs

        :return: (x, y) arrays of shape (count, dim)
        :rtype: tuple
        """
        if self._shell is not None:
            n_box = count // 3
            n_shell = count // 3
        else:
            n_box = count // 2
            n_shell = 0
        n_local = count - n_box - n_shell
        xs = [self.draw_points(rng, n_box)]
        ys = [self.draw_points(rng, n_box)]
        lx, ly = self.local_pairs(rng, n_local)
        xs.append(lx)
        ys.append(ly)
        if n_shell > 0:
            sx = np.asarray(self._shell(rng, n_shell), dtype=float)
            xs.append(sx)
            ys.append(self._perturb(rng, sx, self._scales))
        return np.concatenate(xs), np.concatenate(ys)


class LipschitzReport(object):
    """
    Outcome of :py:func:`estimate_lipschitz`
    """

    def __init__(self, estimate, pair_count, seed, argmax_pair,
                 workers=1, note=LIPSCHITZ_NOTE):
        self.estimate = float(estimate)
        self.pair_count = int(pair_count)
        self.seed = seed
        self.argmax_pair = argmax_pair
        self.workers = workers
        self.note = note

    def to_dict(self):
        return {'estimate': self.estimate,
                'pair_count': self.pair_count,
                'seed': self.seed,
                'argmax_x': np.asarray(self.argmax_pair[0]).tolist(),
                'argmax_y': np.asarray(self.argmax_pair[1]).tolist(),
                'note': self.note}


class ModulusTable(object):
    """
    Sampled modulus of continuity omega(t)
    """

    def __init__(self, scales, omega):
        self.scales = [float(t) for t in scales]
        self.omega = [float(w) for w in omega]

    def at(self, t):
        """
        omega at the scale `t`
        """
        return self.omega[self.scales.index(float(t))]

    def is_monotone(self):
        """
        True if omega is nondecreasing in t
        """
        order = np.argsort(self.scales)
        values = np.asarray(self.omega)[order]
        return bool(np.all(np.diff(values) >= 0.0))

    def to_rows(self):
        return [[t, w] for t, w in zip(self.scales, self.omega)]

    def to_dict(self):
        return {'scales': self.scales, 'omega': self.omega}


def _distances(a, b, norm):
    diff = np.asarray(a, dtype=float) - np.asarray(b, dtype=float)
    if diff.ndim == 1:
        return np.abs(diff)
    return np.asarray(norm(diff), dtype=float)


def _reject_coincident(rng, sampler, x, y, norm):
    gaps = norm(x - y)
    for _ in range(MAX_RESAMPLES):
        bad = gaps == 0.0
        if not bad.any():
            return x, y, gaps
        nx, ny = sampler.pairs(rng, int(bad.sum()))
        x[bad] = nx
        y[bad] = ny
        gaps = norm(x - y)
    if (gaps == 0.0).any():
        raise SamplingError('Sampler produced coincident pairs after ' +
                            str(MAX_RESAMPLES) + ' resamples')
    return x, y, gaps


def _lipschitz_chunk(func, sampler, count, seed_seq, norm, out_norm):
    rng = np.random.default_rng(seed_seq)
    x, y = sampler.pairs(rng, count)
    x, y, gaps = _reject_coincident(rng, sampler, x, y, norm)
    quotients = _distances(func(x), func(y), out_norm) / gaps
    best = int(np.argmax(quotients))
    return float(quotients[best]), x[best].copy(), y[best].copy()


def estimate_lipschitz(func, sampler, pair_count, seed, norm=None,
                       out_norm=None, workers=1):
    """
    Empirical Lipschitz constant of `func`: the largest quotient
    ||T(x) - T(y)|| / ||x - y|| over sampled distinct pairs. This is a
    lower estimate of the true Lipschitz norm.

    :param func: map acting on row batches of shape (k, dim)
    :param sampler: pair sampler of the domain
    :type sampler: :py:class:`PairSampler`
    :param pair_count: number of pairs
    :type pair_count: int
    :param seed: seed of the pair streams
    :type seed: int
    :param norm: input norm, defaults to the sampler's ambient norm
    :param out_norm: output norm, defaults to `norm`; scalar valued
                     maps use the absolute value
    :param workers: threads evaluating chunks
    :raises PreconditionError: if pair_count < 1
    :raises SamplingError: on persistent coincident pairs
    :rtype: :py:class:`LipschitzReport`
    """
    if pair_count < 1:
        raise PreconditionError('pair_count must be at least 1')
    norm = norm or sampler.space.norm
    out_norm = out_norm or norm
    tasks = [(func, sampler, count, seq, norm, out_norm)
             for count, seq in chunk_plan(seed, pair_count)]
    results = run_chunks(_lipschitz_chunk, tasks, workers=workers)
    best = results[0]
    for res in results[1:]:
        if res[0] > best[0]:
            best = res
    logger.debug('Lipschitz estimate ' + str(best[0]) + ' from ' +
                 str(pair_count) + ' pairs')
    return LipschitzReport(best[0], pair_count, seed, (best[1], best[2]),
                           workers=workers)


def _modulus_chunk(func, sampler, scales, count, seed_seq, norm, out_norm):
    rng = np.random.default_rng(seed_seq)
    x, y = sampler.local_pairs(rng, count, scales=scales)
    gaps = norm(x - y)
    moves = _distances(func(x), func(y), out_norm)
    return np.array([np.max(moves[gaps <= t], initial=0.0) for t in scales])


def estimate_modulus(func, scales, samples, seed, sampler, norm=None,
                     out_norm=None, workers=1):
    """
    Sampled modulus of continuity: for every scale t the largest
    output distance over pairs at input distance at most t

    :param scales: positive, sorted distance scales
    :raises PreconditionError: if scales are not positive and sorted
    :rtype: :py:class:`ModulusTable`
    """
    scales = [float(t) for t in scales]
    if len(scales) == 0 or min(scales) <= 0 or scales != sorted(scales):
        raise PreconditionError('Scales must be positive and sorted: ' +
                                str(scales))
    norm = norm or sampler.space.norm
    out_norm = out_norm or norm
    tasks = [(func, sampler, scales, count, seq, norm, out_norm)
             for count, seq in chunk_plan(seed, samples)]
    results = run_chunks(_modulus_chunk, tasks, workers=workers)
    omega = np.max(np.vstack(results), axis=0)
    return ModulusTable(scales, omega)
