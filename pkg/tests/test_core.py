#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for `core` module."""

import os
import tempfile
import shutil

import unittest
from unittest.mock import MagicMock

import numpy as np

from lipretract import core
from lipretract.core import BlockSpace
from lipretract.core import PairSampler
from lipretract.core import Point
from lipretract.exceptions import PreconditionError
from lipretract.exceptions import SamplingError


class TestCore(unittest.TestCase):
    """Tests for `core` module."""

    def setUp(self):
        """Set up test fixtures, if any."""
        self.l1 = BlockSpace([1, 1], block_norm=1, ambient_rule=1)
        self.l2 = BlockSpace([1, 1], block_norm=2, ambient_rule=2)
        self.linf = BlockSpace([1, 1], block_norm='inf',
                               ambient_rule='inf')

    def tearDown(self):
        """Tear down test fixtures, if any."""

    def test_invalid_space(self):
        try:
            BlockSpace([])
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Every block needs a positive dimension: []',
                             str(e))
        try:
            BlockSpace([1, 2], block_norm=3)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertTrue('1, 2, inf' in str(e))

    def test_point_length_mismatch(self):
        try:
            Point(self.l1, [1.0, 2.0, 3.0])
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertTrue('Point needs 2 coefficients' in str(e))

    def test_block_components(self):
        space = BlockSpace([2, 1])
        x = Point(space, [1, 2, 5])
        parts = core.block_components(x)
        self.assertEqual([1, 2, 0], parts[0].coeffs.tolist())
        self.assertEqual([0, 0, 5], parts[1].coeffs.tolist())
        total = parts[0].coeffs + parts[1].coeffs
        self.assertTrue(np.array_equal(x.coeffs, total))

        parts = core.block_components(Point(self.l1, [3, -2]))
        self.assertEqual([3, 0], parts[0].coeffs.tolist())
        self.assertEqual([0, -2], parts[1].coeffs.tolist())

        for part in core.block_components(Point.zeros(space)):
            self.assertEqual(0.0, core.ambient_norm(part))

    def test_canonical_projection(self):
        space = BlockSpace([1, 1, 1], block_norm=1, ambient_rule=1)
        x = Point(space, [3, -2, 7])
        self.assertEqual([3, -2, 0],
                         core.canonical_projection(x, 2).coeffs.tolist())
        self.assertEqual([0, 0, 0],
                         core.canonical_projection(x, 0).coeffs.tolist())
        self.assertEqual(x, core.canonical_projection(x, 3))
        try:
            core.canonical_projection(x, 4)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Projection index 4 out of range 0..3', str(e))

    def test_projection_algebra(self):
        space = BlockSpace([2, 1, 3], block_norm=2, ambient_rule=1)
        rng = np.random.default_rng(3)
        x = rng.standard_normal(size=(50, space.dim))
        for m in range(4):
            for n in range(4):
                lhs = space.projection(space.projection(x, n), m)
                rhs = space.projection(x, min(m, n))
                self.assertTrue(np.array_equal(lhs, rhs))

    def test_monotone_projections(self):
        rng = np.random.default_rng(5)
        for rule in (1, 2, 'inf'):
            space = BlockSpace([2, 1, 2], block_norm=[1, 2, 'inf'],
                               ambient_rule=rule)
            x = rng.standard_normal(size=(200, space.dim))
            for n in range(space.block_count + 1):
                self.assertTrue(np.all(space.norm(space.projection(x, n)) <=
                                       space.norm(x) + 1e-12))

    def test_norms(self):
        self.assertEqual(0.0, core.ambient_norm(Point.zeros(self.l2)))
        self.assertEqual(5.0, core.ambient_norm(Point(self.l1, [3, -2])))
        self.assertEqual(5.0, core.ambient_norm(Point(self.l2, [3, 4])))
        self.assertEqual(4.0, core.ambient_norm(Point(self.linf, [3, -4])))
        self.assertEqual(2.0, core.block_norm(Point(self.l1, [3, -2]), 2))

        # single block vectors have ambient norm equal to block norm
        space = BlockSpace([2, 2], block_norm='inf', ambient_rule=1)
        x = Point(space, [0, 0, 3, -5])
        self.assertEqual(core.block_norm(x, 2), core.ambient_norm(x))

    def test_functional_table_norm(self):
        table = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        space = BlockSpace([2], block_norm=table, ambient_rule=2)
        self.assertEqual(3.0, float(space.norm([1.0, 2.0])))
        value, point = space.block_support(np.array([1.0, 0.0]), 1)
        self.assertAlmostEqual(1.0, value, places=7)
        self.assertTrue(float(space.norm(point)) <= 1.0 + 1e-9)
        try:
            BlockSpace([2], block_norm=np.array([[1.0, 1.0]]))
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Functional table does not separate points '
                             'of the block', str(e))

    def test_ell1_block_sum(self):
        x = Point(self.l1, [3, -2])
        self.assertEqual(5.0, core.ell1_block_sum(x, 2))
        self.assertEqual(0.0, core.ell1_block_sum(Point.zeros(self.l1), 2))
        self.assertEqual(6.0, core.a_m_default(3))
        self.assertTrue(core.ell1_block_sum(x, 2) <=
                        core.a_m_default(2) * core.ambient_norm(x))

    def test_ell1_block_sum_bound_sampled(self):
        space = BlockSpace([1, 2, 1, 3], block_norm=2, ambient_rule='inf')
        rng = np.random.default_rng(11)
        x = rng.standard_normal(size=(500, space.dim))
        for m in range(1, space.block_count + 1):
            lhs = space.ell1_block_sum(x, m)
            rhs = core.a_m_default(m) * space.norm(space.projection(x, m))
            self.assertTrue(np.all(lhs <= rhs + 1e-12))

    def test_serialization(self):
        space = BlockSpace([2, 1], block_norm=[1, 'inf'], ambient_rule=2)
        data = space.to_dict()
        self.assertEqual(2, data['blocks'])
        self.assertEqual(['1', 'inf'], data['block_norm'])
        self.assertEqual('2', data['ambient_rule'])
        self.assertEqual(space, BlockSpace.from_dict(data))

        data['blocks'] = 3
        try:
            BlockSpace.from_dict(data)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('blocks=3 but 2 dims given', str(e))

    def test_points_csv(self):
        temp_dir = tempfile.mkdtemp()
        try:
            path = os.path.join(temp_dir, 'points.csv')
            pts = [Point(self.l2, [0.1, -3.0]), Point(self.l2, [1e-17, 2])]
            core.write_points_csv(path, pts)
            self.assertEqual(pts, core.read_points_csv(path, self.l2))
        finally:
            shutil.rmtree(temp_dir)

    def test_radial_projection(self):
        res = core.radial_projection(Point(self.l2, [2, 0]), 1.0)
        self.assertEqual([1.0, 0.0], res.coeffs.tolist())
        x = Point(self.l2, [0.3, -0.4])
        self.assertEqual(x, core.radial_projection(x, 1.0))
        try:
            core.radial_projection(x, 0.0)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Radius must be positive: 0.0', str(e))

    def test_estimate_lipschitz_identity_and_scaling(self):
        sampler = PairSampler(self.l2, box=2.0)
        res = core.estimate_lipschitz(lambda x: x, sampler, 1000, seed=1)
        self.assertEqual(1.0, res.estimate)
        self.assertEqual(1000, res.pair_count)
        self.assertEqual(core.LIPSCHITZ_NOTE, res.note)

        res = core.estimate_lipschitz(lambda x: 2.0 * x, sampler, 1000,
                                      seed=1)
        self.assertEqual(2.0, res.estimate)

    def test_estimate_lipschitz_linear_lower_bound(self):
        matrix = np.array([[1.0, 2.0], [0.5, -1.0]])
        true_norm = np.linalg.norm(matrix, 2)
        sampler = PairSampler(self.l2)
        res = core.estimate_lipschitz(lambda x: x @ matrix.T, sampler,
                                      5000, seed=2)
        self.assertTrue(res.estimate <= true_norm + 1e-12)
        self.assertTrue(res.estimate >= 0.9 * true_norm)

    def test_estimate_lipschitz_deterministic(self):
        sampler = PairSampler(self.linf, box=2.0)

        def func(x):
            return self.linf.radial_projection(x, 1.0)

        one = core.estimate_lipschitz(func, sampler, 9000, seed=7)
        two = core.estimate_lipschitz(func, sampler, 9000, seed=7)
        threaded = core.estimate_lipschitz(func, sampler, 9000, seed=7,
                                           workers=3)
        self.assertEqual(one.to_dict(), two.to_dict())
        self.assertEqual(one.estimate, threaded.estimate)
        self.assertTrue(np.array_equal(one.argmax_pair[0],
                                       threaded.argmax_pair[0]))

    def test_radial_projection_lipschitz(self):
        for space in (self.l2, self.linf):
            sampler = PairSampler(space, box=2.0)

            def func(x, space=space):
                return space.radial_projection(x, 1.0)

            res = core.estimate_lipschitz(func, sampler, 20000, seed=4)
            self.assertTrue(res.estimate <= 2.0 + 1e-6)
            self.assertTrue(res.estimate >= 1.0)

    def test_estimate_lipschitz_errors(self):
        sampler = PairSampler(self.l2)
        try:
            core.estimate_lipschitz(lambda x: x, sampler, 0, seed=1)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('pair_count must be at least 1', str(e))

        stuck = MagicMock()
        stuck.space = self.l2
        stuck.pairs = lambda rng, count: (np.zeros((count, 2)),
                                          np.zeros((count, 2)))
        try:
            core.estimate_lipschitz(lambda x: x, stuck, 10, seed=1)
            self.fail('Expected SamplingError')
        except SamplingError as e:
            self.assertTrue('coincident pairs' in str(e))

        empty = PairSampler(self.l2, draw=lambda rng, c: np.zeros((0, 2)))
        try:
            core.estimate_lipschitz(lambda x: x, empty, 10, seed=1)
            self.fail('Expected SamplingError')
        except SamplingError as e:
            self.assertEqual('Sampler domain is empty', str(e))

    def test_estimate_modulus(self):
        sampler = PairSampler(self.l2, box=2.0)
        scales = [1e-3, 1e-2, 1e-1]
        table = core.estimate_modulus(lambda x: np.zeros_like(x), scales,
                                      500, 3, sampler)
        self.assertEqual([0.0, 0.0, 0.0], table.omega)

        table = core.estimate_modulus(lambda x: x, scales, 500, 3, sampler)
        for t, w in zip(table.scales, table.omega):
            self.assertTrue(w <= t)
        self.assertTrue(table.is_monotone())

        def radial(x):
            return self.l2.radial_projection(x, 1.0)

        table = core.estimate_modulus(radial, scales, 2000, 3, sampler)
        self.assertTrue(table.at(0.1) <= 0.2)
        self.assertTrue(table.is_monotone())

    def test_estimate_modulus_bad_scales(self):
        sampler = PairSampler(self.l2)
        try:
            core.estimate_modulus(lambda x: x, [0.1, 0.01], 10, 1, sampler)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertTrue('sorted' in str(e))

    def test_chunk_plan(self):
        plan = core.chunk_plan(1, 10000)
        self.assertEqual([4096, 4096, 1808], [c for c, _ in plan])
        self.assertEqual(1, len(core.chunk_plan(1, 5)))


if __name__ == '__main__':
    unittest.main()
