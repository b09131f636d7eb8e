#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for `counterexample` module."""

import math
import unittest

import numpy as np

from lipretract import counterexample
from lipretract.counterexample import TubeSet
from lipretract.exceptions import NetConstructionError
from lipretract.exceptions import PreconditionError
from lipretract.exceptions import RetractionAuditError
from lipretract.proximity import minkowski_retraction


class TestCounterexample(unittest.TestCase):
    """Tests for `counterexample` module."""

    def setUp(self):
        """Set up test fixtures, if any."""
        self.line = counterexample.build_block(1)
        self.square = counterexample.build_block(2, 0.5, directions=4)

    def tearDown(self):
        """Tear down test fixtures, if any."""

    def test_closed_forms(self):
        self.assertAlmostEqual(0.04, counterexample.M_n(16, 0.5, 1.0),
                               places=15)
        self.assertAlmostEqual(1.0, counterexample.lind_bound(81),
                               places=15)
        self.assertAlmostEqual(4.0, counterexample.transfer(1.0, 1.0, 0.5),
                               places=15)
        self.assertAlmostEqual(0.64, counterexample.chain_bound(16),
                               places=12)

    def test_closed_form_monotonicity(self):
        m_n = counterexample.M_n
        for n in range(1, 30):
            self.assertTrue(m_n(n + 1) > m_n(n))
            self.assertTrue(m_n(n, 0.5, 2.0) < m_n(n, 0.5, 1.0))
            self.assertTrue(m_n(n, 0.6) < m_n(n, 0.5))
            self.assertTrue(counterexample.chain_bound(n) <
                            counterexample.lind_bound(n))

    def test_closed_form_errors(self):
        try:
            counterexample.M_n(0)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('n must be at least 1: 0', str(e))
        try:
            counterexample.transfer(1.0, 1.0, 1.0)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('epsilon must lie in (0, 1): 1.0', str(e))
        try:
            counterexample.M_n(4, 0.5, 0.5)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('d must be at least 1: 0.5', str(e))

    def test_build_block_line(self):
        self.assertEqual(1, self.line.dim)
        self.assertEqual([[1.0]], self.line.frame.tolist())
        self.assertEqual(0.0, self.line.distortion)

    def test_build_block_regular_directions(self):
        eight = counterexample.build_block(2, 0.5, directions=8)
        self.assertEqual(8, eight.dim)
        self.assertAlmostEqual(1.0 - math.cos(math.pi / 16),
                               eight.distortion, places=9)
        self.assertAlmostEqual(1.0 - math.cos(math.pi / 8),
                               self.square.distortion, places=9)
        self.assertTrue(eight.distortion < self.square.distortion)

    def test_build_block_greedy(self):
        block = counterexample.build_block(2, 0.5, seed=3)
        self.assertEqual(2, np.linalg.matrix_rank(block.frame))
        self.assertTrue(block.distortion <= 0.5)
        self.assertTrue(block.dim <= 12)
        c = np.array([[0.6, 0.8], [1.0, 0.0]])
        norms = np.max(np.abs(block.embed(c)), axis=1)
        self.assertTrue(np.all(norms <= 1.0 + 1e-12))
        self.assertTrue(np.all(norms >= 0.5))

    def test_build_block_errors(self):
        try:
            counterexample.build_block(5)
            self.fail('Expected NetConstructionError')
        except NetConstructionError as e:
            self.assertEqual('Model blocks are limited to 4 dims, got 5',
                             str(e))
        try:
            counterexample.build_block(0)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('n must be at least 1: 0', str(e))
        try:
            counterexample.build_block(3, directions=8)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Regular directions need n = 2, got 3', str(e))

    def test_dist_to_euclidean_ball(self):
        inside = self.square.embed([0.3, 0.4])
        self.assertAlmostEqual(0.0, counterexample.dist_to_euclidean_ball(
            inside, self.square), places=9)
        self.assertEqual(0.0, counterexample.dist_to_euclidean_ball(
            np.zeros(4), self.square))
        self.assertAlmostEqual(1.0, counterexample.dist_to_euclidean_ball(
            np.array([2.0]), self.line), places=12)

    def test_tube_without_thickness(self):
        tube = TubeSet(self.square, 0.0)
        sphere = self.square.embed([0.6, 0.8])
        self.assertAlmostEqual(1.0, counterexample.tube_gauge(sphere, tube),
                               places=12)
        self.assertEqual(math.inf, counterexample.tube_gauge(
            np.array([1.0, 0.0, 0.0, 0.0]), tube))
        self.assertTrue(counterexample.tube_membership(0.5 * sphere, tube))
        self.assertFalse(counterexample.tube_membership(1.5 * sphere, tube))

    def test_tube_gauge_interval(self):
        tube = TubeSet(self.line, 0.5)
        self.assertAlmostEqual(0.6, counterexample.tube_gauge(
            np.array([0.9]), tube), places=6)
        self.assertAlmostEqual(0.6, counterexample.tube_gauge_bisect(
            np.array([0.9]), tube), places=5)
        self.assertEqual(0.0, counterexample.tube_gauge(np.zeros(1), tube))
        self.assertEqual(0.0, counterexample.tube_gauge_bisect(np.zeros(1),
                                                               tube))

    def test_tube_gauge_homogeneous(self):
        tube = TubeSet(self.square, 0.25)
        x = np.array([0.3, -0.2, 0.5, 0.1])
        once = counterexample.tube_gauge(x, tube)
        twice = counterexample.tube_gauge(2.0 * x, tube)
        self.assertAlmostEqual(2.0 * once, twice, delta=1e-5)
        self.assertAlmostEqual(once, counterexample.tube_gauge_bisect(
            x, tube), delta=1e-5)

    def test_tube_audits(self):
        tube = TubeSet(self.square, 0.25)
        self.assertTrue(tube.sandwich_violation(samples=50) <= 0.0)
        self.assertTrue(tube.convexity_violation(samples=30) <= 1e-6)
        self.assertTrue(tube.gauge_audit(samples=10) <= 1e-5)
        try:
            TubeSet(self.square, -0.1)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Tube thickness must be nonnegative: -0.1',
                             str(e))

    def test_assembled_compact(self):
        compact = counterexample.build_assembled(2, seed=0)
        self.assertEqual(2, compact.depth)
        self.assertEqual([1.0, 0.0625], compact.lambdas.tolist())
        self.assertEqual([0.5, 0.25], [t.delta for t in compact.tubes])
        self.assertEqual([1], compact.frame_indices(1))
        self.assertEqual([2, 3], compact.frame_indices(2))
        self.assertEqual(1 + compact.tubes[1].block.dim, compact.space.dim)
        self.assertAlmostEqual(0.6, float(compact.gauge(
            compact.embed(1, [0.9]))), places=6)
        self.assertEqual(1.0, compact.fdd_constant(samples=200))
        rng = np.random.default_rng(5)
        pts = compact.sample_inside(rng, 20)
        self.assertTrue(np.all(compact.contains(pts)))
        data = compact.to_dict()
        self.assertEqual([[1], [2, 3]], data['frame_indices'])
        self.assertEqual(2, len(data['blocks']))

    def test_retraction_audit_minkowski(self):
        compact = counterexample.build_assembled(2, seed=0)
        candidate = minkowski_retraction(compact.gauge)
        report = counterexample.retraction_audit(candidate, compact,
                                                 depths=1, pairs=200,
                                                 fixed_samples=20)
        self.assertEqual(1, len(report.records))
        record = report.records[0]
        self.assertAlmostEqual(1.0, record.estimate, places=9)
        self.assertAlmostEqual(0.02, record.m_n, places=12)
        self.assertAlmostEqual(0.01, record.threshold, places=12)
        self.assertTrue(record.clears_bound)
        self.assertEqual(0.0, report.displacement)
        self.assertAlmostEqual(0.5, report.implied_lipschitz, places=9)
        self.assertEqual(len(counterexample.AuditReport.ROW_HEADER),
                         len(report.to_rows()[0]))
        self.assertTrue('evidence' in report.to_dict()['note'])

    def test_fixes_audit_and_induced_map(self):
        compact = counterexample.build_assembled(2, seed=0)
        candidate = minkowski_retraction(compact.gauge)
        self.assertEqual(0.0, counterexample.fixes_audit(candidate, compact,
                                                         samples=20))
        first = counterexample.induced_map(candidate, compact, 1)
        res = first(np.array([[0.5], [3.0]]))
        self.assertEqual((2, 1), res.shape)
        self.assertAlmostEqual(0.5, float(res[0, 0]), places=6)
        self.assertAlmostEqual(1.5, float(res[1, 0]), places=5)

    def test_retraction_audit_all_blocks(self):
        compact = counterexample.build_assembled(2, seed=0)
        candidate = minkowski_retraction(compact.gauge)
        report = counterexample.retraction_audit(candidate, compact,
                                                 pairs=100,
                                                 fixed_samples=10)
        self.assertEqual([1, 2], [r.n for r in report.records])
        self.assertTrue(all(r.estimate > 0 for r in report.records))

    def test_retraction_audit_rejects_moving_candidate(self):
        compact = counterexample.build_assembled(2, seed=0)
        try:
            counterexample.retraction_audit(np.zeros_like, compact,
                                            fixed_samples=10)
            self.fail('Expected RetractionAuditError')
        except RetractionAuditError as e:
            self.assertTrue(str(e).startswith('Candidate moves a point '
                                              'of K by '))
            self.assertTrue(e.displacement > 0.0)
            self.assertEqual(compact.space.dim, len(e.witness))

    def test_retraction_audit_errors(self):
        compact = counterexample.build_assembled(2, seed=0)
        candidate = minkowski_retraction(compact.gauge)
        try:
            counterexample.retraction_audit(candidate, compact, depths=3)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Block index 3 out of range 1..2', str(e))
        try:
            counterexample.retraction_audit(candidate, compact,
                                            fdd_constant=0.5)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('FDD constant must be at least 1: 0.5', str(e))


if __name__ == '__main__':
    unittest.main()
