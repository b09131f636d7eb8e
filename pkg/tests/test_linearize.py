#!/usr/bin/env python
# -*- coding: utf-8 -*-

"""Tests for `linearize` module."""

import os
import shutil
import tempfile
import unittest

import numpy as np

from lipretract import core
from lipretract import diamond
from lipretract import linearize
from lipretract.core import BlockSpace
from lipretract.diamond import DiamondCompact
from lipretract.exceptions import NetConstructionError
from lipretract.exceptions import PreconditionError
from lipretract.exceptions import SamplingError
from lipretract.linearize import Frame


def outside_unit_interval(x):
    if np.any(np.abs(x) > 1.0):
        raise PreconditionError('outside')
    return x


class TestLinearize(unittest.TestCase):
    """Tests for `linearize` module."""

    def setUp(self):
        """Set up test fixtures, if any."""
        self.cube = BlockSpace([1, 1, 1], ambient_rule='inf')
        self.euclid = BlockSpace([1, 1, 1])
        self.rng = np.random.default_rng(7)

    def tearDown(self):
        """Tear down test fixtures, if any."""

    def toy_compact(self):
        space = BlockSpace([1] * 9, ambient_rule='inf')
        return DiamondCompact(space, diamond.small_schedule(9, epsilon=1.0))

    def test_begun_smooth_linear(self):
        matrix = np.array([[1.0, -2.0, 0.5], [3.0, 0.0, 1.0]])
        smoothed = linearize.begun_smooth(lambda x: x @ matrix.T, 0.1,
                                          samples=50, seed=1,
                                          space=self.euclid)
        self.assertEqual(50, smoothed.samples)
        x = self.rng.uniform(-1.0, 1.0, size=(5, 3))
        self.assertTrue(np.allclose(x @ matrix.T, smoothed(x),
                                    atol=1e-12))
        value, spread = smoothed.with_error(x)
        self.assertTrue(np.all(np.abs(value - x @ matrix.T) <=
                               spread + 1e-12))

    def test_begun_smooth_constant(self):
        smoothed = linearize.begun_smooth(
            lambda x: np.full((len(x), 2), 3.0), 0.5, samples=8,
            space=self.euclid)
        self.assertEqual([3.0, 3.0], smoothed([0.1, 0.2, 0.3]).tolist())

    def test_begun_smooth_limit(self):
        compact = DiamondCompact(self.euclid, diamond.default_schedule(3))
        bound = compact.lipschitz_bound()
        x = self.rng.uniform(-1.0, 1.0, size=(50, 3))
        exact = compact.retract(x)
        for tau in linearize.DEFAULT_LADDER:
            smoothed = linearize.begun_smooth(compact.retract, tau,
                                              samples=200, seed=3,
                                              space=self.euclid)
            gaps = self.euclid.norm(smoothed(x) - exact)
            self.assertTrue(np.max(gaps) <= bound * tau + 1e-12)

    def test_begun_budget(self):
        smoothed = linearize.begun_smooth(lambda x: x, 0.1, samples=4,
                                          space=self.euclid, lipschitz=2.0,
                                          defect=0.01)
        self.assertAlmostEqual(2.3, smoothed.budget)
        self.assertAlmostEqual(0.22, smoothed.deviation_bound)

        # tau = D h / L doubles the Lipschitz constant
        smoothed = linearize.begun_smooth(lambda x: x, 3 * 0.01 / 2.0,
                                          samples=4, space=self.euclid,
                                          lipschitz=2.0, defect=0.01)
        self.assertAlmostEqual(4.0, smoothed.budget)
        self.assertEqual(0.01, smoothed.to_dict()['defect'])

    def test_begun_smooth_errors(self):
        try:
            linearize.begun_smooth(lambda x: x, 0, space=self.euclid)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('tau must be positive: 0', str(e))
        try:
            linearize.begun_smooth(lambda x: x, 0.1)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('A domain space is required', str(e))
        smoothed = linearize.begun_smooth(lambda x: x, 0.1, samples=4,
                                          space=self.euclid, radius=1.0)
        smoothed([0.5, 0.0, 0.0])
        try:
            smoothed([0.95, 0.0, 0.0])
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertTrue(str(e).startswith('Point outside the '
                                              'smoothing domain'))

    def test_coordinate_frame(self):
        frame = Frame.coordinate(self.cube, 2).check_auerbach()
        self.assertEqual(3, frame.dim)
        self.assertEqual(2, frame.sigma)
        self.assertEqual(2, frame.e_space.dim)
        self.assertTrue(np.array_equal(np.eye(3), frame.functionals))
        x = np.array([[1.0, 2.0, 3.0]])
        back = frame.from_coords(frame.to_coords(x))
        self.assertTrue(np.allclose(x, back))

    def test_frame_errors(self):
        plane = BlockSpace([1, 1])
        tilted = [[1.0, 0.0], [np.sqrt(0.5), np.sqrt(0.5)]]
        # only E matters for the Auerbach condition
        Frame(plane, tilted, 1).check_auerbach()
        try:
            Frame(plane, tilted, 2).check_auerbach()
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertTrue(str(e).startswith('Frame is not Auerbach on E'))
        try:
            Frame(plane, [[2.0, 0.0], [0.0, 1.0]], 1).check_auerbach()
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Frame vector a_1 has norm 2.0', str(e))
        try:
            Frame.coordinate(BlockSpace([2]), 1)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('E must be spanned by whole blocks, sigma=1 '
                             'cuts one', str(e))
        try:
            Frame(plane, [[np.sqrt(0.5), np.sqrt(0.5)], [0.0, 1.0]], 1)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('The first 1 frame vectors must lie in E',
                             str(e))
        try:
            Frame(plane, [[1.0, 0.0], [2.0, 0.0]], 1)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Frame vectors are linearly dependent', str(e))

    def test_box_volumes(self):
        frame = Frame.coordinate(BlockSpace([1] * 4), 2)
        box = linearize.build_box(1, 1, frame, 0.5, 0.1)
        self.assertAlmostEqual(0.02, box.volume())
        self.assertAlmostEqual(0.04, box.section_volume())
        self.assertAlmostEqual(2.0, box.measure_ratio())
        self.assertAlmostEqual(box.measure_ratio(),
                               box.section_volume() / box.volume())
        self.assertAlmostEqual(1.4, box.diameter())

        segment = linearize.build_box(1, 1, Frame.coordinate(
            BlockSpace([1]), 1), 1.0, 0.0)
        self.assertEqual(2.0, segment.volume())
        self.assertEqual(0.5, segment.measure_ratio())
        pts = segment.sample(self.rng, 100)
        self.assertEqual((100, 1), pts.shape)
        self.assertTrue(np.all(np.abs(pts) <= 1.0))

        flat = linearize.build_box(1, 1, Frame.coordinate(self.cube, 2),
                                   1.0, 0.0)
        self.assertEqual(0.0, flat.volume())
        self.assertTrue(np.all(flat.sample(self.rng, 20)[:, 2] == 0.0))

    def test_box_samples(self):
        frame = Frame.coordinate(BlockSpace([1] * 4), 2)
        box = linearize.build_box(2, 3, frame, 0.5, 0.1)
        coords = box.sample_coords(self.rng, 500)
        self.assertTrue(np.all(np.abs(coords[:, :2]).sum(axis=1) <= 0.5))
        self.assertTrue(np.all(np.abs(coords[:, 2:]) <= 0.1))

        section, half = box.sample_section(self.rng, 500, 0)
        self.assertTrue(np.all(section[:, 0] == 0.0))
        self.assertTrue(np.allclose(half, 0.5 - np.abs(section[:, 1])))
        self.assertTrue(np.all(half >= 0.0))

        section, half = box.sample_section(self.rng, 10, 3)
        self.assertTrue(np.all(section[:, 3] == 0.0))
        self.assertTrue(np.all(half == 0.1))
        data = box.to_dict()
        self.assertEqual(2, data['n'])
        self.assertEqual(3, data['k'])

    def test_build_box_errors(self):
        frame = Frame.coordinate(self.cube, 2)
        try:
            linearize.build_box(1, 1, frame, 0, 0.1)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Box radius must be positive: 0', str(e))
        try:
            linearize.build_box(1, 1, frame, 1.0, -0.1)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Box thickness must be nonnegative: -0.1',
                             str(e))
        plane = BlockSpace([1, 1])
        tilted = Frame(plane, [[1.0, 0.0], [np.sqrt(0.5), np.sqrt(0.5)]],
                       2)
        try:
            linearize.build_box(1, 1, tilted, 1.0, 0.0)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertTrue('Auerbach' in str(e))

    def test_average_derivative_linear(self):
        matrix = np.array([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
        frame = Frame.coordinate(self.euclid, 2)
        box = linearize.build_box(1, 1, frame, 0.5, 0.1)
        fd = linearize.average_derivative(lambda x: x @ matrix.T, box,
                                          samples=300, seed=1)
        self.assertEqual('fd', fd.estimator)
        self.assertTrue(np.allclose(matrix, fd.matrix, atol=1e-8))
        seg = linearize.average_derivative(lambda x: x @ matrix.T, box,
                                           samples=300, seed=1,
                                           estimator='segment')
        self.assertTrue(np.allclose(matrix, seg.matrix, atol=1e-12))
        self.assertEqual([0, 1, 2], seg.to_dict()['directions'])

        identity = linearize.average_derivative(lambda x: x, box,
                                                samples=100,
                                                estimator='segment')
        self.assertTrue(np.allclose(np.eye(3), identity.matrix,
                                    atol=1e-12))

    def test_average_derivative_diamond(self):
        compact = DiamondCompact(self.euclid, diamond.default_schedule(3))
        r3 = compact.radii[2]
        frame = Frame.coordinate(self.euclid, 2)
        box = linearize.build_box(1, 1, frame, 0.5 * r3, 0.1 * r3)
        fd, seg, gap = linearize.compare_estimators(compact.retract, box,
                                                    samples=300, seed=2)
        self.assertTrue(np.allclose(np.eye(3)[:, :2], fd.matrix,
                                    atol=1e-6))
        self.assertTrue(np.allclose(np.eye(3)[:, :2], seg.matrix,
                                    atol=1e-12))
        self.assertTrue(gap <= 1e-6)

    def test_average_derivative_step(self):
        frame = Frame.coordinate(BlockSpace([1]), 1)
        box = linearize.build_box(1, 1, frame, 1.0, 0.0)
        result = linearize.average_derivative(outside_unit_interval, box,
                                              samples=200, fd_step=0.5)
        self.assertTrue(result.step < 0.5)
        self.assertAlmostEqual(1.0, float(result.matrix[0, 0]), places=9)

        def rejects(x):
            raise PreconditionError('nowhere')
        try:
            linearize.average_derivative(rejects, box, samples=10)
            self.fail('Expected SamplingError')
        except SamplingError as e:
            self.assertTrue(str(e).startswith('Finite difference step '
                                              'underflow'))
        try:
            linearize.average_derivative(lambda x: x, box,
                                         estimator='bogus')
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Unknown estimator: bogus', str(e))
        try:
            linearize.average_derivative(lambda x: x, box, fd_step=-1.0)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Finite difference step must be positive: '
                             '-1.0', str(e))

    def test_extract_projection_of_projection(self):
        frame = Frame.coordinate(self.cube, 2)
        avg = np.array([[1.0, 0.0, 0.5], [0.0, 1.0, 0.0]])
        cert = linearize.extract_projection(avg, frame, lipschitz=1.0,
                                            epsilon=0.5, samples=2000)
        self.assertTrue(np.allclose(avg, cert.matrix))
        self.assertEqual(0.0, cert.identity_residual)
        self.assertEqual(0.0, cert.idempotence_residual)
        self.assertAlmostEqual(1.5, cert.norm)
        self.assertTrue(cert.pass_4L)
        self.assertTrue(cert.passed)
        self.assertEqual(4.0, cert.bound_4L)
        self.assertEqual(5.0, cert.margin_4L)
        self.assertEqual(16.0, cert.bound_final)
        self.assertAlmostEqual(6.0, cert.lambda_bound)
        self.assertTrue(cert.pass_final)

    def test_extract_projection_rescales(self):
        frame = Frame.coordinate(self.cube, 2)
        avg = np.array([[0.5, 0.0, 0.0], [0.0, 0.5, 0.0]])
        cert = linearize.extract_projection(avg, frame, samples=500)
        self.assertTrue(np.allclose(np.eye(3)[:2], cert.matrix))
        self.assertAlmostEqual(1.0, cert.norm)
        self.assertAlmostEqual(0.5, cert.restriction_deviation)
        self.assertTrue(cert.half_condition)

        far = linearize.extract_projection(0.2 * avg, frame, samples=500)
        self.assertTrue(far.passed)
        self.assertFalse(far.half_condition)
        self.assertTrue('above 1/2' in far.diagnostics)

    def test_extract_projection_singular(self):
        frame = Frame.coordinate(self.cube, 2)
        avg = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]])
        cert = linearize.extract_projection(avg, frame, samples=100)
        self.assertTrue(cert.singular)
        self.assertEqual(None, cert.matrix)
        self.assertFalse(cert.passed)
        self.assertFalse(cert.pass_4L)
        self.assertTrue('singular' in cert.diagnostics)
        data = cert.to_dict()
        self.assertFalse(data['pass'])
        self.assertEqual(None, data['lambda_bound'])
        try:
            linearize.extract_projection(np.eye(2), frame)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Averaged operator has shape (2, 2), '
                             'expected (2, 3)', str(e))

    def test_write_projection_csv(self):
        temp_dir = tempfile.mkdtemp()
        try:
            frame = Frame.coordinate(self.cube, 2)
            avg = np.array([[1.0, 0.0, 0.25], [0.0, 1.0, 0.0]])
            cert = linearize.extract_projection(avg, frame, samples=100)
            path = os.path.join(temp_dir, 'projection.csv')
            linearize.write_projection_csv(path, cert, frame)
            with open(path, 'r') as f:
                self.assertEqual('# sigma: 2', f.readline().strip())
            loaded = np.loadtxt(path, delimiter=',', comments='#')
            self.assertTrue(np.allclose(cert.matrix, loaded))
        finally:
            shutil.rmtree(temp_dir)

    def test_epsnet_coordinate_functionals(self):
        square = BlockSpace([2], block_norm='inf')
        net = linearize.epsnet_polyhedral_norm(
            square, 0.5, functionals=[[1.0, 0.0], [0.0, 1.0],
                                      [-1.0, 0.0], [0.0, -1.0]])
        x = self.rng.normal(size=(100, 2))
        self.assertTrue(np.allclose(square.norm(x), net(x)))
        self.assertEqual(4, net.size)
        self.assertEqual(25, net.size_bound)
        self.assertEqual((100, 4), net.embed(x).shape)

    def test_epsnet_eight_directions(self):
        plane = BlockSpace([2])
        angles = np.arange(8) * np.pi / 4.0
        table = np.column_stack((np.cos(angles), np.sin(angles)))
        net = linearize.epsnet_polyhedral_norm(plane, 0.5,
                                               functionals=table)
        grid = np.array([[a, b] for a in np.linspace(-1, 1, 21)
                         for b in np.linspace(-1, 1, 21)])
        base = plane.norm(grid)
        self.assertTrue(np.all(net(grid) <= base + 1e-12))
        self.assertTrue(np.all(net(grid) >= 0.5 * base - 1e-12))
        excess, _ = net.sandwich_violation(samples=500)
        self.assertTrue(excess <= 0.0)

    def test_epsnet_size_formula(self):
        net = linearize.EpsilonNetNorm(BlockSpace([2]), np.eye(2), 1.0)
        self.assertEqual(9, net.size_bound)
        self.assertEqual(9, net.to_dict()['size_bound'])

    def test_epsnet_greedy(self):
        plane = BlockSpace([2])
        net = linearize.epsnet_polyhedral_norm(plane, 0.5, seed=4)
        self.assertTrue(net.size <= net.size_bound)
        self.assertEqual(0, net.size % 2)
        try:
            linearize.epsnet_polyhedral_norm(BlockSpace([5]), 0.5)
            self.fail('Expected NetConstructionError')
        except NetConstructionError as e:
            self.assertEqual('Greedy nets are limited to 4 dims', str(e))

    def test_epsnet_errors(self):
        plane = BlockSpace([2])
        try:
            linearize.epsnet_polyhedral_norm(
                plane, 0.5, functionals=[[1.0, 0.0], [-1.0, 0.0]])
            self.fail('Expected NetConstructionError')
        except NetConstructionError as e:
            self.assertTrue(str(e).startswith('Net too coarse'))
            self.assertEqual(2, len(e.witness))
        try:
            linearize.epsnet_polyhedral_norm(plane, 0.5,
                                             functionals=[[2.0, 0.0]])
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Functionals must have dual norm one, got 2.0',
                             str(e))

    def test_pi_plan(self):
        compact = self.toy_compact()
        first, second = linearize.pi_plan(compact, 1.0, depths=[1, 2],
                                          lipschitz=2.0)
        self.assertEqual(1, first.sigma_n)
        self.assertEqual(3, first.phi)
        self.assertEqual(2, second.sigma_n)
        self.assertEqual(9, second.phi)
        h = compact.radii[2]
        self.assertEqual(h, second.height)
        self.assertAlmostEqual(1.0 / 21.0, second.radius)
        self.assertAlmostEqual(11.0 * h, second.rho)
        self.assertAlmostEqual(9.0 * h / 2.0, second.tau)
        self.assertAlmostEqual(4.0, second.budget)
        self.assertAlmostEqual(2.0 * 11.0 * h * 21.0, second.seam_bound)
        self.assertEqual(9, second.to_dict()['phi'])

    def test_pi_plan_truncates_g(self):
        compact = DiamondCompact(BlockSpace([1, 1]),
                                 diamond.small_schedule(2, epsilon=1.0))
        plan = linearize.pi_plan(compact, 1.0, depths=[1])[0]
        self.assertEqual(3, plan.phi_nominal)
        self.assertEqual(2, plan.phi)
        try:
            linearize.pi_plan(compact, 1.0, depths=[3])
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('sigma(3) = 3 exceeds the dimension 2', str(e))

    def test_pi_certificate_toy_run(self):
        compact = self.toy_compact()
        lipschitz = core.estimate_lipschitz(compact.retract,
                                            compact.pair_sampler(box=2.0),
                                            10000, seed=0).estimate
        self.assertTrue(1.0 <= lipschitz <= compact.lipschitz_bound() + 1e-6)
        report = linearize.pi_certificate(compact.space, compact,
                                          compact.retract, epsilon=1.0,
                                          depths=[2], lipschitz=lipschitz,
                                          ladder=(1e-1, 1e-3),
                                          samples=100000,
                                          smoothing_samples=16,
                                          norm_samples=2000)
        self.assertTrue(report.smallness.passed)
        self.assertTrue(report.passed)
        stage = report.stages[0]
        self.assertEqual(2, len(stage.steps))
        self.assertTrue(all(step.within for step in stage.steps))
        self.assertAlmostEqual(1e-3 / 21.0, stage.steps[-1].delta,
                               delta=1e-15)
        expected = np.hstack((np.eye(2), np.zeros((2, 7))))
        self.assertTrue(np.allclose(expected, stage.certificate.matrix,
                                    atol=1e-9))
        self.assertAlmostEqual(1.0, stage.certificate.norm)
        self.assertTrue(stage.certificate.norm <= 4.0 * lipschitz + 0.1)
        self.assertAlmostEqual(lipschitz, report.lipschitz)
        self.assertTrue(stage.certificate.pass_4L)
        self.assertAlmostEqual(1.0, report.uniform_norm)
        data = report.to_dict()
        self.assertTrue(data['pass'])
        self.assertEqual(None, data['final_bound'])
        self.assertEqual('PASS', stage.to_row()[-1])

    def test_pi_certificate_degenerate(self):
        space = BlockSpace([1])
        compact = DiamondCompact(space, diamond.default_schedule(1))
        report = linearize.pi_certificate(space, compact, compact.retract,
                                          epsilon=1.0, depths=[1],
                                          lipschitz=1.0, samples=50,
                                          norm_samples=100,
                                          require_small=False)
        stage = report.stages[0]
        self.assertEqual(0.0, stage.plan.tau)
        self.assertEqual([[1.0]], stage.certificate.matrix.tolist())
        self.assertEqual(1.0, stage.certificate.norm)
        self.assertTrue(report.passed)
        self.assertEqual(None, report.smallness)

    def test_pi_certificate_requires_small(self):
        space = BlockSpace([1, 1, 1], block_norm=1, ambient_rule=1)
        compact = DiamondCompact(space, diamond.default_schedule(3))
        try:
            linearize.pi_certificate(space, compact, compact.retract,
                                     epsilon=0.5, depths=[2],
                                     lipschitz=1.5)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertEqual('Smallness certificate failed for '
                             'epsilon=0.5', str(e))
        try:
            linearize.pi_certificate(self.euclid, compact, compact.retract)
            self.fail('Expected PreconditionError')
        except PreconditionError as e:
            self.assertTrue(str(e).startswith('Compact lives in'))

    def test_pi_certificate_failing_stage(self):
        space = BlockSpace([2, 2])
        compact = DiamondCompact(space, diamond.default_schedule(2))
        report = linearize.pi_certificate(space, compact, compact.retract,
                                          epsilon=1.0, depths=[1, 2],
                                          lipschitz=5.0, ladder=(1e-2,),
                                          samples=50, smoothing_samples=8,
                                          norm_samples=100,
                                          require_small=False)
        self.assertEqual(2, len(report.stages))
        first, second = report.stages
        self.assertFalse(first.passed)
        self.assertEqual('E must be spanned by whole blocks, sigma=1 '
                         'cuts one', first.diagnostics)
        self.assertEqual(None, first.certificate)
        self.assertTrue(second.certificate is not None)
        self.assertFalse(report.passed)


if __name__ == '__main__':
    unittest.main()
