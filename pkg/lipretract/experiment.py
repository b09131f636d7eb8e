# -*- coding: utf-8 -*-

"""
Batch experiments: the configuration schema, one runner per experiment
kind and the report writers used by ``lipretractrun.py``.

A configuration is a profile section of an INI file::

    [lipretract]
    kind = estimate-lipschitz
    seed = 1
    dims = 1,1,1,1
    schedule = delta
    delta = 0.5
    map = retract

Every report embeds the SHA-256 hash of the resolved configuration and
:py:const:`SCHEMA_VERSION`. Reports carry no timestamps, so identical
configurations give byte identical files.
"""

import os
import csv
import json
import hashlib
import logging
import configparser

import numpy as np
from tqdm import tqdm

from lipretract import core
from lipretract import counterexample
from lipretract import diamond
from lipretract import linearize
from lipretract import proximity
from lipretract import smallness
from lipretract.core import BlockSpace
from lipretract.diamond import DiamondCompact
from lipretract.exceptions import LipRetractError
from lipretract.exceptions import PreconditionError
from lipretract.exceptions import SchemaError

logger = logging.getLogger(__name__)

SCHEMA_VERSION = '1.0'

DEFAULT_PROFILE = 'lipretract'

REPORT_FILE = 'report.json'

KINDS = ('build-compact', 'estimate-lipschitz', 'check-smallness',
         'nearest-point', 'extract-projection', 'pi-certificate',
         'counterexample-audit')

REQUIRED_KEYS = ('kind', 'seed')

BOUND_SLACK = 1e-6


def _int(value):
    return int(value)


def _float(value):
    return float(value)


def _optional_float(value):
    if value.strip().lower() in ('', 'none'):
        return None
    return float(value)


def _bool(value):
    cleaned = value.strip().lower()
    if cleaned in ('1', 'true', 'yes', 'on'):
        return True
    if cleaned in ('0', 'false', 'no', 'off'):
        return False
    raise ValueError('not a boolean')


def _int_list(value):
    return [int(v) for v in value.split(',') if v.strip()]


def _float_list(value):
    return [float(v) for v in value.split(',') if v.strip()]


def _optional_int_list(value):
    if value.strip().lower() in ('', 'none'):
        return None
    return _int_list(value)


def _choice(*options):
    def parse(value):
        cleaned = value.strip().lower()
        if cleaned not in options:
            raise ValueError('expected one of ' + ', '.join(options))
        return cleaned
    return parse


SCHEMA = {
    'kind': (_choice(*KINDS), None),
    'seed': (_int, None),
    'workers': (_int, 1),
    'output': (str, 'lipretract_out'),
    'dims': (_optional_int_list, None),
    'block_norm': (_choice('1', '2', 'inf'), '2'),
    'ambient_rule': (_choice('1', '2', 'inf'), '2'),
    'monotone': (_bool, True),
    'schedule': (_choice('default', 'delta', 'small'), 'default'),
    'delta': (_float, 0.5),
    'r1': (_float, 1.0),
    'epsilon': (_float, smallness.DEFAULT_EPSILON),
    'sigma': (_choice('identity', 'triangular'), 'identity'),
    'depth': (_int, 8),
    'depths': (_int_list, [1]),
    'pairs': (_int, 10000),
    'samples': (_int, 2000),
    'map': (_choice('identity', 'retract', 'radial', 'seam'), 'retract'),
    'map_param': (_float, 1.0),
    'bound': (_optional_float, None),
    'scales': (_float_list, list(core.DEFAULT_SCALES)),
    'solver': (_choice('fw', 'exact', 'general'), 'fw'),
    'norm': (_choice('base', 'ured'), 'base'),
    'queries': (_int, 100),
    'ladder': (_float_list, list(linearize.DEFAULT_LADDER)),
    'smoothing_samples': (_int, 64),
    'blocks': (_int, 2),
    'tube_delta': (_float, 0.5),
    'candidate': (_choice('minkowski', 'zero'), 'minkowski'),
}
"""
Key -> (parser, default) of the flat configuration schema
"""


class ExperimentConfig(object):
    """
    Validated experiment configuration
    """

    def __init__(self, values):
        self._values = dict(values)

    @staticmethod
    def from_mapping(mapping):
        """
        Parses and validates string `mapping` against :py:const:`SCHEMA`

        :raises SchemaError: on unknown keys, missing required keys,
                             unparsable values or values out of range
        """
        for key in mapping:
            if key not in SCHEMA:
                raise SchemaError('Unknown configuration key: ' + str(key))
        for key in REQUIRED_KEYS:
            if key not in mapping:
                raise SchemaError('Missing required key: ' + key)
        values = {}
        for key, (parser, default) in SCHEMA.items():
            if key not in mapping:
                values[key] = default
                continue
            raw = mapping[key]
            try:
                values[key] = parser(str(raw))
            except ValueError as e:
                raise SchemaError('Cannot parse ' + key + ' = ' + str(raw) +
                                  ': ' + str(e))
        config = ExperimentConfig(values)
        config.validate()
        return config

    def validate(self):
        """
        Range checks beyond parsing

        :raises SchemaError: on the first value out of range
        """
        v = self._values
        checks = [(v['seed'] >= 0, 'seed must be nonnegative'),
                  (v['workers'] >= 1, 'workers must be at least 1'),
                  (v['depth'] >= 1, 'depth must be at least 1'),
                  (0.0 < v['epsilon'] <= 1.0, 'epsilon must lie in (0, 1]'),
                  (v['delta'] > 0, 'delta must be positive'),
                  (v['r1'] > 0, 'r1 must be positive'),
                  (v['pairs'] >= 1, 'pairs must be at least 1'),
                  (v['samples'] >= 1, 'samples must be at least 1'),
                  (v['queries'] >= 1, 'queries must be at least 1'),
                  (v['smoothing_samples'] >= 1,
                   'smoothing_samples must be at least 1'),
                  (1 <= v['blocks'] <= counterexample.BLOCK_DIM_LIMIT,
                   'blocks must lie in 1..' +
                   str(counterexample.BLOCK_DIM_LIMIT)),
                  (v['tube_delta'] >= 0, 'tube_delta must be nonnegative'),
                  (len(v['scales']) > 0 and min(v['scales']) > 0,
                   'scales must be positive'),
                  (len(v['ladder']) > 0 and min(v['ladder']) > 0,
                   'ladder must be positive'),
                  (min(v['depths'], default=1) >= 1,
                   'depths must be at least 1')]
        if v['dims'] is not None:
            checks.append((len(v['dims']) > 0 and min(v['dims']) >= 1,
                           'dims must be positive'))
        for ok, message in checks:
            if not ok:
                raise SchemaError(message)

    def __getitem__(self, key):
        return self._values[key]

    @property
    def kind(self):
        return self._values['kind']

    @property
    def seed(self):
        return self._values['seed']

    @property
    def workers(self):
        return self._values['workers']

    @property
    def output(self):
        return self._values['output']

    @property
    def dims(self):
        """
        Block dimensions, one dimensional blocks up to `depth` by
        default
        """
        if self._values['dims'] is not None:
            return list(self._values['dims'])
        return [1] * self._values['depth']

    def with_overrides(self, seed=None, workers=None, output=None):
        """
        Copy with command line values replacing file values
        """
        values = dict(self._values)
        if seed is not None:
            values['seed'] = int(seed)
        if workers is not None:
            values['workers'] = int(workers)
        if output is not None:
            values['output'] = output
        config = ExperimentConfig(values)
        config.validate()
        return config

    def to_dict(self):
        return {key: self._values[key] for key in sorted(self._values)}

    def config_hash(self):
        """
        SHA-256 of the canonical JSON form, output directory excluded
        """
        data = self.to_dict()
        del data['output']
        canonical = json.dumps(data, sort_keys=True, separators=(',', ':'))
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def load_config(path, profile=DEFAULT_PROFILE):
    """
    Reads the `profile` section of the INI file at `path`

    :raises SchemaError: if the file or section is missing or the
                         section violates the schema
    :rtype: :py:class:`ExperimentConfig`
    """
    if path is None or not os.path.isfile(path):
        raise SchemaError('Configuration file not found: ' + str(path))
    con = configparser.ConfigParser()
    try:
        con.read(path)
    except configparser.Error as e:
        raise SchemaError('Unable to parse ' + path + ': ' + str(e))
    if not con.has_section(profile):
        raise SchemaError('No [' + profile + '] section in ' + path)
    return ExperimentConfig.from_mapping(dict(con.items(profile)))


class ExperimentResult(object):
    """
    Outcome of a runner: verdict, report body and CSV series
    """

    def __init__(self, kind, passed, body, series=None, error=None):
        self.kind = kind
        self.passed = bool(passed)
        self.body = body
        self.series = series or {}
        self.error = error

    def to_dict(self, config):
        return {'schema_version': SCHEMA_VERSION,
                'config_hash': config.config_hash(),
                'config': config.to_dict(),
                'kind': self.kind,
                'pass': self.passed,
                'error': self.error,
                'result': self.body}


def build_space(config):
    return BlockSpace(config.dims, block_norm=config['block_norm'],
                      ambient_rule=config['ambient_rule'],
                      monotone=config['monotone'])


def build_schedule(config, depth):
    name = config['schedule']
    if name == 'delta':
        return diamond.schedule_for_delta(config['delta'], depth,
                                          r1=config['r1'])
    if name == 'small':
        return diamond.small_schedule(depth, epsilon=config['epsilon'],
                                      r1=config['r1'])
    return diamond.default_schedule(depth, r1=config['r1'])


def build_compact(config):
    """
    Diamond compact over the configured space and schedule
    """
    space = build_space(config)
    return DiamondCompact(space, build_schedule(config, space.block_count))


def finite_or_none(value):
    """
    Copy of `value` with every inf or nan float replaced by None, so
    reports stay strict JSON
    """
    if isinstance(value, dict):
        return {k: finite_or_none(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [finite_or_none(v) for v in value]
    if isinstance(value, np.ndarray):
        return finite_or_none(value.tolist())
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    return value


def to_json(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer, np.bool_)):
        return value.item()
    raise TypeError('Not serializable: ' + repr(value))


def _run_build_compact(config, progress):
    compact = build_compact(config)
    space = compact.space
    body = {'compact': compact.to_dict(),
            'lipschitz_bound': compact.lipschitz_bound(),
            'span_rank': compact.span_rank(seed=config.seed)}
    progress.update()
    passed = body['span_rank'] == space.dim
    try:
        hull = compact.hull_check(samples=config['queries'],
                                  seed=config.seed)
        body['hull_check'] = {'pass': hull.passed, 'checked': hull.checked,
                              'witness': hull.witness}
        passed = passed and hull.passed
    except LipRetractError as e:
        logger.info('Hull check skipped: ' + str(e))
        body['hull_check'] = None
    progress.update()
    schedule = compact.schedule
    rows = [[k, r, q] for k, (r, q) in
            enumerate(zip(schedule.r, schedule.q), start=1)]
    return ExperimentResult(config.kind, passed, body,
                            {'radii': (['k', 'r', 'q'], rows)})


def _lipschitz_map(config, compact):
    """
    (map, bound, output norm) for the configured map
    """
    space = compact.space
    name = config['map']
    if name == 'identity':
        return (lambda x: x), 1.0, None
    if name == 'radial':
        rho = config['map_param']
        return (lambda x: space.radial_projection(x, rho)), 2.0, None
    if name == 'seam':
        m = int(config['map_param'])
        if not 1 <= m <= compact.depth:
            raise PreconditionError('m out of range 1..' +
                                    str(compact.depth))
        return ((lambda x: compact.f_m(x, m)),
                compact.f_m_lipschitz_bound(m), np.abs)
    return compact.retract, compact.lipschitz_bound(), None


def _run_estimate_lipschitz(config, progress):
    compact = build_compact(config)
    func, bound, out_norm = _lipschitz_map(config, compact)
    if config['bound'] is not None:
        bound = config['bound']
    sampler = compact.pair_sampler(box=2.0)
    report = core.estimate_lipschitz(func, sampler, config['pairs'],
                                     config.seed, out_norm=out_norm,
                                     workers=config.workers)
    progress.update()
    table = core.estimate_modulus(func, sorted(config['scales']),
                                  config['samples'], config.seed + 1,
                                  sampler, out_norm=out_norm,
                                  workers=config.workers)
    progress.update()
    passed = report.estimate <= bound + BOUND_SLACK
    body = {'map': config['map'], 'bound': bound,
            'lipschitz': report.to_dict(), 'modulus': table.to_dict()}
    return ExperimentResult(config.kind, passed, body,
                            {'omega': (['t', 'omega'], table.to_rows())})


def _run_check_smallness(config, progress):
    compact = build_compact(config)
    cert = smallness.check_small(compact, epsilon=config['epsilon'],
                                 sigma=config['sigma'],
                                 samples=config['samples'],
                                 seed=config.seed)
    progress.update()
    return ExperimentResult(config.kind, cert.passed, cert.to_dict(),
                            {'smallness': (cert.ROW_HEADER,
                                           cert.to_rows())})


def _run_nearest_point_base(config, compact, progress):
    space = compact.space
    rng = np.random.default_rng(config.seed)
    queries = compact.pair_sampler(box=2.0).draw_points(rng,
                                                        config['queries'])
    rows = []
    gaps = []
    oracle_gap = 0.0
    exact = space.is_euclidean and max(space.dims) == 1
    for x in tqdm(queries, desc='Nearest points', unit=' queries',
                  disable=progress.disable):
        if config['solver'] == 'fw':
            res = proximity.nearest_point_fw(x, compact)
        elif config['solver'] == 'general':
            res = proximity.nearest_point_general(x, compact,
                                                  seed=config.seed)
        else:
            point = proximity.project_euclidean_diamond(x, compact)
            res = proximity.NearestPointResult(
                point, space.norm(x - point), 0, 0.0, solver='exact')
        if res.gap is not None:
            gaps.append(res.gap)
        if exact:
            oracle = proximity.project_euclidean_diamond(x, compact)
            oracle_gap = max(oracle_gap, float(space.norm(res.point -
                                                          oracle)))
        rows.append([res.distance, res.gap, res.spread, res.iterations,
                     res.note])
    progress.update()
    mapped = proximity.nearest_point_map(compact, solver=config['solver'])
    report = core.estimate_lipschitz(mapped, compact.pair_sampler(box=2.0),
                                     config['pairs'], config.seed + 1,
                                     workers=config.workers)
    progress.update()
    bound = 1.0 if config['bound'] is None else config['bound']
    max_gap = max(gaps) if gaps else None
    passed = ((max_gap is None or max_gap <= proximity.GAP_PASS) and
              report.estimate <= bound + BOUND_SLACK)
    if exact:
        passed = passed and oracle_gap <= 2e-3
    body = {'solver': config['solver'], 'norm': 'base',
            'max_gap': max_gap,
            'oracle_gap': oracle_gap if exact else None,
            'lipschitz': report.to_dict(), 'bound': bound}
    return ExperimentResult(config.kind, passed, body,
                            {'queries': (['distance', 'gap', 'spread',
                                          'iterations', 'note'], rows)})


def _run_nearest_point_ured(config, compact, progress):
    space = compact.space
    renorm = proximity.ured_renorm(space)
    z = np.zeros(space.dim)
    z[0] = 1.0
    z = z / float(renorm.norm(z))
    rotundity = proximity.rotundity_probe(renorm.norm, z,
                                          samples=config['samples'],
                                          seed=config.seed)
    progress.update()
    mapped = proximity.nearest_point_map(compact, solver='general',
                                         norm=renorm.norm, seed=config.seed)
    continuity = proximity.uniform_continuity_probe(
        mapped, space, scales=config['scales'], samples=config['queries'],
        seed=config.seed + 1, workers=config.workers)
    progress.update()
    passed = continuity.passed and not rotundity.found
    body = {'solver': 'general', 'norm': 'ured',
            'renorm': renorm.to_dict(), 'rotundity': rotundity.to_dict(),
            'continuity': continuity.to_dict()}
    return ExperimentResult(config.kind, passed, body,
                            {'omega': (['t', 'omega'],
                                       continuity.table.to_rows())})


def _run_nearest_point(config, progress):
    compact = build_compact(config)
    if config['norm'] == 'ured':
        return _run_nearest_point_ured(config, compact, progress)
    return _run_nearest_point_base(config, compact, progress)


def _pi_report(config, compact, depths, require_small):
    return linearize.pi_certificate(
        compact.space, compact, compact.retract,
        epsilon=config['epsilon'], sigma=config['sigma'], depths=depths,
        pairs=config['pairs'], ladder=config['ladder'],
        samples=config['samples'],
        smoothing_samples=config['smoothing_samples'], seed=config.seed,
        workers=config.workers, norm_samples=config['samples'],
        require_small=require_small)


def _run_extract_projection(config, progress):
    compact = build_compact(config)
    report = _pi_report(config, compact, config['depths'][:1], False)
    progress.update()
    series = {}
    stage = report.stages[0] if report.stages else None
    if stage is not None and stage.certificate is not None:
        cert = stage.certificate
        if cert.matrix is not None:
            header = ['row'] + ['c' + str(j + 1)
                                for j in range(cert.matrix.shape[1])]
            rows = [[i + 1] + list(r)
                    for i, r in enumerate(cert.matrix.tolist())]
            series['projection'] = (header, rows)
    body = report.to_dict()
    return ExperimentResult(config.kind, report.passed, body, series)


def _run_pi_certificate(config, progress):
    compact = build_compact(config)
    report = _pi_report(config, compact, config['depths'], True)
    progress.update()
    return ExperimentResult(config.kind, report.passed, report.to_dict(),
                            {'stages': (report.ROW_HEADER,
                                        report.to_rows())})


def _run_counterexample_audit(config, progress):
    compact = counterexample.build_assembled(
        config['blocks'], epsilon=config['epsilon'],
        tube_delta=config['tube_delta'], seed=config.seed)
    progress.update()
    if config['candidate'] == 'zero':
        candidate = np.zeros_like
    else:
        candidate = proximity.minkowski_retraction(compact.gauge)
    report = counterexample.retraction_audit(
        candidate, compact, pairs=config['pairs'],
        fixed_samples=config['queries'], seed=config.seed,
        workers=config.workers)
    progress.update()
    # the audit is evidence, not a bound: passing means the candidate
    # fixes K and every block estimate is finite
    passed = (report.displacement <= counterexample.FIXES_TOL and
              all(np.isfinite(r.estimate) for r in report.records))
    body = {'compact': compact.to_dict(), 'audit': report.to_dict()}
    return ExperimentResult(config.kind, passed, body,
                            {'audit': (report.ROW_HEADER,
                                       report.to_rows())})


RUNNERS = {
    'build-compact': _run_build_compact,
    'estimate-lipschitz': _run_estimate_lipschitz,
    'check-smallness': _run_check_smallness,
    'nearest-point': _run_nearest_point,
    'extract-projection': _run_extract_projection,
    'pi-certificate': _run_pi_certificate,
    'counterexample-audit': _run_counterexample_audit,
}


def run_experiment(config, disable_tqdm=True):
    """
    Runs the pipeline named by ``config.kind``.

    Pipeline errors yield a failing result carrying the error message
    instead of propagating.

    :rtype: :py:class:`ExperimentResult`
    """
    progress = tqdm(desc=config.kind, unit=' steps', disable=disable_tqdm)
    try:
        return RUNNERS[config.kind](config, progress)
    except LipRetractError as e:
        logger.error('Pipeline ' + config.kind + ' failed: ' + str(e))
        return ExperimentResult(config.kind, False, None, error=str(e))
    finally:
        progress.close()


def describe(config):
    """
    Resolved parameters of `config` without running it or writing
    anything

    :rtype: dict
    """
    plan = {'kind': config.kind, 'seed': config.seed,
            'schema_version': SCHEMA_VERSION,
            'config_hash': config.config_hash()}
    if config.kind == 'counterexample-audit':
        blocks = config['blocks']
        plan['lambdas'] = diamond.default_schedule(blocks).r.tolist()
        plan['deltas'] = [config['tube_delta'] / n
                          for n in range(1, blocks + 1)]
        plan['M_n'] = [counterexample.M_n(n, config['epsilon'])
                       for n in range(1, blocks + 1)]
        return plan
    compact = build_compact(config)
    plan['dims'] = list(compact.space.dims)
    plan['radii'] = np.asarray(compact.radii).tolist()
    plan['lipschitz_bound'] = compact.lipschitz_bound()
    if config.kind in ('pi-certificate', 'extract-projection'):
        depths = config['depths']
        if config.kind == 'extract-projection':
            depths = depths[:1]
        stages = linearize.pi_plan(compact, config['epsilon'],
                                   sigma=config['sigma'], depths=depths,
                                   lipschitz=compact.lipschitz_bound())
        plan['stages'] = [s.to_dict() for s in stages]
    return plan


def _write_series(path, header, rows):
    with open(path, 'w', newline='') as f:
        writer = csv.writer(f)
        writer.writerow(header)
        for row in rows:
            writer.writerow([repr(float(v))
                             if isinstance(v, (float, np.floating)) else v
                             for v in row])


def write_report(result, config, outdir=None):
    """
    Writes ``report.json`` and one CSV per series under `outdir`

    :return: paths written
    :rtype: list
    """
    outdir = outdir or config.output
    os.makedirs(outdir, exist_ok=True)
    written = []
    path = os.path.join(outdir, REPORT_FILE)
    with open(path, 'w') as f:
        json.dump(finite_or_none(result.to_dict(config)), f, indent=2,
                  sort_keys=True, allow_nan=False, default=to_json)
    written.append(path)
    for name in sorted(result.series):
        header, rows = result.series[name]
        csv_path = os.path.join(outdir, name + '.csv')
        _write_series(csv_path, header, rows)
        written.append(csv_path)
    logger.info('Wrote ' + str(len(written)) + ' files to ' + outdir)
    return written
