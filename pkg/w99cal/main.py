# W99Cal - Wiedemann99 traffic simulation and calibration toolkit
# Copyright (C) 2026, the W99Cal authors
#
# This library is free software; you can redistribute it and/or
# modify it under the terms of the GNU Library General Public
# License as published by the Free Software Foundation; either
# version 2 of the License, or (at your option) any later version.
#
# This library is distributed in the hope that it will be useful,
# but WITHOUT ANY WARRANTY; without even the implied warranty of
# MERCHANTABILITY or FITNESS FOR A PARTICULAR PURPOSE.  See the GNU
# Library General Public License for more details.
#
# You should have received a copy of the GNU Library General Public
# License along with this library; if not, write to the
# Free Software Foundation, Inc., 59 Temple Place - Suite 330,
# Boston, MA 02111-1307, USA.

import argparse
import logging
import multiprocessing
import os
import sys
from enum import IntEnum

import numpy as np

from w99cal.calib import (CalibrationProblem, DENSITY_HEADER, calibrate, density_table)
from w99cal.carfollow import PARAM_NAMES, W99_RANGES
from w99cal.config import MAX_SEED, SimConfig
from w99cal.errors import (CalibrationFailedError, ConfigurationError, CongestionError,
                           ConsistencyError, DatasetParseError, DatasetValidationError,
                           DegenerateDensityError, OptimizerInitError, UsageError)
from w99cal.metrics import METRICS_HEADER, density_series, ttc_series
from w99cal.sim import run
from w99cal.sweep import (SweepSpec, rank_sensitivity, run_sweep, write_ranking, write_sweep)
from w99cal.trajdata import (DEFAULT_NEAR_MISS_TTC, TrajectoryDataset, observed_speeds,
                             tag_near_miss)
from w99cal.utils import setup_logging, write_csv
from w99cal.vehicle_class import VehicleClass

logger = logging.getLogger(__name__)

DENSITY_GRID_KMH = (0.0, 250.0, 0.5)


class ExitStatus(IntEnum):
    '''Process exit codes'''
    Success = 0
    Usage = 1
    Invalid = 2
    Failure = 3


EXIT_CODES = (
    (UsageError, ExitStatus.Usage),
    (ConfigurationError, ExitStatus.Invalid),
    (DatasetParseError, ExitStatus.Invalid),
    (DatasetValidationError, ExitStatus.Invalid),
    (OSError, ExitStatus.Invalid),
    (CongestionError, ExitStatus.Failure),
    (CalibrationFailedError, ExitStatus.Failure),
    (DegenerateDensityError, ExitStatus.Failure),
    (OptimizerInitError, ExitStatus.Failure),
    (ConsistencyError, ExitStatus.Failure),
)


class ArgumentParser(argparse.ArgumentParser):
    '''argparse parser reporting usage errors as UsageError'''

    def error(self, message):
        self.print_help(sys.stderr)
        raise UsageError(f'{self.prog}: {message}')


def _positive_int(value):
    number = int(value)
    if number < 1:
        raise argparse.ArgumentTypeError(f'must be >= 1, got {value}')
    return number


def _seed(value):
    number = int(value)
    if not 0 <= number <= MAX_SEED:
        raise argparse.ArgumentTypeError(f'must be in [0, 2^64 - 1], got {value}')
    return number


class Main:
    '''Main class for w99cal'''

    def __init__(self):
        self.parser = self._create_parser()

    def run(self, argv=None) -> ExitStatus:
        '''Runs w99cal'''
        setup_logging()
        try:
            args = self.parser.parse_args(argv)
            if not hasattr(args, 'func'):
                self.parser.print_help(sys.stderr)
                return ExitStatus.Usage
            args.func(args)
        except SystemExit as ex:
            return ExitStatus.Success if not ex.code else ExitStatus.Usage
        except tuple(error for error, _ in EXIT_CODES) as ex:
            status = next(code for error, code in EXIT_CODES if isinstance(ex, error))
            print(f'error: {ex}', file=sys.stderr)
            return status
        return ExitStatus.Success

    def _create_parser(self):
        parser = ArgumentParser(prog='w99cal', description='Wiedemann99 highway simulation, '
                                'desired-speed calibration and TTC sensitivity analysis')
        subparsers = parser.add_subparsers(title='subcommands')
        self._add_simulate_cmd(subparsers)
        self._add_calibrate_cmd(subparsers)
        self._add_sensitivity_cmd(subparsers)
        self._add_metrics_cmd(subparsers)
        self._add_validate_cmd(subparsers)
        return parser

    @staticmethod
    def _add_jobs(subparser):
        subparser.add_argument(
            '-j', '--jobs', help='number of parallel jobs to use. 1x logical cores by default. '
            '0 means all logical cores', type=int, default=multiprocessing.cpu_count())

    def _add_simulate_cmd(self, subparsers):
        subparser = subparsers.add_parser('simulate', help='run one simulation')
        subparser.add_argument('-c', '--config', help='simulation config JSON', required=True)
        subparser.add_argument('-s', '--seed', help='override the config seed', type=_seed)
        subparser.add_argument('--out-traj', help='trajectory dataset JSON output')
        subparser.add_argument('--out-stats', help='per-vehicle statistics CSV output')
        subparser.set_defaults(func=self._simulate_cmd)

    def _add_calibrate_cmd(self, subparsers):
        subparser = subparsers.add_parser(
            'calibrate', help='fit desired-speed distributions to recorded mean speeds')
        subparser.add_argument('-d', '--data', help='recorded dataset JSON', required=True)
        subparser.add_argument('-c', '--config', help='simulation config JSON', required=True)
        subparser.add_argument('-r', '--restarts', help='number of Nelder-Mead restarts',
                               type=_positive_int, default=100)
        subparser.add_argument('-s', '--seed', help='seed of the initial points',
                               type=_seed, required=True)
        subparser.add_argument('--sim-seed', type=_seed,
                               help='common simulation seed. Defaults to the config seed')
        subparser.add_argument('-o', '--out', help='result JSON output', required=True)
        subparser.add_argument('--out-csv', help='per-restart CSV output. Defaults to the '
                               'result path with a .csv extension')
        subparser.add_argument('--out-density', help='KDEs at the best parameters as CSV')
        subparser.add_argument('--bandwidth', type=float,
                               help='fixed KDE bandwidth in km/h instead of Silverman\'s rule')
        subparser.add_argument('--keep-horizon', action='store_true',
                               help='use the config horizon instead of the calibration default')
        subparser.add_argument('--all-vehicles', action='store_true',
                               help='also use vehicles that did not cross the whole region')
        self._add_jobs(subparser)
        subparser.set_defaults(func=self._calibrate_cmd)

    def _add_sensitivity_cmd(self, subparsers):
        subparser = subparsers.add_parser(
            'sensitivity', help='sweep one (or every) Wiedemann99 constant of altered cars')
        subparser.add_argument('-c', '--config', help='simulation config JSON', required=True)
        subparser.add_argument('-p', '--param', choices=PARAM_NAMES, help='constant to sweep')
        subparser.add_argument('--all', action='store_true', help='sweep all ten constants')
        subparser.add_argument('--start', type=float,
                               help='first grid value. Defaults to the reference range')
        subparser.add_argument('--end', type=float,
                               help='last grid value. Defaults to the reference range')
        subparser.add_argument('--steps', type=_positive_int, default=10, help='grid size')
        subparser.add_argument('-f', '--fraction', type=float, default=0.2,
                               help='share of altered cars')
        subparser.add_argument('--ignore-altered-leaders', action='store_true',
                               help='leave altered-behind-altered encounters out of the TTC')
        subparser.add_argument('-s', '--seed', help='override the config seed', type=_seed)
        subparser.add_argument('--keep-horizon', action='store_true',
                               help='use the config horizon instead of the sweep default')
        subparser.add_argument('-o', '--out', help='sweep CSV output (single parameter)')
        subparser.add_argument('--out-dir', help='output directory for --all')
        self._add_jobs(subparser)
        subparser.set_defaults(func=self._sensitivity_cmd)

    def _add_metrics_cmd(self, subparsers):
        subparser = subparsers.add_parser('metrics', help='TTC and density of a dataset')
        subparser.add_argument('-d', '--data', help='dataset JSON', required=True)
        subparser.add_argument('-o', '--out', help='per-vehicle TTC CSV output', required=True)
        subparser.add_argument('-c', '--config',
                               help='config whose network defines the measurement region')
        subparser.add_argument('--out-density', help='traffic density CSV output')
        subparser.add_argument('--density-step', type=float, default=1.0,
                               help='density time step in seconds')
        subparser.add_argument('--near-miss-out', help='near-miss encounters CSV output')
        subparser.add_argument('--ttc-threshold', type=float, default=DEFAULT_NEAR_MISS_TTC,
                               help='near-miss TTC threshold in seconds')
        subparser.set_defaults(func=self._metrics_cmd)

    def _add_validate_cmd(self, subparsers):
        subparser = subparsers.add_parser('validate', help='check a dataset file')
        subparser.add_argument('-d', '--data', help='dataset JSON', required=True)
        subparser.set_defaults(func=self._validate_cmd)

    @staticmethod
    def _jobs(args):
        return args.jobs if args.jobs > 0 else multiprocessing.cpu_count()

    @staticmethod
    def _load_config(path, seed=None):
        config = SimConfig.from_json_file(path)
        return config if seed is None else config.replace(seed=seed)

    def _simulate_cmd(self, args):
        if not args.out_traj and not args.out_stats:
            raise UsageError('simulate needs --out-traj and/or --out-stats')
        config = self._load_config(args.config, args.seed)
        if not args.out_traj:
            config = config.replace(record_trajectories=False)
        output = run(config)
        if args.out_traj:
            output.trajectories.to_json_file(args.out_traj)
        if args.out_stats:
            output.write_stats(args.out_stats)

    def _calibrate_cmd(self, args):
        config = self._load_config(args.config)
        dataset = TrajectoryDataset.from_json_file(args.data)
        observed = observed_speeds(dataset, config.network)
        logger.info('Observed %d car and %d truck mean speeds', observed.n_car, observed.n_truck)
        problem = CalibrationProblem.build(
            observed, config.replace(record_trajectories=False), keep_horizon=args.keep_horizon,
            seed=args.sim_seed, bandwidth=args.bandwidth, completed_only=not args.all_vehicles)
        result = calibrate(problem, args.restarts, args.seed, jobs=self._jobs(args))
        result.to_json_file(args.out)
        result.to_csv_file(args.out_csv or os.path.splitext(args.out)[0] + '.csv')
        if args.out_density:
            grid = np.arange(*DENSITY_GRID_KMH)
            write_csv(args.out_density, DENSITY_HEADER,
                      density_table(problem, result.best_theta, grid))

    def _sensitivity_cmd(self, args):
        if args.all == bool(args.param):
            raise UsageError('sensitivity needs exactly one of --param or --all')
        if args.all and not args.out_dir:
            raise UsageError('--all needs --out-dir')
        if args.param and not args.out:
            raise UsageError('--param needs --out')
        config = self._load_config(args.config, args.seed)
        options = {'altered_fraction': args.fraction,
                   'ignore_altered_leaders': args.ignore_altered_leaders}
        if args.keep_horizon:
            options['horizon'] = None
        jobs = self._jobs(args)
        if args.param:
            start, end = W99_RANGES[args.param]
            start = start if args.start is None else args.start
            end = end if args.end is None else args.end
            spec = SweepSpec(args.param, start, end, args.steps, config, **options)
            write_sweep(args.out, run_sweep(spec, jobs))
            return
        tables = {}
        for name in PARAM_NAMES:
            spec = SweepSpec.over_range(name, config, args.steps, **options)
            tables[name] = run_sweep(spec, jobs)
            write_sweep(os.path.join(args.out_dir, f'{name}.csv'), tables[name])
        write_ranking(os.path.join(args.out_dir, 'ranking.csv'), rank_sensitivity(tables))

    def _metrics_cmd(self, args):
        dataset = TrajectoryDataset.from_json_file(args.data)
        write_csv(args.out, METRICS_HEADER, (series.csv_row() for series in ttc_series(dataset)))
        if args.out_density:
            network = SimConfig.from_json_file(args.config).network if args.config \
                else SimConfig().network
            times, densities = density_series(dataset, network, args.density_step)
            write_csv(args.out_density, ['t', 'density_veh_km_lane'],
                      zip(times.tolist(), densities.tolist()))
        if args.near_miss_out:
            write_csv(args.near_miss_out, ['follower_id', 'leader_id', 'min_ttc_s'],
                      ([miss.follower_id, miss.leader_id, miss.min_ttc]
                       for miss in tag_near_miss(dataset, args.ttc_threshold)))

    def _validate_cmd(self, args):
        dataset = TrajectoryDataset.from_json_file(args.data)
        counts = dataset.class_counts()
        summary = ', '.join(f'{cls.value}: {counts[cls]}' for cls in VehicleClass)
        print(f'{args.data}: valid, {len(dataset.tracks)} tracks ({summary}), '
              f'{len(dataset.occlusions)} occlusions, provenance {dataset.meta.provenance.value}')


def main(argv=None) -> ExitStatus:
    '''Command line entry point'''
    return Main().run(argv)
