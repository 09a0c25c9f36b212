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

'''
Simulation-based calibration of the desired-speed distributions: Gaussian
KDEs over simulated mean speeds, the negative log-likelihood of recorded
mean speeds under them, and a multi-start Nelder-Mead driver.
'''

import logging
from dataclasses import dataclass, field
from functools import partial
from multiprocessing import Pool
from typing import Callable, List, NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize

from w99cal.config import MAX_SEED, SimConfig
from w99cal.errors import (CalibrationFailedError, ConfigurationError, CongestionError,
                           DegenerateDensityError, OptimizerInitError)
from w99cal.sim import run
from w99cal.trajdata import ObservedSpeeds
from w99cal.utils import write_csv, write_json
from w99cal.vehicle_class import VehicleClass

logger = logging.getLogger(__name__)

DENSITY_FLOOR = 1e-300
PENALTY = 1e9
THETA_NAMES = ('mu_car', 'sigma_car', 'mu_truck', 'sigma_truck')
DEFAULT_BOUNDS = ((80.0, 200.0), (1.0, 40.0), (60.0, 120.0), (1.0, 20.0))
# Calibration horizon including warm-up: 1800 s measured after 600 s
EVAL_HORIZON_S = 2400.0
NELDER_MEAD_OPTIONS = {'xatol': 1e-3, 'fatol': 1e-6, 'maxiter': 500, 'adaptive': True}
# Recovery tolerance per component, the basin check uses twice as much
RECOVERY_TOLERANCE = (2.0, 3.0, 2.0, 3.0)
RUNS_HEADER = ['restart'] + list(THETA_NAMES) + ['objective']
DENSITY_HEADER = ['speed_kmh', 'car_density', 'truck_density']


@dataclass
class Density:
    '''Gaussian kernel density over speeds in km/h'''
    samples: np.ndarray
    bandwidth: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1)
        if len(self.samples) == 0:
            raise DegenerateDensityError('density without samples')
        if not np.isfinite(self.bandwidth) or not self.bandwidth > 0:
            raise DegenerateDensityError(f'bandwidth must be finite and > 0, got {self.bandwidth}')

    def __call__(self, x):
        return kde_eval(self, x)


def silverman_bandwidth(samples) -> float:
    '''0.9 * min(std, IQR / 1.34) * n^(-1/5); the std alone when the IQR is zero'''
    samples = np.asarray(samples, dtype=float)
    std = np.std(samples)
    q75, q25 = np.percentile(samples, [75, 25])
    iqr = (q75 - q25) / 1.34
    spread = min(std, iqr) if iqr > 0 else std
    return 0.9 * spread * len(samples) ** -0.2


def kde_fit(samples, bandwidth: float = None) -> Density:
    '''Fit a KDE, Silverman's rule unless a bandwidth is forced'''
    samples = np.asarray(samples, dtype=float).reshape(-1)
    if len(samples) < 2:
        raise DegenerateDensityError(f'need at least 2 samples to fit a density, got {len(samples)}')
    if not np.all(np.isfinite(samples)):
        raise DegenerateDensityError('non-finite sample')
    if np.ptp(samples) == 0:
        raise DegenerateDensityError(f'all {len(samples)} samples equal {samples[0]:g}')
    return Density(samples, silverman_bandwidth(samples) if bandwidth is None else bandwidth)


def kde_eval(density: Density, x):
    '''Density at x, floored at DENSITY_FLOOR'''
    x = np.asarray(x, dtype=float)
    z = (x.reshape(-1, 1) - density.samples.reshape(1, -1)) / density.bandwidth
    values = np.exp(-0.5 * np.square(z)).sum(axis=1) / \
        (len(density.samples) * density.bandwidth * np.sqrt(2 * np.pi))
    values = np.maximum(values, DENSITY_FLOOR).reshape(x.shape)
    return float(values) if values.ndim == 0 else values


def _log_density(density: Callable, speeds):
    speeds = np.asarray(speeds, dtype=float)
    if len(speeds) == 0:
        return 0.0
    return float(np.sum(np.log(np.maximum(density(speeds), DENSITY_FLOOR))))


def neg_log_likelihood(density_car: Optional[Callable], density_truck: Optional[Callable],
                       observed: ObservedSpeeds) -> float:
    '''-sum ln phi_car(v_car) - sum ln phi_truck(v_truck); empty classes add nothing'''
    return -_log_density(density_car, observed.car_speeds) - \
        _log_density(density_truck, observed.truck_speeds)


@dataclass
class CalibrationProblem:
    '''Observed speeds, the base scenario and the search space of theta'''
    observed: ObservedSpeeds
    config: SimConfig
    bounds: np.ndarray = field(default_factory=lambda: np.array(DEFAULT_BOUNDS))
    seed: int = None
    bandwidth: float = None
    completed_only: bool = True

    def __post_init__(self):
        self.bounds = np.asarray(self.bounds, dtype=float).reshape(len(THETA_NAMES), 2)
        if np.any(self.bounds[:, 0] >= self.bounds[:, 1]):
            raise ConfigurationError('calibration bounds need lower < upper per component')
        if self.observed.n_car == 0 and self.observed.n_truck == 0:
            raise ConfigurationError('no observed car or truck speeds to calibrate against')
        if self.seed is None:
            self.seed = self.config.seed
        if self.bandwidth is None:
            self.bandwidth = self.config.kde_bandwidth

    @classmethod
    def build(cls, observed: ObservedSpeeds, config: SimConfig, keep_horizon=False, **kwargs):
        '''Problem with the calibration evaluation horizon unless `keep_horizon`'''
        if not keep_horizon:
            config = config.replace(horizon=EVAL_HORIZON_S)
        return cls(observed, config, **kwargs)

    @property
    def lower(self):
        '''Lower bounds of theta'''
        return self.bounds[:, 0]

    @property
    def upper(self):
        '''Upper bounds of theta'''
        return self.bounds[:, 1]

    def out_of_bounds(self, theta):
        '''Total distance of theta outside the bounds'''
        theta = np.asarray(theta, dtype=float)
        return float(np.sum(np.maximum(self.lower - theta, 0) + np.maximum(theta - self.upper, 0)))

    def config_for(self, theta) -> SimConfig:
        '''Base scenario with theta substituted, under the common seed'''
        return self.config.with_desired_speeds(theta).replace(seed=self.seed)


def fit_densities(theta, problem: CalibrationProblem):
    '''Simulate at theta and fit per-class KDEs; None for classes never observed'''
    output = run(problem.config_for(theta))
    densities = []
    for cls, observed in ((VehicleClass.Car, problem.observed.n_car),
                          (VehicleClass.Truck, problem.observed.n_truck)):
        if observed == 0:
            densities.append(None)
            continue
        speeds = output.mean_speeds(cls, completed_only=problem.completed_only)
        densities.append(kde_fit(speeds, problem.bandwidth))
    return tuple(densities)


def objective(theta, problem: CalibrationProblem) -> float:
    '''Negative log-likelihood of the observed speeds at theta, penalized outside bounds'''
    theta = np.asarray(theta, dtype=float)
    if not np.all(np.isfinite(theta)):
        return PENALTY
    distance = problem.out_of_bounds(theta)
    if distance > 0:
        logger.debug('theta %s outside bounds by %g', theta, distance)
        return PENALTY + distance
    try:
        density_car, density_truck = fit_densities(theta, problem)
    except CongestionError as ex:
        logger.warning('theta %s: %s, penalized', np.round(theta, 3), ex)
        return PENALTY
    except DegenerateDensityError as ex:
        logger.warning('theta %s: %s, penalized', np.round(theta, 3), ex)
        return PENALTY
    value = neg_log_likelihood(density_car, density_truck, problem.observed)
    logger.debug('objective(%s) = %.6f', np.round(theta, 4), value)
    return value


class NelderMeadResult(NamedTuple):
    '''Outcome of one simplex search'''
    x: np.ndarray
    fun: float
    iterations: int
    converged: bool


def nelder_mead(f: Callable, x0, options: dict = None) -> NelderMeadResult:
    '''Adaptive Nelder-Mead from x0; never returns a value worse than f(x0)'''
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    if len(x0) == 0 or not np.all(np.isfinite(x0)):
        raise OptimizerInitError(f'invalid starting point {x0}')
    f0 = f(x0)
    if not np.isfinite(f0):
        raise OptimizerInitError(f'objective is {f0} at the starting point {x0}')
    settings = dict(NELDER_MEAD_OPTIONS)
    settings.update(options or {})
    result = minimize(f, x0, method='Nelder-Mead', options=settings)
    if result.fun > f0:
        return NelderMeadResult(x0, float(f0), int(result.nit), bool(result.success))
    return NelderMeadResult(np.asarray(result.x, dtype=float), float(result.fun),
                            int(result.nit), bool(result.success))


@dataclass
class RestartRun:
    '''One multi-start restart'''
    index: int
    initial: np.ndarray
    final: np.ndarray
    objective: float
    iterations: int
    converged: bool

    @property
    def penalized(self):
        '''Whether the restart never left the penalty plateau'''
        return self.objective >= PENALTY

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        return {'restart': self.index,
                'initial': dict(zip(THETA_NAMES, self.initial.tolist())),
                'final': dict(zip(THETA_NAMES, self.final.tolist())),
                'objective': self.objective,
                'iterations': self.iterations,
                'converged': self.converged}


@dataclass
class CalibrationResult:
    '''Best theta over all restarts plus every run for robustness analysis'''
    best_theta: np.ndarray
    best_objective: float
    best_index: int
    runs: List[RestartRun]

    def basin_fraction(self, tolerance=RECOVERY_TOLERANCE) -> float:
        '''Share of restarts ending within `tolerance` of the best theta, componentwise'''
        tolerance = np.broadcast_to(np.asarray(tolerance, dtype=float), self.best_theta.shape)
        near = [np.all(np.abs(run.final - self.best_theta) <= tolerance) for run in self.runs]
        return float(np.mean(near))

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        return {'best': dict(zip(THETA_NAMES, self.best_theta.tolist())),
                'objective': self.best_objective,
                'best_restart': self.best_index,
                'basin_fraction': self.basin_fraction(2 * np.asarray(RECOVERY_TOLERANCE)),
                'runs': [run.data_to_serialize() for run in self.runs]}

    def to_json_file(self, path: str):
        '''Write the result JSON'''
        write_json(path, self.data_to_serialize())

    def to_csv_file(self, path: str):
        '''Write one row per restart'''
        write_csv(path, RUNS_HEADER,
                  ([run.index] + run.final.tolist() + [run.objective] for run in self.runs))


def _restart(job, problem: CalibrationProblem, options: dict):
    index, x0 = job
    logger.info('Restart %d from %s', index, np.round(x0, 2))
    result = nelder_mead(partial(objective, problem=problem), x0, options)
    logger.info('Restart %d done: %s -> %.6f after %d iterations%s', index,
                np.round(result.x, 2), result.fun, result.iterations,
                '' if result.converged else ' (not converged)')
    return RestartRun(index, np.asarray(x0, dtype=float), result.x, result.fun,
                      result.iterations, result.converged)


def initial_points(problem: CalibrationProblem, n_restarts: int, master_seed: int):
    '''Uniform starting points within the bounds'''
    rng = np.random.default_rng(master_seed)
    return rng.uniform(problem.lower, problem.upper, size=(n_restarts, len(THETA_NAMES)))


def calibrate(problem: CalibrationProblem, n_restarts: int, master_seed: int, jobs: int = 1,
              initial=None, options: dict = None) -> CalibrationResult:
    '''
    Multi-start Nelder-Mead. Starting points are drawn from `master_seed`
    unless given; the best run wins, ties going to the lowest restart index.
    '''
    if n_restarts < 1:
        raise ConfigurationError(f'need at least one restart, got {n_restarts}')
    if not 0 <= master_seed <= MAX_SEED:
        raise ConfigurationError(f'master seed must be a 64-bit unsigned integer, got {master_seed}')
    starts = initial_points(problem, n_restarts, master_seed) if initial is None \
        else np.asarray(initial, dtype=float).reshape(n_restarts, len(THETA_NAMES))
    jobs_list = list(enumerate(starts))
    worker = partial(_restart, problem=problem, options=options)
    if jobs > 1 and n_restarts > 1:
        with Pool(min(jobs, n_restarts)) as pool:
            runs = pool.map(worker, jobs_list)
    else:
        runs = [worker(job) for job in jobs_list]
    candidates = [run for run in runs if not run.penalized]
    if not candidates:
        raise CalibrationFailedError(f'all {n_restarts} restarts ended penalized')
    best = min(candidates, key=lambda run: (run.objective, run.index))
    logger.info('Best restart %d: %s objective %.6f', best.index,
                np.round(best.final, 3), best.objective)
    return CalibrationResult(best.final, best.objective, best.index, runs)


def density_table(problem: CalibrationProblem, theta, grid):
    '''Rows of speed, car density, truck density fitted at theta'''
    density_car, density_truck = fit_densities(theta, problem)
    grid = np.asarray(grid, dtype=float)
    car = density_car(grid) if density_car is not None else np.full(len(grid), np.nan)
    truck = density_truck(grid) if density_truck is not None else np.full(len(grid), np.nan)
    return [[speed, c if np.isfinite(c) else None, k if np.isfinite(k) else None]
            for speed, c, k in zip(grid.tolist(), np.atleast_1d(car).tolist(),
                                   np.atleast_1d(truck).tolist())]
