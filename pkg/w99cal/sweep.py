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
One-at-a-time sensitivity of TTC to the Wiedemann99 constants of an altered
subset of cars.
'''

import logging
from dataclasses import dataclass
from functools import partial
from multiprocessing import Pool
from typing import List, Optional

import numpy as np

from w99cal.carfollow import PARAM_NAMES, W99_RANGES
from w99cal.config import AlteredSpec, SimConfig
from w99cal.errors import ConfigurationError, CongestionError
from w99cal.metrics import sweep_aggregate
from w99cal.sim import run
from w99cal.utils import write_csv
from w99cal.vehicle_class import VehicleClass

logger = logging.getLogger(__name__)

DEFAULT_ALTERED_FRACTION = 0.2
SWEEP_HORIZON_S = 1200.0
SWEEP_HEADER = ['value', 'min_mean_ttc_s', 'min_min_ttc_s', 'n_altered', 'failed']
RANKING_HEADER = ['parameter', 'ttc_range_s']


@dataclass(frozen=True)
class SweepSpec:
    '''Grid over one W99 constant applied to an altered share of cars'''
    # pylint: disable=too-many-instance-attributes
    parameter: str
    start: float
    end: float
    steps: int
    config: SimConfig
    altered_fraction: float = DEFAULT_ALTERED_FRACTION
    horizon: Optional[float] = SWEEP_HORIZON_S
    ignore_altered_leaders: bool = False

    def __post_init__(self):
        if self.parameter not in PARAM_NAMES:
            raise ConfigurationError(f'unknown Wiedemann99 parameter "{self.parameter}"')
        if self.steps < 1 or (self.steps == 1 and self.start != self.end):
            raise ConfigurationError(
                f'a sweep needs at least 2 steps (or 1 with start == end), got {self.steps}')
        if not 0 <= self.altered_fraction <= 1:
            raise ConfigurationError(
                f'altered fraction must be in [0, 1], got {self.altered_fraction}')
        base = self.config.w99[VehicleClass.Car]
        for value in (self.start, self.end):
            base.replace(**{self.parameter: value}).validate()

    @classmethod
    def over_range(cls, parameter: str, config: SimConfig, steps: int = 10, **kwargs):
        '''Sweep over the reference range of the parameter'''
        if parameter not in W99_RANGES:
            raise ConfigurationError(f'unknown Wiedemann99 parameter "{parameter}"')
        start, end = W99_RANGES[parameter]
        return cls(parameter, start, end, steps, config, **kwargs)

    def values(self):
        '''Grid values in sweep order'''
        return np.linspace(self.start, self.end, self.steps)

    def config_for(self, value: float) -> SimConfig:
        '''Scenario where the altered cars use `value` for the swept constant'''
        altered = AlteredSpec(fraction=self.altered_fraction,
                              w99={self.parameter: float(value)},
                              ignore_altered_leaders=self.ignore_altered_leaders)
        changes = {'altered': altered, 'record_trajectories': False}
        if self.horizon is not None:
            changes['horizon'] = self.horizon
        return self.config.replace(**changes)


@dataclass(frozen=True)
class SweepRow:
    '''Aggregates of one grid value'''
    value: float
    min_mean_ttc: Optional[float]
    min_min_ttc: Optional[float]
    n_altered: int
    failed: bool = False

    def csv_row(self):
        '''Row matching SWEEP_HEADER'''
        return [self.value, self.min_mean_ttc, self.min_min_ttc, self.n_altered, self.failed]


def _run_point(value: float, spec: SweepSpec) -> SweepRow:
    try:
        output = run(spec.config_for(value))
    except CongestionError as ex:
        logger.warning('%s = %g: %s, row marked failed', spec.parameter, value, ex)
        return SweepRow(float(value), None, None, 0, failed=True)
    altered = output.altered_stats()
    aggregate = sweep_aggregate(altered)
    logger.info('%s = %g: %d altered vehicles, min mean TTC %s, min TTC %s', spec.parameter,
                value, len(altered), aggregate.min_mean_ttc, aggregate.min_min_ttc)
    return SweepRow(float(value), aggregate.min_mean_ttc, aggregate.min_min_ttc, len(altered))


def run_sweep(spec: SweepSpec, jobs: int = 1) -> List[SweepRow]:
    '''One simulation per grid value, same seed everywhere, rows in grid order'''
    values = spec.values().tolist()
    worker = partial(_run_point, spec=spec)
    logger.info('Sweeping %s over %d values in [%g, %g]', spec.parameter, len(values),
                spec.start, spec.end)
    if jobs > 1 and len(values) > 1:
        with Pool(min(jobs, len(values))) as pool:
            return pool.map(worker, values)
    return [worker(value) for value in values]


def write_sweep(path: str, rows: List[SweepRow]):
    '''Write a sweep table CSV'''
    write_csv(path, SWEEP_HEADER, (row.csv_row() for row in rows))


def ttc_range(rows: List[SweepRow]) -> float:
    '''Spread of the minimum TTC over the successful grid values'''
    values = [row.min_min_ttc for row in rows if not row.failed and row.min_min_ttc is not None]
    if len(values) < 2:
        return 0.0
    return float(max(values) - min(values))


def rank_sensitivity(tables: dict):
    '''
    (parameter, TTC range) ordered by descending range, ties in cc0..cc9
    order. `tables` maps parameter names to sweep rows.
    '''
    unknown = set(tables) - set(PARAM_NAMES)
    if unknown:
        raise ConfigurationError(f'unknown Wiedemann99 parameter(s): {", ".join(sorted(unknown))}')
    ranking = [(name, ttc_range(tables[name])) for name in PARAM_NAMES if name in tables]
    return sorted(ranking, key=lambda item: (-item[1], PARAM_NAMES.index(item[0])))


def write_ranking(path: str, ranking):
    '''Write the sensitivity ranking CSV'''
    write_csv(path, RANKING_HEADER, ([name, spread] for name, spread in ranking))
