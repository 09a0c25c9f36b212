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

import dataclasses
import json
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import truncnorm

from w99cal.carfollow import W99Params, PARAM_NAMES, DEFAULT_DT
from w99cal.errors import ConfigurationError
from w99cal.lanechange import LaneChangeParams
from w99cal.roadnet import RoadNetwork
from w99cal.utils import read_text, write_json
from w99cal.vehicle_class import VehicleClass, SIMULATED_CLASSES

logger = logging.getLogger(__name__)

# Desired speeds are truncated to [mu * (1 - x), mu * (1 + x)]
TRUNCATION = 0.5
MAX_SEED = 2 ** 64 - 1
DEFAULT_TIMESTAMP = '1970-01-01T00:00:00+00:00'


@dataclass(frozen=True)
class DesiredSpeedDistribution:
    '''Truncated Gaussian desired speed of one vehicle class, in km/h'''
    mu: float
    sigma: float

    def __post_init__(self):
        if not self.mu > 0:
            raise ConfigurationError(f'desired speed mu must be > 0 km/h, got {self.mu}')
        if not self.sigma > 0:
            raise ConfigurationError(f'desired speed sigma must be > 0 km/h, got {self.sigma}')

    @property
    def bounds(self):
        '''Truncation interval in km/h'''
        return self.mu * (1 - TRUNCATION), self.mu * (1 + TRUNCATION)

    def sample(self, uniform):
        '''
        Inverse-CDF draw: maps uniforms in (0, 1) to desired speeds, so a
        fixed uniform stream moves smoothly with mu and sigma
        '''
        low, high = self.bounds
        a = (low - self.mu) / self.sigma
        b = (high - self.mu) / self.sigma
        speeds = truncnorm.ppf(uniform, a, b, loc=self.mu, scale=self.sigma)
        return np.clip(speeds, low, high)

    @classmethod
    def from_json(cls, data: dict):
        '''Deserialize from a `desired_speed` class entry'''
        try:
            return cls(mu=float(data['mu_kmh']), sigma=float(data['sigma_kmh']))
        except KeyError as ex:
            raise ConfigurationError(f'desired_speed entry misses {ex}') from ex
        except (TypeError, ValueError) as ex:
            raise ConfigurationError(f'invalid desired_speed: {ex}') from ex

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        return {'mu_kmh': self.mu, 'sigma_kmh': self.sigma}


@dataclass(frozen=True)
class ClassFlow:
    '''Hourly volume and vehicle size of one class'''
    volume: float
    length: float
    width: float

    def __post_init__(self):
        if not self.volume >= 0:
            raise ConfigurationError(f'volume must be >= 0 veh/h, got {self.volume}')
        if not self.length > 0 or not self.width > 0:
            raise ConfigurationError('vehicle length and width must be > 0 m')

    @classmethod
    def from_json(cls, data: dict, default):
        '''Deserialize from a `flow` class entry'''
        try:
            return cls(volume=float(data.get('volume_veh_h', default.volume)),
                       length=float(data.get('length_m', default.length)),
                       width=float(data.get('width_m', default.width)))
        except (TypeError, ValueError) as ex:
            raise ConfigurationError(f'invalid flow: {ex}') from ex

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        return {'volume_veh_h': self.volume, 'length_m': self.length, 'width_m': self.width}


DEFAULT_FLOW = {
    VehicleClass.Car: ClassFlow(1680.0, 4.5, 1.8),
    VehicleClass.Truck: ClassFlow(320.0, 12.0, 2.5),
}
DEFAULT_DESIRED_SPEED = {
    VehicleClass.Car: DesiredSpeedDistribution(131.05, 17.48),
    VehicleClass.Truck: DesiredSpeedDistribution(89.22, 6.20),
}


@dataclass(frozen=True)
class AlteredSpec:
    '''A random share of cars driving with modified W99 constants'''
    fraction: float = 0.0
    w99: dict = field(default_factory=dict)
    ignore_altered_leaders: bool = False

    def __post_init__(self):
        if not 0 <= self.fraction <= 1:
            raise ConfigurationError(f'altered.fraction must be in [0, 1], got {self.fraction}')
        unknown = set(self.w99) - set(PARAM_NAMES)
        if unknown:
            raise ConfigurationError(
                f'unknown Wiedemann99 parameter(s): {", ".join(sorted(unknown))}')

    @classmethod
    def from_json(cls, data: dict):
        '''Deserialize from the `altered` config entry'''
        try:
            return cls(fraction=float(data.get('fraction', 0.0)),
                       w99={key: float(value) for key, value in data.get('w99', {}).items()},
                       ignore_altered_leaders=bool(data.get('ignore_altered_leaders', False)))
        except (TypeError, ValueError, AttributeError) as ex:
            raise ConfigurationError(f'invalid altered: {ex}') from ex

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        return {'fraction': self.fraction, 'w99': dict(self.w99),
                'ignore_altered_leaders': self.ignore_altered_leaders}


@dataclass(frozen=True)
class SimConfig:
    '''Everything a simulation run depends on, seed included'''
    # pylint: disable=too-many-instance-attributes
    network: RoadNetwork = RoadNetwork(3, 4000.0, 1500.0)
    flow: dict = field(default_factory=lambda: dict(DEFAULT_FLOW))
    desired_speed: dict = field(default_factory=lambda: dict(DEFAULT_DESIRED_SPEED))
    w99: dict = field(default_factory=lambda: {cls: W99Params() for cls in SIMULATED_CLASSES})
    lane_change: LaneChangeParams = LaneChangeParams()
    altered: AlteredSpec = AlteredSpec()
    dt: float = DEFAULT_DT
    warmup: float = 600.0
    horizon: float = 2400.0
    seed: int = 1
    record_trajectories: bool = True
    timestamp: str = DEFAULT_TIMESTAMP
    kde_bandwidth: float = None

    def __post_init__(self):
        self.validate()

    def validate(self):
        '''Raise ConfigurationError on an invalid setting'''
        if not self.dt > 0:
            raise ConfigurationError(f'dt_s must be > 0, got {self.dt}')
        if not self.warmup >= 0:
            raise ConfigurationError(f'warmup_s must be >= 0, got {self.warmup}')
        if not self.horizon > 0:
            raise ConfigurationError(f'horizon_s must be > 0, got {self.horizon}')
        if not 0 <= self.seed <= MAX_SEED:
            raise ConfigurationError(f'seed must be a 64-bit unsigned integer, got {self.seed}')
        if self.kde_bandwidth is not None and not self.kde_bandwidth > 0:
            raise ConfigurationError(f'kde.bandwidth must be > 0, got {self.kde_bandwidth}')
        for cls in SIMULATED_CLASSES:
            for name, table in (('flow', self.flow), ('desired_speed', self.desired_speed),
                                ('w99', self.w99)):
                if cls not in table:
                    raise ConfigurationError(f'{name} has no entry for {cls.value}')
            self.w99[cls].validate()
        self.altered_params().validate()
        return self

    @property
    def analysis_window(self):
        '''Simulated seconds after warm-up'''
        return max(self.horizon - self.warmup, 0.0)

    @property
    def steps(self):
        '''Number of integration steps'''
        return int(round(self.horizon / self.dt))

    def altered_params(self) -> W99Params:
        '''W99 constants of altered cars'''
        return self.w99[VehicleClass.Car].replace(**self.altered.w99)

    def replace(self, **changes):
        '''Copy with some settings changed'''
        return dataclasses.replace(self, **changes)

    def with_desired_speeds(self, theta):
        '''Copy with (mu_car, sigma_car, mu_truck, sigma_truck) in km/h substituted'''
        mu_car, sigma_car, mu_truck, sigma_truck = (float(x) for x in theta)
        speeds = dict(self.desired_speed)
        speeds[VehicleClass.Car] = DesiredSpeedDistribution(mu_car, sigma_car)
        speeds[VehicleClass.Truck] = DesiredSpeedDistribution(mu_truck, sigma_truck)
        return self.replace(desired_speed=speeds)

    @classmethod
    def from_json(cls, data: dict):
        '''Deserialize a simulation config'''
        if not isinstance(data, dict):
            raise ConfigurationError('simulation config must be a JSON object')
        known = {'network', 'flow', 'desired_speed', 'w99', 'lane_change', 'altered', 'dt_s',
                 'warmup_s', 'horizon_s', 'seed', 'record_trajectories', 'timestamp', 'kde'}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(f'unknown config key(s): {", ".join(sorted(unknown))}')
        try:
            return cls(network=RoadNetwork.from_json(data.get('network', {})),
                       flow=_per_class(data.get('flow', {}), 'flow',
                                       lambda value, cls: ClassFlow.from_json(value, DEFAULT_FLOW[cls]),
                                       DEFAULT_FLOW),
                       desired_speed=_per_class(data.get('desired_speed', {}), 'desired_speed',
                                                lambda value, cls: DesiredSpeedDistribution.from_json(
                                                    value),
                                                DEFAULT_DESIRED_SPEED),
                       w99=_w99_from_json(data.get('w99', {})),
                       lane_change=LaneChangeParams.from_json(data.get('lane_change', {})),
                       altered=AlteredSpec.from_json(data.get('altered', {})),
                       dt=float(data.get('dt_s', DEFAULT_DT)),
                       warmup=float(data.get('warmup_s', 600.0)),
                       horizon=float(data.get('horizon_s', 2400.0)),
                       seed=_seed(data.get('seed', 1)),
                       record_trajectories=bool(data.get('record_trajectories', True)),
                       timestamp=str(data.get('timestamp', DEFAULT_TIMESTAMP)),
                       kde_bandwidth=_bandwidth(data.get('kde', {})))
        except (TypeError, ValueError, AttributeError) as ex:
            raise ConfigurationError(f'invalid simulation config: {ex}') from ex

    @classmethod
    def from_json_file(cls, path: str):
        '''Read a simulation config file'''
        try:
            data = json.loads(read_text(path))
        except UnicodeDecodeError as ex:
            raise ConfigurationError(f'{path}: not valid UTF-8: {ex.reason} at byte {ex.start}') from ex
        except json.JSONDecodeError as ex:
            raise ConfigurationError(f'{path}: invalid JSON: {ex}') from ex
        return cls.from_json(data)

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        data = {
            'network': self.network.data_to_serialize(),
            'flow': {cls.value: self.flow[cls].data_to_serialize() for cls in SIMULATED_CLASSES},
            'desired_speed': {cls.value: self.desired_speed[cls].data_to_serialize()
                              for cls in SIMULATED_CLASSES},
            'w99': {cls.value: self.w99[cls].data_to_serialize() for cls in SIMULATED_CLASSES},
            'lane_change': self.lane_change.data_to_serialize(),
            'altered': self.altered.data_to_serialize(),
            'dt_s': self.dt,
            'warmup_s': self.warmup,
            'horizon_s': self.horizon,
            'seed': self.seed,
            'record_trajectories': self.record_trajectories,
            'timestamp': self.timestamp,
        }
        if self.kde_bandwidth is not None:
            data['kde'] = {'bandwidth': self.kde_bandwidth}
        return data

    def to_json_file(self, path: str):
        '''Serialize the config to a file'''
        write_json(path, self.data_to_serialize())


def _per_class(data, name, parse, defaults):
    if not isinstance(data, dict):
        raise ConfigurationError(f'{name} must be an object keyed by vehicle class')
    table = dict(defaults)
    for key, value in data.items():
        try:
            cls = VehicleClass(key)
        except ValueError as ex:
            raise ConfigurationError(f'{name}: unknown vehicle class "{key}"') from ex
        if cls not in SIMULATED_CLASSES:
            raise ConfigurationError(f'{name}: class "{key}" is not simulated')
        table[cls] = parse(value, cls)
    return table


def _w99_from_json(data):
    if not isinstance(data, dict):
        raise ConfigurationError('w99 must be an object')
    if set(data) & set(PARAM_NAMES) or not data:
        # One flat set of constants for every class
        params = W99Params.from_json(data)
        return {cls: params for cls in SIMULATED_CLASSES}
    return _per_class(data, 'w99', lambda value, cls: W99Params.from_json(value),
                      {cls: W99Params() for cls in SIMULATED_CLASSES})


def _seed(value):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigurationError(f'seed must be an integer, got {value!r}')
    return value


def _bandwidth(data):
    if not isinstance(data, dict):
        raise ConfigurationError('kde must be an object')
    value = data.get('bandwidth')
    return None if value is None else float(value)
