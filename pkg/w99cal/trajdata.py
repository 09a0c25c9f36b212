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
Unified map-referenced trajectory format: every participant carries its
class, size and timestamped samples in both geographic (x, y) and road map
(s, lane) coordinates.
'''

import json
import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from w99cal.errors import DatasetParseError, DatasetValidationError, ConfigurationError
from w99cal.utils import atomic_write, kmh, read_text
from w99cal.vehicle_class import VehicleClass, Provenance

logger = logging.getLogger(__name__)

# Sample row columns
T, X, Y, S, LANE, V = range(6)
SAMPLE_FIELDS = ('t', 'x', 'y', 's', 'lane', 'v')

PMF_TOLERANCE = 1e-9
MAX_MEDIAN_DT = 0.5
PREFERRED_MEDIAN_DT = 0.1
SIMULATED_XS_TOLERANCE = 1e-6
DEFAULT_NEAR_MISS_TTC = 2.0


@dataclass
class DatasetMeta:
    '''Where, when and how a dataset was recorded'''
    timestamp: str
    location: str
    provenance: Provenance
    source_method: str
    lat: Optional[float] = None
    lon: Optional[float] = None
    extra: dict = field(default_factory=dict)

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        data = {'timestamp': self.timestamp, 'location': self.location,
                'provenance': self.provenance.value, 'source_method': self.source_method}
        if self.lat is not None:
            data['lat'] = self.lat
        if self.lon is not None:
            data['lon'] = self.lon
        if self.extra:
            data['extra'] = self.extra
        return data


@dataclass(eq=False)
class Track:
    '''One traffic participant. `samples` is an (n, 6) array of t, x, y, s, lane, v'''
    id: object
    vehicle_class: VehicleClass
    length: float
    width: float
    samples: np.ndarray
    class_pmf: Optional[dict] = None
    sigma: Optional[dict] = None

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=float).reshape(-1, len(SAMPLE_FIELDS))

    def __eq__(self, other):
        if not isinstance(other, Track):
            return NotImplemented
        return (self.id == other.id and self.vehicle_class == other.vehicle_class
                and self.length == other.length and self.width == other.width
                and self.class_pmf == other.class_pmf and self.sigma == other.sigma
                and np.array_equal(self.samples, other.samples))

    def __len__(self):
        return len(self.samples)

    @property
    def t(self):
        '''Sample timestamps'''
        return self.samples[:, T]

    @property
    def s(self):
        '''Sample positions along the road axis'''
        return self.samples[:, S]

    @property
    def lane(self):
        '''Sample lane indices'''
        return self.samples[:, LANE].astype(np.int64)

    @property
    def v(self):
        '''Sample speeds'''
        return self.samples[:, V]

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        data = {'id': self.id, 'class': self.vehicle_class.value}
        if self.class_pmf is not None:
            data['class_pmf'] = dict(self.class_pmf)
        data['length_m'] = self.length
        data['width_m'] = self.width
        data['samples'] = [[float(row[T]), float(row[X]), float(row[Y]), float(row[S]),
                            int(row[LANE]), float(row[V])] for row in self.samples]
        if self.sigma is not None:
            data['sigma'] = dict(self.sigma)
        return data


@dataclass(frozen=True)
class OcclusionInterval:
    '''Road stretch hidden from the sensors during a time span'''
    s_min: float
    s_max: float
    t_min: float
    t_max: float

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        return {'s_min': self.s_min, 's_max': self.s_max,
                't_min': self.t_min, 't_max': self.t_max}


@dataclass
class TrajectoryDataset:
    '''A recorded (or simulated) scenario'''
    meta: DatasetMeta
    tracks: List[Track] = field(default_factory=list)
    occlusions: List[OcclusionInterval] = field(default_factory=list)

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        return {'meta': self.meta.data_to_serialize(),
                'tracks': [track.data_to_serialize() for track in self.tracks],
                'occlusions': [occ.data_to_serialize() for occ in self.occlusions]}

    def class_counts(self):
        '''Number of tracks per class, in VehicleClass order'''
        return {cls: sum(1 for track in self.tracks if track.vehicle_class == cls)
                for cls in VehicleClass}

    @classmethod
    def from_json_file(cls, path: str):
        '''Read and validate a dataset file'''
        try:
            text = read_text(path)
        except UnicodeDecodeError as ex:
            raise DatasetParseError(path, f'not valid UTF-8: {ex.reason} at byte {ex.start}') from ex
        return parse_dataset(text, source=path)

    def to_json_file(self, path: str):
        '''Serialize the dataset to a file'''
        atomic_write(path, serialize_dataset(self))


@dataclass
class ObservedSpeeds:
    '''Per-track mean speeds in km/h, one entry per car and per truck'''
    car_speeds: np.ndarray
    truck_speeds: np.ndarray

    @property
    def n_car(self):
        '''Number of car observations'''
        return len(self.car_speeds)

    @property
    def n_truck(self):
        '''Number of truck observations'''
        return len(self.truck_speeds)

    def by_class(self, vehicle_class: VehicleClass):
        '''Speeds of one class'''
        return self.car_speeds if vehicle_class == VehicleClass.Car else self.truck_speeds


@dataclass(frozen=True)
class NearMiss:
    '''Same-lane encounter whose minimum TTC fell below the threshold'''
    follower_id: object
    leader_id: object
    min_ttc: float


class _Reader:
    '''Type-checked access to a JSON document that reports the failing path'''

    def __init__(self, source):
        self.source = source

    def fail(self, path, message):
        '''Raise a parse error for path'''
        raise DatasetParseError(self._where(path), message)

    def invalid(self, path, message):
        '''Raise a validation error for path'''
        raise DatasetValidationError(self._where(path), message)

    def _where(self, path):
        return f'{self.source}:{path}' if self.source else path

    def get(self, data, key, path, types, optional=False):
        '''Fetch data[key] checking its type'''
        if not isinstance(data, dict):
            self.fail(path, 'expected an object')
        if key not in data:
            if optional:
                return None
            self.fail(f'{path}.{key}' if path else key, 'missing field')
        value = data[key]
        where = f'{path}.{key}' if path else key
        if isinstance(value, bool) and bool not in types:
            self.fail(where, f'expected {self._names(types)}, got a boolean')
        if not isinstance(value, types):
            self.fail(where, f'expected {self._names(types)}, got {type(value).__name__}')
        return value

    @staticmethod
    def _names(types):
        names = {str: 'a string', int: 'a number', float: 'a number', list: 'an array',
                 dict: 'an object', bool: 'a boolean'}
        return ' or '.join(sorted({names[t] for t in types}))


NUMBER = (int, float)


def _parse_meta(reader: _Reader, data):
    timestamp = reader.get(data, 'timestamp', 'meta', (str,))
    location = reader.get(data, 'location', 'meta', (str,))
    provenance = reader.get(data, 'provenance', 'meta', (str,))
    source_method = reader.get(data, 'source_method', 'meta', (str,))
    lat = reader.get(data, 'lat', 'meta', NUMBER, optional=True)
    lon = reader.get(data, 'lon', 'meta', NUMBER, optional=True)
    extra = reader.get(data, 'extra', 'meta', (dict,), optional=True)
    try:
        provenance = Provenance(provenance)
    except ValueError:
        reader.invalid('meta.provenance', f'"{provenance}" is not one of '
                       f'{", ".join(p.value for p in Provenance)}')
    return DatasetMeta(timestamp, location, provenance, source_method, lat, lon, extra or {})


def _parse_class(reader: _Reader, value, path):
    try:
        return VehicleClass(value)
    except ValueError:
        return reader.invalid(path, f'unknown class "{value}"')


def _parse_track(reader: _Reader, data, path):
    track_id = reader.get(data, 'id', path, (int, str))
    vehicle_class = _parse_class(reader, reader.get(data, 'class', path, (str,)), f'{path}.class')
    pmf = reader.get(data, 'class_pmf', path, (dict,), optional=True)
    if pmf is not None:
        for key, prob in pmf.items():
            _parse_class(reader, key, f'{path}.class_pmf.{key}')
            if isinstance(prob, bool) or not isinstance(prob, NUMBER):
                reader.fail(f'{path}.class_pmf.{key}', 'expected a number')
    length = reader.get(data, 'length_m', path, NUMBER)
    width = reader.get(data, 'width_m', path, NUMBER)
    rows = reader.get(data, 'samples', path, (list,))
    for i, row in enumerate(rows):
        where = f'{path}.samples[{i}]'
        if not isinstance(row, list) or len(row) != len(SAMPLE_FIELDS):
            reader.fail(where, f'expected an array of {len(SAMPLE_FIELDS)} numbers '
                        f'({", ".join(SAMPLE_FIELDS)})')
        for name, value in zip(SAMPLE_FIELDS, row):
            if isinstance(value, bool) or not isinstance(value, NUMBER):
                reader.fail(where, f'{name} is not a number')
        if row[LANE] != int(row[LANE]):
            reader.fail(where, f'lane {row[LANE]} is not an integer')
    sigma = reader.get(data, 'sigma', path, (dict,), optional=True)
    if sigma is not None:
        for key, value in sigma.items():
            if key not in SAMPLE_FIELDS + ('length', 'width'):
                reader.fail(f'{path}.sigma.{key}', 'unknown field')
            if isinstance(value, bool) or not isinstance(value, NUMBER):
                reader.fail(f'{path}.sigma.{key}', 'expected a number')
    return Track(id=track_id, vehicle_class=vehicle_class, length=length, width=width,
                 samples=np.array(rows, dtype=float).reshape(-1, len(SAMPLE_FIELDS)),
                 class_pmf=pmf, sigma=sigma)


def _parse_occlusion(reader: _Reader, data, path):
    values = [reader.get(data, key, path, NUMBER) for key in ('s_min', 's_max', 't_min', 't_max')]
    return OcclusionInterval(*values)


def parse_dataset(text: str, source: str = None) -> TrajectoryDataset:
    '''Parse and validate a dataset JSON document'''
    reader = _Reader(source)
    try:
        data = json.loads(text)
    except json.JSONDecodeError as ex:
        reader.fail(f'line {ex.lineno} column {ex.colno}', f'invalid JSON: {ex.msg}')
    if not isinstance(data, dict):
        reader.fail('$', 'expected an object')
    meta = _parse_meta(reader, reader.get(data, 'meta', '', (dict,)))
    tracks = [_parse_track(reader, track, f'tracks[{i}]')
              for i, track in enumerate(reader.get(data, 'tracks', '', (list,)))]
    occlusions = [_parse_occlusion(reader, occ, f'occlusions[{i}]')
                  for i, occ in enumerate(reader.get(data, 'occlusions', '', (list,)))]
    dataset = TrajectoryDataset(meta, tracks, occlusions)
    validate_dataset(dataset, source)
    return dataset


def validate_dataset(dataset: TrajectoryDataset, source: str = None):
    '''Raise DatasetValidationError on the first broken invariant'''
    reader = _Reader(source)
    seen = set()
    for i, track in enumerate(dataset.tracks):
        path = f'tracks[{i}]'
        if track.id in seen:
            reader.invalid(f'{path}.id', f'duplicate track id {track.id}')
        seen.add(track.id)
        _validate_track(reader, track, path, dataset.meta.provenance)
    for i, occ in enumerate(dataset.occlusions):
        if occ.s_min > occ.s_max or occ.t_min > occ.t_max:
            reader.invalid(f'occlusions[{i}]', 'empty interval')
    return dataset


def _validate_track(reader: _Reader, track: Track, path, provenance: Provenance):
    if not track.length > 0:
        reader.invalid(f'{path}.length_m', f'must be > 0, got {track.length}')
    if not track.width > 0:
        reader.invalid(f'{path}.width_m', f'must be > 0, got {track.width}')
    if track.class_pmf is not None:
        total = sum(track.class_pmf.values())
        if abs(total - 1.0) > PMF_TOLERANCE:
            reader.invalid(f'{path}.class_pmf', f'sums to {total!r}, not 1')
        if any(prob < 0 for prob in track.class_pmf.values()):
            reader.invalid(f'{path}.class_pmf', 'negative probability')
        top = max(track.class_pmf.values())
        if track.class_pmf.get(track.vehicle_class.value, 0.0) < top:
            mode = max(track.class_pmf, key=track.class_pmf.get)
            reader.invalid(f'{path}.class_pmf',
                           f'mode "{mode}" differs from class "{track.vehicle_class.value}"')
    samples = track.samples
    if not np.all(np.isfinite(samples)):
        row = int(np.flatnonzero(~np.all(np.isfinite(samples), axis=1))[0])
        reader.invalid(f'{path}.samples[{row}]', 'non-finite value')
    if len(samples) >= 2:
        steps = np.diff(samples[:, T])
        if np.any(steps <= 0):
            row = int(np.flatnonzero(steps <= 0)[0]) + 1
            reader.invalid(f'{path}.samples[{row}]', 'timestamps not strictly increasing')
        median = float(np.median(steps))
        if median > MAX_MEDIAN_DT:
            reader.invalid(f'{path}.samples', f'median sample interval {median:g} s '
                           f'exceeds {MAX_MEDIAN_DT:g} s')
        if median > PREFERRED_MEDIAN_DT:
            logger.warning('%s: median sample interval %g s is above %g s',
                           path, median, PREFERRED_MEDIAN_DT)
    if provenance == Provenance.Simulated:
        off = np.abs(samples[:, X] - samples[:, S]) > SIMULATED_XS_TOLERANCE
        if np.any(off):
            reader.invalid(f'{path}.samples[{int(np.flatnonzero(off)[0])}]',
                           'simulated sample with x != s')


def serialize_dataset(dataset: TrajectoryDataset) -> str:
    '''Dataset as JSON text; floats keep their shortest round-trip form'''
    return json.dumps(dataset.data_to_serialize(), separators=(',', ':'), allow_nan=False) + '\n'


def _region_bounds(region):
    if hasattr(region, 'region'):
        return region.region
    return float(region[0]), float(region[1])


def mean_speed(track: Track, region) -> Optional[float]:
    '''
    Mean sample speed in km/h over the samples inside `region` (a RoadNetwork
    or a (start, end) interval); None with fewer than two such samples
    '''
    start, end = _region_bounds(region)
    inside = (track.s >= start) & (track.s < end)
    if np.count_nonzero(inside) < 2:
        return None
    return float(kmh(np.mean(track.v[inside])))


def observed_speeds(dataset: TrajectoryDataset, region) -> ObservedSpeeds:
    '''Per-class lists of per-track mean speeds; other classes are ignored'''
    speeds = {VehicleClass.Car: [], VehicleClass.Truck: []}
    for track in dataset.tracks:
        if track.vehicle_class not in speeds:
            continue
        speed = mean_speed(track, region)
        if speed is None or not np.isfinite(speed) or speed <= 0:
            logger.debug('Track %s has no usable mean speed', track.id)
            continue
        speeds[track.vehicle_class].append(speed)
    return ObservedSpeeds(np.array(speeds[VehicleClass.Car], dtype=float),
                          np.array(speeds[VehicleClass.Truck], dtype=float))


def tag_near_miss(dataset: TrajectoryDataset,
                  ttc_threshold: float = DEFAULT_NEAR_MISS_TTC) -> List[NearMiss]:
    '''Same-lane follower/leader encounters whose minimum TTC is below the threshold'''
    # metrics imports this module
    from w99cal.metrics import pair_ttc  # pylint: disable=import-outside-toplevel
    if not ttc_threshold > 0:
        raise ConfigurationError(f'TTC threshold must be > 0 s, got {ttc_threshold}')
    pairs = pair_ttc(dataset)
    defined = np.isfinite(pairs.ttc)
    follower = pairs.follower[defined]
    leader = pairs.leader[defined]
    ttc = pairs.ttc[defined]
    if len(ttc) == 0:
        return []
    keys = np.stack([follower, leader], axis=1)
    unique, inverse = np.unique(keys, axis=0, return_inverse=True)
    minima = np.full(len(unique), np.inf)
    np.minimum.at(minima, inverse.reshape(-1), ttc)
    return [NearMiss(dataset.tracks[f].id, dataset.tracks[l].id, float(m))
            for (f, l), m in zip(unique, minima) if m < ttc_threshold]
