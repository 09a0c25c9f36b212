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
Surrogate safety measures (TTC, PET) and summary metrics over trajectories.
TTC is computed on the net gap, bumper to bumper.
'''

from dataclasses import dataclass
from typing import List, NamedTuple, Optional

import numpy as np

from w99cal.errors import ConfigurationError
from w99cal.trajdata import T, S, LANE, V, Track, TrajectoryDataset

# Samples at the same instant share the timestamp rounded to this resolution
TIME_KEY_RESOLUTION = 1e-3
METRICS_HEADER = ['id', 'min_ttc_s', 'mean_ttc_s', 'n_defined_samples']


def ttc(dx_net: float, v_follower: float, v_leader: float) -> Optional[float]:
    '''Time to collision in s, None while the gap is not closing'''
    if v_follower <= v_leader:
        return None
    return dx_net / (v_follower - v_leader)


def ttc_array(dx_net, v_follower, v_leader):
    '''Elementwise TTC, NaN where undefined (opening gap or overlap)'''
    dx_net = np.asarray(dx_net, dtype=float)
    closing = np.asarray(v_follower, dtype=float) - np.asarray(v_leader, dtype=float)
    defined = (closing > 0) & (dx_net >= 0)
    with np.errstate(divide='ignore', invalid='ignore'):
        return np.where(defined, dx_net / np.where(defined, closing, 1.0), np.nan)


@dataclass
class TtcSeries:
    '''TTC of one follower against its same-lane leader, defined samples only'''
    vehicle_id: object
    t: np.ndarray
    ttc: np.ndarray

    @property
    def samples(self):
        '''(t, ttc) pairs'''
        return list(zip(self.t.tolist(), self.ttc.tolist()))

    @property
    def min_ttc(self):
        '''Smallest TTC of the series'''
        return float(np.min(self.ttc))

    @property
    def mean_ttc(self):
        '''Mean TTC of the series'''
        return float(np.mean(self.ttc))

    def csv_row(self):
        '''Row matching METRICS_HEADER'''
        return [self.vehicle_id, self.min_ttc, self.mean_ttc, len(self.ttc)]


class PairTtc(NamedTuple):
    '''Every same-lane follower/leader sample pair (track indices)'''
    follower: np.ndarray
    leader: np.ndarray
    t: np.ndarray
    dx: np.ndarray
    ttc: np.ndarray


class SweepAggregate(NamedTuple):
    '''Aggregates over a vehicle subset, None when undefined'''
    min_mean_ttc: Optional[float]
    min_min_ttc: Optional[float]


@dataclass(frozen=True)
class ConflictZone:
    '''Stretch [s_min, s_max] of one lane'''
    s_min: float
    s_max: float
    lane: int

    def __post_init__(self):
        if not self.s_min < self.s_max:
            raise ConfigurationError(f'empty conflict zone [{self.s_min}, {self.s_max}]')


def _time_keys(t):
    return np.round(np.asarray(t) / TIME_KEY_RESOLUTION).astype(np.int64)


def pair_ttc(dataset: TrajectoryDataset) -> PairTtc:
    '''TTC of each sample against the next vehicle ahead on the same lane at the same instant'''
    tracks = dataset.tracks
    if not tracks or sum(len(track) for track in tracks) == 0:
        empty = np.zeros(0)
        return PairTtc(empty.astype(np.int64), empty.astype(np.int64), empty, empty, empty)
    counts = [len(track) for track in tracks]
    owner = np.repeat(np.arange(len(tracks)), counts)
    lengths = np.repeat([track.length for track in tracks], counts)
    samples = np.concatenate([track.samples for track in tracks])
    keys = _time_keys(samples[:, T])
    lanes = samples[:, LANE].astype(np.int64)
    order = np.lexsort((samples[:, S], lanes, keys))
    behind, ahead = order[:-1], order[1:]
    same = (keys[behind] == keys[ahead]) & (lanes[behind] == lanes[ahead])
    behind, ahead = behind[same], ahead[same]
    dx = samples[ahead, S] - lengths[ahead] - samples[behind, S]
    values = ttc_array(dx, samples[behind, V], samples[ahead, V])
    return PairTtc(owner[behind], owner[ahead], samples[behind, T], dx, values)


def ttc_series(source) -> List[TtcSeries]:
    '''Per-vehicle TTC series of a dataset or a SimOutput, in track order'''
    dataset = getattr(source, 'trajectories', source)
    pairs = pair_ttc(dataset)
    defined = np.isfinite(pairs.ttc)
    follower = pairs.follower[defined]
    times = pairs.t[defined]
    values = pairs.ttc[defined]
    order = np.lexsort((times, follower))
    follower, times, values = follower[order], times[order], values[order]
    owners, starts = np.unique(follower, return_index=True)
    return [TtcSeries(dataset.tracks[int(owner)].id, t, v) for owner, t, v in
            zip(owners, np.split(times, starts[1:]), np.split(values, starts[1:]))]


def sweep_aggregate(series) -> SweepAggregate:
    '''
    Smallest mean TTC over vehicles and smallest TTC of any sample. Accepts
    anything with `min_ttc` and `mean_ttc`; undefined entries are skipped.
    '''
    means = [item.mean_ttc for item in series if item.mean_ttc is not None]
    minima = [item.min_ttc for item in series if item.min_ttc is not None]
    return SweepAggregate(min(means) if means else None, min(minima) if minima else None)


def occupancy(track: Track, zone: ConflictZone):
    '''
    (entry, exit) time of the front bumper in the zone, None if never. Bound
    crossings between two samples on the zone's lane are interpolated linearly.
    '''
    s, t = track.s, track.t
    on_lane = track.lane == zone.lane
    inside = on_lane & (s >= zone.s_min) & (s <= zone.s_max)
    segment = on_lane[:-1] & on_lane[1:]
    s0, s1 = s[:-1][segment], s[1:][segment]
    t0, t1 = t[:-1][segment], t[1:][segment]
    moving = s1 != s0
    s0, s1, t0, t1 = s0[moving], s1[moving], t0[moving], t1[moving]
    rate = (t1 - t0) / (s1 - s0)
    cross_min = t0 + (zone.s_min - s0) * rate
    cross_max = t0 + (zone.s_max - s0) * rate
    low = np.maximum(t0, np.minimum(cross_min, cross_max))
    high = np.minimum(t1, np.maximum(cross_min, cross_max))
    crossed = low <= high
    times = np.concatenate([t[inside], low[crossed], high[crossed]])
    if len(times) == 0:
        return None
    return float(times.min()), float(times.max())


def pet(track_a: Track, track_b: Track, zone: ConflictZone) -> Optional[float]:
    '''
    Post-encroachment time: entry of the second occupant minus exit of the
    first one. Zero or negative means both occupied the zone at once.
    '''
    occupancy_a = occupancy(track_a, zone)
    occupancy_b = occupancy(track_b, zone)
    if occupancy_a is None or occupancy_b is None:
        return None
    first, second = sorted((occupancy_a, occupancy_b), key=lambda span: span[0])
    return second[0] - first[1]


def accelerations(track: Track):
    '''Finite-difference acceleration at every sample'''
    if len(track) < 2:
        return np.zeros(len(track))
    return np.gradient(track.v, track.t)


def _in_region_keys(dataset: TrajectoryDataset, network):
    start, end = network.region
    keys = []
    for track in dataset.tracks:
        inside = (track.s >= start) & (track.s < end)
        keys.append(np.unique(_time_keys(track.t[inside])))
    return np.concatenate(keys) if keys else np.zeros(0, dtype=np.int64)


def _per_km_lane(network):
    return network.mainline_length / 1000.0 * network.lane_count


def traffic_density(dataset: TrajectoryDataset, network, t: float) -> float:
    '''Vehicles per km and lane inside the measurement region at time t'''
    keys = _in_region_keys(dataset, network)
    count = np.count_nonzero(keys == _time_keys(t))
    return count / _per_km_lane(network)


def density_series(dataset: TrajectoryDataset, network, step: float = 1.0):
    '''(times, densities) at every sampled instant on a `step` grid'''
    if not step > 0:
        raise ConfigurationError(f'density step must be > 0 s, got {step}')
    keys = _in_region_keys(dataset, network)
    unique, counts = np.unique(keys, return_counts=True)
    on_grid = unique % max(int(_time_keys(step)), 1) == 0
    return (unique[on_grid] * TIME_KEY_RESOLUTION,
            counts[on_grid] / _per_km_lane(network))
