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
Fixed-step, seeded highway simulation: Poisson arrivals, Wiedemann99
car-following, rule-based lane changes, trajectory recording and per-vehicle
statistics over the measurement region.
'''

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from w99cal.carfollow import DEFAULT_DT, FollowState, acceleration, safe_speed, thresholds
from w99cal.config import SimConfig
from w99cal.errors import CongestionError, ConsistencyError
from w99cal.lanechange import (LaneChangeParams, evaluate_lane_change, execute_lane_change,
                               lane_change_decisions)
from w99cal.metrics import ttc_array
from w99cal.roadnet import in_measurement_region
from w99cal.trajdata import DatasetMeta, Track, TrajectoryDataset
from w99cal.utils import kmh, mps, seed_streams, write_csv
from w99cal.vehicle_class import VehicleClass, Provenance, SIMULATED_CLASSES
from w99cal.world import World, NO_VEHICLE

logger = logging.getLogger(__name__)

CONGESTION_WAIT_S = 120.0
# New vehicles prefer the lane with the fewest vehicles over its first metres
ENTRY_ZONE_M = 250.0
OVERLAP_TOLERANCE = 1e-6
TIME_EPS = 1e-9
SECONDS_PER_HOUR = 3600.0

STATS_HEADER = ['id', 'class', 'mean_speed_kmh', 'min_ttc_s', 'mean_ttc_s', 'completed']


@dataclass(frozen=True)
class Arrival:
    '''A vehicle waiting to enter the network'''
    t: float
    vehicle_class: VehicleClass
    v_desired: float
    draw: float
    altered: bool


class _ClassArrivals:
    '''Poisson arrival process of one class with its own random streams'''
    # pylint: disable=too-few-public-methods

    def __init__(self, vehicle_class, volume, speeds, altered_fraction, streams):
        self.vehicle_class = vehicle_class
        self.rate = volume / SECONDS_PER_HOUR
        self.speeds = speeds
        self.altered_fraction = altered_fraction
        self.gaps, self.uniforms, self.draws, self.picks = streams
        self.next_t = self._gap()

    def _gap(self):
        return self.gaps.exponential(1.0 / self.rate) if self.rate > 0 else np.inf

    def until(self, t):
        '''Arrivals up to time t'''
        arrivals = []
        while self.next_t <= t + TIME_EPS:
            v_desired = float(mps(self.speeds.sample(self.uniforms.random())))
            draw = float(self.draws.random())
            altered = False
            if self.vehicle_class == VehicleClass.Car:
                altered = bool(self.picks.random() < self.altered_fraction)
            arrivals.append(Arrival(float(self.next_t), self.vehicle_class, v_desired, draw,
                                    altered))
            self.next_t += self._gap()
        return arrivals


class Spawner:
    '''
    Arrivals of every simulated class. Arrival times, desired-speed uniforms,
    follower draws and altered picks come from separate streams, so changing
    the desired-speed distribution leaves everything else untouched.
    '''
    # pylint: disable=too-few-public-methods
    STREAMS_PER_CLASS = 4

    def __init__(self, config: SimConfig):
        streams = seed_streams(config.seed, self.STREAMS_PER_CLASS * len(SIMULATED_CLASSES))
        self.classes = []
        for i, cls in enumerate(SIMULATED_CLASSES):
            own = streams[i * self.STREAMS_PER_CLASS:(i + 1) * self.STREAMS_PER_CLASS]
            self.classes.append(_ClassArrivals(cls, config.flow[cls].volume,
                                               config.desired_speed[cls],
                                               config.altered.fraction, own))

    def spawn(self, t: float) -> List[Arrival]:
        '''New arrivals up to time t, ordered by time then class'''
        arrivals = []
        for stream in self.classes:
            arrivals.extend(stream.until(t))
        order = {cls: i for i, cls in enumerate(SIMULATED_CLASSES)}
        return sorted(arrivals, key=lambda arrival: (arrival.t, order[arrival.vehicle_class]))


@dataclass(frozen=True)
class VehicleStats:
    '''Summary of one vehicle over the analysis window and measurement region'''
    id: int
    vehicle_class: VehicleClass
    mean_speed_kmh: float
    min_ttc: Optional[float]
    mean_ttc: Optional[float]
    completed: bool
    altered: bool = False

    def csv_row(self):
        '''Row matching STATS_HEADER'''
        return [self.id, self.vehicle_class.value, self.mean_speed_kmh, self.min_ttc,
                self.mean_ttc, self.completed]


@dataclass
class SimOutput:
    '''Trajectories (provenance simulated) and per-vehicle statistics'''
    trajectories: TrajectoryDataset
    stats: List[VehicleStats] = field(default_factory=list)

    def mean_speeds(self, vehicle_class: VehicleClass, completed_only: bool = False):
        '''Per-vehicle mean speeds in km/h of one class'''
        return np.array([stat.mean_speed_kmh for stat in self.stats
                         if stat.vehicle_class == vehicle_class
                         and (stat.completed or not completed_only)], dtype=float)

    def altered_stats(self):
        '''Statistics of the altered vehicles only'''
        return [stat for stat in self.stats if stat.altered]

    def recorded_subset(self, wanted: dict, seed: int) -> TrajectoryDataset:
        '''
        Random subset of the completed tracks, `wanted` per class, in id order.
        Mimics a recording that only captured part of the traffic.
        '''
        complete = {stat.id for stat in self.stats if stat.completed}
        rng = np.random.default_rng(seed)
        kept = []
        for cls, count in wanted.items():
            tracks = [track for track in self.trajectories.tracks
                      if track.vehicle_class == cls and track.id in complete]
            if len(tracks) < count:
                logger.warning('Only %d complete %s tracks, wanted %d', len(tracks), cls.value,
                               count)
            picks = rng.choice(len(tracks), size=min(count, len(tracks)), replace=False)
            kept.extend(tracks[i] for i in sorted(picks))
        kept.sort(key=lambda track: track.id)
        return TrajectoryDataset(self.trajectories.meta, kept, [])

    def write_stats(self, path: str):
        '''Write the per-vehicle statistics CSV'''
        write_csv(path, STATS_HEADER, (stat.csv_row() for stat in self.stats))


def check_consistency(world: World):
    '''Raise ConsistencyError if two same-lane vehicles overlap'''
    if len(world) < 2:
        return
    gaps = world.net_gaps(np.arange(len(world)), world.leaders())
    if np.any(gaps < -OVERLAP_TOLERANCE):
        worst = int(np.argmin(gaps))
        raise ConsistencyError(f'vehicle {world.ids[worst]} overlaps its leader by '
                               f'{-gaps[worst]:.3f} m on lane {world.lane[worst]}')


def change_lanes(world: World, params: LaneChangeParams, dt: float = DEFAULT_DT):
    '''
    Apply lane changes one vehicle at a time in ascending id order, each
    re-checked against the lanes left by the previous ones. Returns the
    number of executed changes.
    '''
    candidates = np.flatnonzero(world.cooldown <= 0)
    offsets, _ = lane_change_decisions(world, candidates, params, dt)
    changes = 0
    for index in candidates[offsets != 0]:
        index = int(index)
        lane = int(world.lane[index])
        decision = evaluate_lane_change(index, world, params, dt)
        if execute_lane_change(world, index, decision, params) != lane:
            changes += 1
    return changes


def step(world: World, dt: float = DEFAULT_DT, lane_change: LaneChangeParams = None):
    '''
    Advance every vehicle by one step: accelerations from the pre-step
    snapshot, then Euler update with a speed floor at 0, then lane changes
    '''
    if len(world) == 0:
        return world
    leaders = world.leaders()
    state = world.follow_states(np.arange(len(world)), leaders)
    accel = acceleration(state, world.params(), dt)
    v_new = np.maximum(world.v + accel * dt, 0.0)
    world.a = (v_new - world.v) / dt
    world.v = v_new
    world.s = world.s + v_new * dt
    world.cooldown = np.maximum(world.cooldown - dt, 0.0)
    if lane_change is not None and lane_change.overtaking:
        world.lane_changes += change_lanes(world, lane_change, dt)
    check_consistency(world)
    return world


class Simulation:
    '''One seeded simulation run'''
    # pylint: disable=too-many-instance-attributes

    def __init__(self, config: SimConfig):
        self.config = config
        self.network = config.network
        self.world = World(self.network.lane_count)
        self.spawner = Spawner(config)
        self.queue = deque()
        self.step_count = 0
        self.next_id = 0
        self.spawned = {cls: 0 for cls in SIMULATED_CLASSES}
        self.exited = 0
        self.delayed = 0
        self.in_network = 0
        self.stats = []
        self._chunks = []
        self._vehicles = {}
        self._class_index = {cls: i for i, cls in enumerate(SIMULATED_CLASSES)}

    @property
    def t(self):
        '''Current simulated time'''
        return self.step_count * self.config.dt

    @property
    def in_window(self):
        '''Whether statistics are being collected'''
        return self.t >= self.config.warmup - TIME_EPS

    def step(self):
        '''Advance the whole simulation by one step'''
        step(self.world, self.config.dt, self.config.lane_change)
        self._remove_exited()
        self.step_count += 1
        self._admit(self.spawner.spawn(self.t))
        check_consistency(self.world)
        if sum(self.spawned.values()) != len(self.world) + self.exited:
            raise ConsistencyError(f'vehicle count mismatch at t = {self.t:.1f} s')
        self._mark_region_entry()
        if self.in_window:
            self._observe()
        return self.world

    def run(self) -> SimOutput:
        '''Simulate up to the horizon'''
        if self.config.horizon <= self.config.warmup:
            logger.warning('Horizon %g s does not exceed warm-up %g s, nothing to measure',
                           self.config.horizon, self.config.warmup)
            return self._output()
        logger.debug('Simulating %d steps of %g s (seed %d)', self.config.steps,
                     self.config.dt, self.config.seed)
        for _ in range(self.config.steps):
            self.step()
        self.in_network = len(self.world)
        remaining = self.world.take(np.ones(len(self.world), dtype=bool))
        self._finalize(remaining, exited=False)
        return self._output()

    def _params_for(self, arrival: Arrival):
        if arrival.altered:
            return self.config.altered_params()
        return self.config.w99[arrival.vehicle_class]

    def _entry(self, arrival: Arrival):
        '''Lane and entry speed for an arrival, or (None, None) if no lane is safe'''
        world = self.world
        params = self._params_for(arrival)
        lanes = range(self.network.lane_count)
        counts = [np.count_nonzero((world.lane == lane) & (world.s < ENTRY_ZONE_M))
                  for lane in lanes]
        for lane in sorted(lanes, key=lambda lane: (counts[lane], lane)):
            on_lane = np.flatnonzero(world.lane == lane)
            if len(on_lane) == 0:
                return lane, arrival.v_desired
            lead = on_lane[np.argmin(world.s[on_lane])]
            gap = world.s[lead] - world.length[lead]
            if gap < 0:
                continue
            v_lead = world.v[lead]
            v_entry = min(arrival.v_desired, v_lead, float(safe_speed(gap, v_lead, self.config.dt)))
            state = FollowState.behind(v_entry, v_lead, gap, arrival.v_desired,
                                       world.a[lead], arrival.draw)
            if gap >= float(thresholds(state, params).sdxc):
                return lane, v_entry
        return None, None

    def _admit(self, arrivals):
        self.queue.extend(arrivals)
        while self.queue:
            arrival = self.queue[0]
            lane, v_entry = self._entry(arrival)
            if lane is None:
                break
            self.queue.popleft()
            self._add(arrival, lane, v_entry)
        if self.queue and self.t - self.queue[0].t > CONGESTION_WAIT_S:
            raise CongestionError(self.t)

    def _add(self, arrival: Arrival, lane: int, v_entry: float):
        flow = self.config.flow[arrival.vehicle_class]
        vehicle_id = self.next_id
        self.next_id += 1
        self.world.add(self._params_for(arrival), ids=vehicle_id,
                       cls=self._class_index[arrival.vehicle_class], lane=lane,
                       s=0.0, v=v_entry, length=flow.length, width=flow.width,
                       v_desired=arrival.v_desired, draw=arrival.draw,
                       altered=arrival.altered)
        self._vehicles[vehicle_id] = arrival.vehicle_class
        self.spawned[arrival.vehicle_class] += 1
        if self.t - arrival.t > self.config.dt + TIME_EPS:
            self.delayed += 1
            logger.debug('Vehicle %d entered %.1f s late', vehicle_id, self.t - arrival.t)

    def _remove_exited(self):
        beyond = self.world.s >= self.network.total_length
        if np.any(beyond):
            removed = self.world.take(beyond)
            self.exited += len(removed)
            self._finalize(removed, exited=True)

    def _mark_region_entry(self):
        world = self.world
        entered = in_measurement_region(self.network, world.s) & np.isnan(world.region_t)
        world.region_t[entered] = self.t

    def _observe(self):
        world = self.world
        inside = np.flatnonzero(in_measurement_region(self.network, world.s))
        if len(inside) == 0:
            return
        world.sum_v[inside] += world.v[inside]
        world.n_v[inside] += 1

        leaders = world.leaders()[inside]
        has = leaders != NO_VEHICLE
        lead = np.where(has, leaders, 0)
        ttc = ttc_array(world.net_gaps(inside, leaders), world.v[inside], world.v[lead])
        ttc = np.where(has, ttc, np.nan)
        if self.config.altered.ignore_altered_leaders:
            ttc = np.where(world.altered[inside] & world.altered[lead] & has, np.nan, ttc)
        defined = np.isfinite(ttc)
        hit = inside[defined]
        world.min_ttc[hit] = np.minimum(world.min_ttc[hit], ttc[defined])
        world.sum_ttc[hit] += ttc[defined]
        world.n_ttc[hit] += 1

        if self.config.record_trajectories:
            y = self.network.lateral_position(world.lane[inside])
            rows = np.column_stack([np.full(len(inside), self.t), world.s[inside], y,
                                    world.s[inside], world.lane[inside], world.v[inside]])
            self._chunks.append((world.ids[inside], rows))

    def _finalize(self, removed: World, exited: bool):
        for i in range(len(removed)):
            if removed.n_v[i] < 2:
                continue
            n_ttc = int(removed.n_ttc[i])
            completed = exited and removed.region_t[i] >= self.config.warmup - TIME_EPS
            self.stats.append(VehicleStats(
                id=int(removed.ids[i]),
                vehicle_class=SIMULATED_CLASSES[int(removed.cls[i])],
                mean_speed_kmh=float(kmh(removed.sum_v[i] / removed.n_v[i])),
                min_ttc=float(removed.min_ttc[i]) if n_ttc else None,
                mean_ttc=float(removed.sum_ttc[i] / n_ttc) if n_ttc else None,
                completed=bool(completed),
                altered=bool(removed.altered[i])))

    def _tracks(self):
        if not self._chunks:
            return []
        ids = np.concatenate([ids for ids, _ in self._chunks])
        rows = np.concatenate([rows for _, rows in self._chunks])
        order = np.argsort(ids, kind='stable')
        ids = ids[order]
        rows = rows[order]
        unique, starts = np.unique(ids, return_index=True)
        tracks = []
        for vehicle_id, samples in zip(unique, np.split(rows, starts[1:])):
            cls = self._vehicles[int(vehicle_id)]
            flow = self.config.flow[cls]
            tracks.append(Track(id=int(vehicle_id), vehicle_class=cls, length=flow.length,
                                width=flow.width, samples=samples))
        return tracks

    def _output(self):
        horizon_h = self.config.horizon / SECONDS_PER_HOUR
        extra = {
            'seed': self.config.seed,
            'spawned': {cls.value: self.spawned[cls] for cls in SIMULATED_CLASSES},
            'exited': self.exited,
            'in_network': self.in_network,
            'queued': len(self.queue),
            'delayed_entries': self.delayed,
            'lane_changes': self.world.lane_changes,
            'realized_volume_veh_h': {cls.value: self.spawned[cls] / horizon_h
                                      for cls in SIMULATED_CLASSES},
        }
        meta = DatasetMeta(timestamp=self.config.timestamp,
                           location=f'synthetic {self.network}',
                           provenance=Provenance.Simulated,
                           source_method='w99cal Wiedemann99 microsimulation',
                           extra=extra)
        logger.info('Simulation done: %d spawned, %d exited, %d delayed entries, %d stats',
                    sum(self.spawned.values()), self.exited, self.delayed, len(self.stats))
        return SimOutput(TrajectoryDataset(meta, self._tracks(), []),
                         sorted(self.stats, key=lambda stat: stat.id))


def run(config: SimConfig) -> SimOutput:
    '''Run one simulation; a pure function of the config and its seed'''
    return Simulation(config).run()
