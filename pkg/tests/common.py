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

import os

import numpy as np

from w99cal.carfollow import W99Params
from w99cal.config import ClassFlow, SimConfig
from w99cal.roadnet import RoadNetwork
from w99cal.trajdata import DatasetMeta, Track, TrajectoryDataset
from w99cal.vehicle_class import VehicleClass, Provenance
from w99cal.world import World

SLOW_TESTS = bool(os.environ.get('W99_SLOW_TESTS'))
SLOW_REASON = 'set W99_SLOW_TESTS=1 to run acceptance scenarios'
CONFIGS_DIR = os.path.join(os.path.dirname(__file__), '..', 'configs')


def make_world(vehicles, lane_count=1, params=None):
    '''World from dicts with s, v and optionally lane, v_desired, length, a'''
    world = World(lane_count)
    for i, vehicle in enumerate(vehicles):
        values = {'ids': i, 'lane': 0, 'length': 4.5, 'width': 1.8}
        values.update(vehicle)
        values.setdefault('v_desired', values['v'])
        world.add(params or W99Params(), **values)
    return world


def small_config(**changes):
    '''Short two-lane scenario that runs in a few seconds'''
    config = SimConfig(network=RoadNetwork(2, 500.0, 100.0),
                       flow=flows(1800.0, 300.0),
                       warmup=30.0, horizon=150.0, seed=11)
    return config.replace(**changes)


def make_track(track_id, t, s, v, lane=0, vehicle_class=VehicleClass.Car, length=4.5):
    '''Track whose x equals s and y the lane centre'''
    t = np.asarray(t, dtype=float)
    s = np.broadcast_to(np.asarray(s, dtype=float), t.shape)
    v = np.broadcast_to(np.asarray(v, dtype=float), t.shape)
    lane = np.broadcast_to(np.asarray(lane, dtype=float), t.shape)
    samples = np.column_stack([t, s, (lane + 0.5) * 3.5, s, lane, v])
    return Track(track_id, vehicle_class, length, 1.8, samples)


def make_dataset(tracks, provenance=Provenance.Natural):
    '''Dataset around the given tracks'''
    meta = DatasetMeta('2021-06-01T12:00:00+00:00', 'A9 test field', provenance, 'unit test')
    return TrajectoryDataset(meta, list(tracks), [])


def flows(cars, trucks):
    '''Flow table with default vehicle sizes'''
    return {VehicleClass.Car: ClassFlow(cars, 4.5, 1.8),
            VehicleClass.Truck: ClassFlow(trucks, 12.0, 2.5)}
