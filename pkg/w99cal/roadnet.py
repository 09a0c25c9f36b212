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

from dataclasses import dataclass

import numpy as np

from w99cal.errors import ConfigurationError
from w99cal.world import World, NO_VEHICLE


@dataclass(frozen=True)
class RoadNetwork:
    '''
    Straight multi-lane highway along one longitudinal axis. The inflow
    segment [0, inflow_length) lets traffic settle and is left out of every
    statistic; the measurement region follows it. Lane 0 is the rightmost.
    '''
    lane_count: int
    mainline_length: float
    inflow_length: float = 0.0
    lane_width: float = 3.5

    def __post_init__(self):
        if int(self.lane_count) != self.lane_count or self.lane_count < 1:
            raise ConfigurationError(f'lane_count must be an integer >= 1, got {self.lane_count}')
        if not self.mainline_length > 0:
            raise ConfigurationError(
                f'mainline_length must be > 0 m, got {self.mainline_length}')
        if not self.inflow_length >= 0:
            raise ConfigurationError(
                f'inflow_length must be >= 0 m, got {self.inflow_length}')
        if not self.lane_width > 0:
            raise ConfigurationError(f'lane_width must be > 0 m, got {self.lane_width}')

    @property
    def total_length(self):
        '''Longitudinal extent of the whole road'''
        return self.inflow_length + self.mainline_length

    @property
    def region(self):
        '''Measurement region as a half-open (start, end) interval'''
        return (self.inflow_length, self.total_length)

    def lateral_position(self, lane):
        '''Centre line y coordinate of a lane'''
        return (np.asarray(lane) + 0.5) * self.lane_width

    @classmethod
    def from_json(cls, data: dict):
        '''Deserialize a network from its config entry'''
        try:
            return cls(lane_count=int(data.get('lane_count', 3)),
                       mainline_length=float(data.get('mainline_length_m', 4000.0)),
                       inflow_length=float(data.get('inflow_length_m', 1500.0)),
                       lane_width=float(data.get('lane_width_m', 3.5)))
        except (TypeError, ValueError) as ex:
            raise ConfigurationError(f'invalid network: {ex}') from ex

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        return {'lane_count': self.lane_count,
                'mainline_length_m': self.mainline_length,
                'inflow_length_m': self.inflow_length,
                'lane_width_m': self.lane_width}

    def __str__(self):
        return f'{self.lane_count}-lane highway, {self.mainline_length:g} m ' \
            f'+ {self.inflow_length:g} m inflow'


@dataclass(frozen=True)
class LanePosition:
    '''Map-referenced position: distance along the axis and lane index'''
    s: float
    lane: int

    def validate(self, network: RoadNetwork):
        '''Raise ConfigurationError if the position is off the network'''
        if not 0 <= self.lane < network.lane_count:
            raise ConfigurationError(f'lane {self.lane} outside 0..{network.lane_count - 1}')
        if not 0 <= self.s <= network.total_length:
            raise ConfigurationError(f's = {self.s} m outside 0..{network.total_length} m')
        return self


def build_highway(lane_count: int, mainline_length: float, inflow_length: float,
                  lane_width: float = 3.5) -> RoadNetwork:
    '''Build a straight highway network'''
    return RoadNetwork(lane_count, mainline_length, inflow_length, lane_width)


def in_measurement_region(network: RoadNetwork, s):
    '''Whether positions lie in the measurement region'''
    inside = (np.asarray(s) >= network.inflow_length) & (np.asarray(s) <= network.total_length)
    return bool(inside) if np.ndim(inside) == 0 else inside


def leader_of(world: World, vehicle: int, lane: int):
    '''Index of the nearest vehicle on `lane` strictly ahead of `vehicle`, or None'''
    if not 0 <= lane < world.lane_count:
        return None
    leader = world.neighbours([vehicle], [lane])[0][0]
    return None if leader == NO_VEHICLE else int(leader)
