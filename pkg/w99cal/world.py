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

import numpy as np

from w99cal.carfollow import W99Params, FollowState

NO_VEHICLE = -1


class World:
    '''
    Vehicles currently on the road, one numpy array per attribute and one
    entry per vehicle. `s` is the front bumper position along the axis.
    '''
    # pylint: disable=too-many-instance-attributes

    FLOAT_FIELDS = ('s', 'v', 'a', 'length', 'width', 'v_desired', 'draw', 'cooldown',
                    'region_t', 'sum_v', 'min_ttc', 'sum_ttc')
    INT_FIELDS = ('ids', 'cls', 'lane', 'n_v', 'n_ttc')
    BOOL_FIELDS = ('altered',)

    def __init__(self, lane_count: int):
        self.lane_count = lane_count
        self.lane_changes = 0
        for name in self.FLOAT_FIELDS:
            setattr(self, name, np.zeros(0, dtype=float))
        for name in self.INT_FIELDS:
            setattr(self, name, np.zeros(0, dtype=np.int64))
        for name in self.BOOL_FIELDS:
            setattr(self, name, np.zeros(0, dtype=bool))
        self.cc = np.zeros((0, 10), dtype=float)

    def __len__(self):
        return len(self.ids)

    def _fields(self):
        return self.FLOAT_FIELDS + self.INT_FIELDS + self.BOOL_FIELDS + ('cc',)

    def add(self, params: W99Params, **values):
        '''Append one vehicle; accumulators start empty'''
        defaults = {'a': 0.0, 'cooldown': 0.0, 'sum_v': 0.0, 'min_ttc': np.inf,
                    'sum_ttc': 0.0, 'n_v': 0, 'n_ttc': 0, 'altered': False,
                    'draw': 0.5, 'region_t': np.nan, 'cls': 0}
        defaults.update(values)
        for name in self.FLOAT_FIELDS + self.INT_FIELDS + self.BOOL_FIELDS:
            current = getattr(self, name)
            setattr(self, name, np.append(current, np.array(
                [defaults[name]], dtype=current.dtype)))
        self.cc = np.vstack([self.cc, params.as_array()])
        return len(self) - 1

    def take(self, mask):
        '''Remove the vehicles selected by `mask` and return them as a new World'''
        removed = World(self.lane_count)
        for name in self._fields():
            values = getattr(self, name)
            setattr(removed, name, values[mask])
            setattr(self, name, values[~mask])
        return removed

    def params(self, index=None) -> W99Params:
        '''Per-vehicle W99 params (array fields)'''
        rows = self.cc if index is None else self.cc[index]
        return W99Params.from_rows(rows)

    def neighbours(self, indices, lanes):
        '''
        For each vehicle in `indices`, the nearest vehicle strictly ahead and
        the nearest vehicle at or behind its position on the matching entry
        of `lanes` (NO_VEHICLE when absent). The vehicle itself is never
        returned.
        '''
        indices = np.asarray(indices, dtype=np.int64)
        lanes = np.asarray(lanes, dtype=np.int64)
        leaders = np.full(len(indices), NO_VEHICLE, dtype=np.int64)
        followers = np.full(len(indices), NO_VEHICLE, dtype=np.int64)
        for lane in np.unique(lanes):
            on_lane = np.flatnonzero(self.lane == lane)
            if len(on_lane) == 0:
                continue
            order = on_lane[np.argsort(self.s[on_lane], kind='stable')]
            lane_s = self.s[order]
            query = np.flatnonzero(lanes == lane)
            pos = np.searchsorted(lane_s, self.s[indices[query]], side='right')
            ahead = pos < len(order)
            leaders[query[ahead]] = order[pos[ahead]]
            behind = pos - 1
            # skip the vehicle itself when it sits on the queried lane
            own = (behind >= 0) & (order[np.maximum(behind, 0)] == indices[query])
            behind = np.where(own, behind - 1, behind)
            valid = behind >= 0
            followers[query[valid]] = order[behind[valid]]
        return leaders, followers

    def leaders(self):
        '''Same-lane leader index of every vehicle'''
        everyone = np.arange(len(self))
        return self.neighbours(everyone, self.lane)[0]

    def net_gaps(self, followers, leaders):
        '''Bumper-to-bumper gaps, +inf where there is no leader'''
        followers = np.asarray(followers, dtype=np.int64)
        leaders = np.asarray(leaders, dtype=np.int64)
        has = leaders != NO_VEHICLE
        safe = np.where(has, leaders, 0)
        gaps = self.s[safe] - self.length[safe] - self.s[followers]
        return np.where(has, gaps, np.inf)

    def follow_states(self, followers, leaders) -> FollowState:
        '''Car-following states of `followers` behind `leaders`'''
        followers = np.asarray(followers, dtype=np.int64)
        leaders = np.asarray(leaders, dtype=np.int64)
        has = leaders != NO_VEHICLE
        safe = np.where(has, leaders, 0)
        v = self.v[followers]
        v_lead = np.where(has, self.v[safe], v)
        return FollowState(v=v, v_lead=v_lead,
                           a_lead=np.where(has, self.a[safe], 0.0),
                           dx=self.net_gaps(followers, leaders),
                           dv=v_lead - v,
                           v_desired=self.v_desired[followers],
                           draw=self.draw[followers])
