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
Rule-based lane selection: overtaking desire, keep-right compliance and gap
acceptance. An approximation of the Sparmann lane-change model family.
'''

from dataclasses import dataclass
from enum import Enum

import numpy as np

from w99cal.carfollow import (DEFAULT_DT, Regime, acceleration, classify, safe_speed,
                              thresholds)
from w99cal.errors import ConfigurationError
from w99cal.utils import mps
from w99cal.world import World, NO_VEHICLE

# Keep-right needs the right lane to allow this share of the desired speed...
KEEP_RIGHT_SPEED_SHARE = 0.9
# ...over this much travel time
KEEP_RIGHT_HORIZON_S = 10.0
SAFE_SPEED_SLACK = 1e-9


class LaneChange(Enum):
    '''Lane change direction'''
    Keep = 'keep'
    Left = 'left'
    Right = 'right'

    @property
    def offset(self):
        '''Lane index delta'''
        return {LaneChange.Keep: 0, LaneChange.Left: 1, LaneChange.Right: -1}[self]


class Reason(Enum):
    '''Why a lane change was (not) proposed'''
    Overtake = 'overtake'
    KeepRight = 'keep_right'
    Blocked = 'blocked'
    NoReason = 'none'


@dataclass(frozen=True)
class LaneChangeDecision:
    '''Proposed lane change and its reason'''
    change: LaneChange
    reason: Reason

    def __post_init__(self):
        keeping = self.change == LaneChange.Keep
        passive = self.reason in (Reason.Blocked, Reason.NoReason)
        if keeping != passive:
            raise ValueError(f'inconsistent lane change decision {self.change.value}/'
                             f'{self.reason.value}')

    def __str__(self):
        return f'{self.change.value}/{self.reason.value}'


KEEP = LaneChangeDecision(LaneChange.Keep, Reason.NoReason)
BLOCKED = LaneChangeDecision(LaneChange.Keep, Reason.Blocked)

# Reason codes of the vectorized evaluation, indexable by the offsets below
_CODES = {
    (0, Reason.NoReason): KEEP,
    (0, Reason.Blocked): BLOCKED,
    (1, Reason.Overtake): LaneChangeDecision(LaneChange.Left, Reason.Overtake),
    (-1, Reason.KeepRight): LaneChangeDecision(LaneChange.Right, Reason.KeepRight),
}
_REASONS = list(Reason)


@dataclass(frozen=True)
class LaneChangeParams:
    '''Lane-change rule set settings'''
    enabled: bool = True
    keep_right: bool = True
    desire_threshold_kmh: float = 10.0
    cooldown_s: float = 3.0
    lookahead_m: float = 200.0

    def __post_init__(self):
        if not self.desire_threshold_kmh >= 0:
            raise ConfigurationError('lane_change.desire_threshold_kmh must be >= 0')
        if not self.cooldown_s >= 0:
            raise ConfigurationError('lane_change.cooldown_s must be >= 0')
        if not self.lookahead_m > 0:
            raise ConfigurationError('lane_change.lookahead_m must be > 0')

    @property
    def overtaking(self):
        '''Whether any lane change can happen at all'''
        return self.enabled and np.isfinite(self.desire_threshold_kmh)

    @classmethod
    def from_json(cls, data: dict):
        '''Deserialize from the `lane_change` config entry'''
        unknown = set(data) - {'enabled', 'keep_right', 'desire_threshold_kmh',
                               'cooldown_s', 'lookahead_m'}
        if unknown:
            raise ConfigurationError(f'unknown lane_change key(s): {", ".join(sorted(unknown))}')
        threshold = data.get('desire_threshold_kmh', 10.0)
        try:
            return cls(enabled=bool(data.get('enabled', True)),
                       keep_right=bool(data.get('keep_right', True)),
                       desire_threshold_kmh=np.inf if threshold is None else float(threshold),
                       cooldown_s=float(data.get('cooldown_s', 3.0)),
                       lookahead_m=float(data.get('lookahead_m', 200.0)))
        except (TypeError, ValueError) as ex:
            raise ConfigurationError(f'invalid lane_change: {ex}') from ex

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        threshold = self.desire_threshold_kmh
        return {'enabled': self.enabled, 'keep_right': self.keep_right,
                'desire_threshold_kmh': threshold if np.isfinite(threshold) else None,
                'cooldown_s': self.cooldown_s, 'lookahead_m': self.lookahead_m}


def gap_acceptable(world: World, indices, target_lanes, dt: float = DEFAULT_DT):
    '''
    Whether each vehicle can move onto its target lane: both new gaps are
    non-negative and Gipps-safe, the new follower is not thrown into the
    emergency regime, and neither side must brake harder than its cc8.
    '''
    indices = np.asarray(indices, dtype=np.int64)
    target_lanes = np.asarray(target_lanes, dtype=np.int64)
    if len(indices) == 0:
        return np.zeros(0, dtype=bool)
    leaders, followers = world.neighbours(indices, target_lanes)

    own = world.follow_states(indices, leaders)
    own_params = world.params(indices)
    with np.errstate(invalid='ignore'):
        ok = own.dx >= 0
        ok &= own.v <= safe_speed(own.dx, own.v_lead, dt) + SAFE_SPEED_SLACK
        ok &= acceleration(own, own_params, dt) >= -own_params.cc8

        has_follower = followers != NO_VEHICLE
        behind = np.where(has_follower, followers, indices)
        back = world.follow_states(behind, indices)
        back_params = world.params(behind)
        back_ok = back.dx >= 0
        back_ok &= back.v <= safe_speed(back.dx, back.v_lead, dt) + SAFE_SPEED_SLACK
        back_ok &= classify(back, thresholds(back, back_params)) != Regime.Emergency
        back_ok &= acceleration(back, back_params, dt) >= -back_params.cc8
    return ok & (~has_follower | back_ok)


def lane_change_decisions(world: World, indices, params: LaneChangeParams,
                          dt: float = DEFAULT_DT):
    '''
    Vectorized rule evaluation. Returns (offsets, reasons): lane index deltas
    (+1 left, -1 right, 0 keep) and the matching Reason per vehicle.
    '''
    # pylint: disable=too-many-locals
    indices = np.asarray(indices, dtype=np.int64)
    offsets = np.zeros(len(indices), dtype=np.int64)
    reasons = np.full(len(indices), _REASONS.index(Reason.NoReason), dtype=np.int64)
    if len(indices) == 0 or not params.overtaking or world.lane_count < 2:
        return offsets, reasons

    lane = world.lane[indices]
    v = world.v[indices]
    v_desired = world.v_desired[indices]
    lead = world.neighbours(indices, lane)[0]
    current = world.net_gaps(indices, lead)
    v_lead = np.where(lead != NO_VEHICLE, world.v[np.maximum(lead, 0)], np.inf)
    threshold = mps(params.desire_threshold_kmh)
    desire = (current <= params.lookahead_m) & (v_lead < v_desired - threshold)

    # Left: the left lane must promise more than the current leader
    has_left = lane + 1 < world.lane_count
    left_lead = world.neighbours(indices, lane + 1)[0]
    left_gap = world.net_gaps(indices, left_lead)
    v_left = np.where(left_lead != NO_VEHICLE, world.v[np.maximum(left_lead, 0)], np.inf)
    promising = (left_gap > params.lookahead_m) | (v_left > v_lead)
    wants_left = desire & has_left & promising
    left_ok = np.zeros(len(indices), dtype=bool)
    if np.any(wants_left):
        left_ok[wants_left] = gap_acceptable(world, indices[wants_left],
                                             lane[wants_left] + 1, dt)
    offsets[wants_left & left_ok] = 1
    reasons[wants_left & left_ok] = _REASONS.index(Reason.Overtake)
    reasons[wants_left & ~left_ok] = _REASONS.index(Reason.Blocked)

    # Right: return when the right lane stays fast for the next seconds of travel
    if params.keep_right:
        has_right = lane > 0
        right_lead = world.neighbours(indices, lane - 1)[0]
        right_gap = world.net_gaps(indices, right_lead)
        v_right = np.where(right_lead != NO_VEHICLE, world.v[np.maximum(right_lead, 0)], np.inf)
        free_ahead = right_gap > KEEP_RIGHT_HORIZON_S * v_desired
        fast = v_right >= KEEP_RIGHT_SPEED_SHARE * v_desired
        wants_right = has_right & ~desire & (free_ahead | fast)
        right_ok = np.zeros(len(indices), dtype=bool)
        if np.any(wants_right):
            right_ok[wants_right] = gap_acceptable(world, indices[wants_right],
                                                   lane[wants_right] - 1, dt)
        offsets[wants_right & right_ok] = -1
        reasons[wants_right & right_ok] = _REASONS.index(Reason.KeepRight)
    return offsets, reasons


def evaluate_lane_change(vehicle: int, world: World, params: LaneChangeParams,
                         dt: float = DEFAULT_DT) -> LaneChangeDecision:
    '''Lane change proposal for one vehicle'''
    offsets, reasons = lane_change_decisions(world, [vehicle], params, dt)
    return _CODES[(int(offsets[0]), _REASONS[int(reasons[0])])]


def execute_lane_change(world: World, vehicle: int, decision: LaneChangeDecision,
                        params: LaneChangeParams) -> int:
    '''Apply a decision unless the vehicle is cooling down; returns its lane'''
    lane = int(world.lane[vehicle])
    target = lane + decision.change.offset
    if decision.change == LaneChange.Keep or world.cooldown[vehicle] > 0:
        return lane
    if not 0 <= target < world.lane_count:
        return lane
    world.lane[vehicle] = target
    world.cooldown[vehicle] = params.cooldown_s
    return target
