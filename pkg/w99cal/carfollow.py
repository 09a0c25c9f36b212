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
Wiedemann99 psycho-physical car-following model.

Every function works elementwise, so the same code evaluates one follower
(floats) or a whole simulation step (numpy arrays, one entry per vehicle).
'''

import dataclasses
from dataclasses import dataclass
from enum import IntEnum
from typing import NamedTuple

import numpy as np

from w99cal.errors import ConfigurationError

A_MAX_BRAKE = 8.0
# cc9 is the acceleration at 80 km/h
FREE_ACCEL_REF_SPEED = 22.2
# Free acceleration fades out over the last 5 km/h below the desired speed
FREE_ACCEL_TAPER = 5.0 / 3.6
DEFAULT_DT = 0.1
# sdv = cc6 * 1e-4 * dx^2
SDV_SCALE = 1e-4
FOLLOW_SPEED_GAIN = 0.6
FOLLOW_GAP_GAIN = 0.1
APPROACH_MIN_GAP = 1e-3

PARAM_NAMES = tuple(f'cc{i}' for i in range(10))

# Sensitivity ranges as (start, end)
W99_RANGES = {
    'cc0': (0.25, 2.5),
    'cc1': (0.1, 1.0),
    'cc2': (1.0, 5.5),
    'cc3': (-2.0, -11.0),
    'cc4': (-0.1, -0.55),
    'cc5': (0.1, 0.55),
    'cc6': (8.44, 12.94),
    'cc7': (0.1, 0.55),
    'cc8': (1.0, 5.5),
    'cc9': (0.5, 5.0),
}


@dataclass(frozen=True)
class W99Params:
    '''The ten Wiedemann99 constants, in the units of the model documentation'''
    # pylint: disable=too-many-instance-attributes
    cc0: float = 1.5
    cc1: float = 0.9
    cc2: float = 4.0
    cc3: float = -8.0
    cc4: float = -0.35
    cc5: float = 0.35
    cc6: float = 11.44
    cc7: float = 0.25
    cc8: float = 3.5
    cc9: float = 1.5

    def validate(self):
        '''Raise ConfigurationError if a sign invariant is broken'''
        checks = (
            ('cc0', np.all(np.asarray(self.cc0) > 0), '> 0'),
            ('cc1', np.all(np.asarray(self.cc1) > 0), '> 0'),
            ('cc2', np.all(np.asarray(self.cc2) >= 0), '>= 0'),
            ('cc3', np.all(np.asarray(self.cc3) < 0), '< 0'),
            ('cc4', np.all(np.asarray(self.cc4) < 0), '< 0'),
            ('cc5', np.all(np.asarray(self.cc5) > 0), '> 0'),
            ('cc6', np.all(np.asarray(self.cc6) >= 0), '>= 0'),
            ('cc7', np.all(np.asarray(self.cc7) > 0), '> 0'),
            ('cc8', np.all(np.asarray(self.cc8) > 0), '> 0'),
            ('cc9', np.all(np.asarray(self.cc9) > 0), '> 0'),
        )
        for name, valid, rule in checks:
            if not valid:
                raise ConfigurationError(
                    f'w99.{name} must be {rule}, got {getattr(self, name)}')
        return self

    def replace(self, **changes):
        '''Copy with some constants changed'''
        return dataclasses.replace(self, **changes)

    def as_array(self):
        '''Constants as a length-10 vector in cc0..cc9 order'''
        return np.array([getattr(self, name) for name in PARAM_NAMES], dtype=float)

    @classmethod
    def from_rows(cls, rows):
        '''Build params whose fields are per-vehicle arrays from an (n, 10) array'''
        rows = np.asarray(rows, dtype=float)
        return cls(*(rows[..., i] for i in range(len(PARAM_NAMES))))

    @classmethod
    def from_json(cls, data: dict, base=None):
        '''Deserialize, filling missing constants from `base` (defaults otherwise)'''
        unknown = set(data) - set(PARAM_NAMES)
        if unknown:
            raise ConfigurationError(
                f'unknown Wiedemann99 parameter(s): {", ".join(sorted(unknown))}')
        base = base or cls()
        try:
            values = {name: float(data[name]) for name in data}
        except (TypeError, ValueError) as ex:
            raise ConfigurationError(f'invalid Wiedemann99 value: {ex}') from ex
        return base.replace(**values).validate()

    def data_to_serialize(self):
        '''Return the data to be serialized'''
        return {name: float(getattr(self, name)) for name in PARAM_NAMES}


class Regime(IntEnum):
    '''Car-following regime'''
    Free = 0
    Approaching = 1
    Following = 2
    Emergency = 3


@dataclass
class FollowState:
    '''
    Follower/leader situation. `dx` is the net gap (leader rear bumper minus
    follower front bumper), `dv = v_lead - v` and `draw` is the follower's
    uniform draw fixed at spawn. No leader is encoded as dx = +inf.
    '''
    # pylint: disable=too-many-instance-attributes
    v: float
    v_lead: float
    a_lead: float
    dx: float
    dv: float
    v_desired: float
    draw: float = 0.5

    @classmethod
    def behind(cls, v, v_lead, dx, v_desired, a_lead=0.0, draw=0.5):
        '''State of a follower behind a leader'''
        return cls(v=v, v_lead=v_lead, a_lead=a_lead, dx=dx,
                   dv=np.subtract(v_lead, v), v_desired=v_desired, draw=draw)

    @classmethod
    def alone(cls, v, v_desired, draw=0.5):
        '''State of a vehicle with no leader'''
        return cls(v=v, v_lead=v, a_lead=0.0, dx=np.inf, dv=0.0,
                   v_desired=v_desired, draw=draw)


class Thresholds(NamedTuple):
    '''Perception thresholds of one state'''
    sdxc: float
    sdxo: float
    sdxv: float
    sdv: float
    sdvc: float
    sdvo: float


def thresholds(state: FollowState, params: W99Params) -> Thresholds:
    '''Spacing and speed-difference thresholds'''
    v = np.asarray(state.v, dtype=float)
    v_lead = np.asarray(state.v_lead, dtype=float)
    dv = np.asarray(state.dv, dtype=float)
    dx = np.asarray(state.dx, dtype=float)
    with np.errstate(invalid='ignore', over='ignore'):
        keep_own = (dv >= 0) | (np.asarray(state.a_lead) < -1.0)
        v_slow = np.where(keep_own, v, v_lead + dv * (np.asarray(state.draw) - 0.5))
        sdxc = np.where(v_lead > 0, params.cc0 + params.cc1 * v_slow, params.cc0)
        sdxo = sdxc + params.cc2
        sdxv = sdxo + params.cc3 * (dv - params.cc4)
        sdv = _sdv(dx, params)
        sdvc = np.where(v_lead > 0, params.cc4 - sdv, 0.0)
        sdvo = np.where(v > params.cc5, sdv + params.cc5, sdv)
    return Thresholds(sdxc, sdxo, sdxv, sdv, sdvc, sdvo)


def _sdv(dx, params: W99Params):
    # cc6 is the only constant in 1/(m s); its scaling lives here alone
    return params.cc6 * SDV_SCALE * np.square(dx)


def classify(state: FollowState, th: Thresholds):
    '''Regime codes (Regime values) for array states'''
    dx = np.asarray(state.dx, dtype=float)
    dv = np.asarray(state.dv, dtype=float)
    with np.errstate(invalid='ignore'):
        codes = np.where((dv < th.sdvo) & (dx < th.sdxo), Regime.Following, Regime.Free)
        codes = np.where((dv < th.sdvc) & (dx < th.sdxv), Regime.Approaching, codes)
        codes = np.where((dx <= th.sdxc) & (dv < th.sdvo), Regime.Emergency, codes)
    return np.where(np.isfinite(dx), codes, Regime.Free).astype(int)


def regime(state: FollowState, th: Thresholds) -> Regime:
    '''Regime of a single follower'''
    return Regime(int(classify(state, th)))


def free_acceleration(v, v_desired, params: W99Params):
    '''Free-flow acceleration ramping from cc8 at standstill to cc9 at 80 km/h'''
    v = np.asarray(v, dtype=float)
    ramp = params.cc8 + (params.cc9 - params.cc8) * \
        np.minimum(v, FREE_ACCEL_REF_SPEED) / FREE_ACCEL_REF_SPEED
    factor = np.clip((np.asarray(v_desired) - v) / FREE_ACCEL_TAPER, -1.0, 1.0)
    return np.where(factor >= 0, ramp * factor, params.cc7 * factor)


def safe_speed(dx, v_lead, dt=DEFAULT_DT):
    '''
    Highest speed for the next step that still lets the follower stop behind
    a leader braking at A_MAX_BRAKE, Gipps style, and that cannot close the
    gap within the step itself.
    '''
    brake = A_MAX_BRAKE
    dx = np.asarray(dx, dtype=float)
    v_lead = np.asarray(v_lead, dtype=float)
    with np.errstate(invalid='ignore', over='ignore'):
        inner = (brake * dt) ** 2 + 2 * brake * dx + v_lead ** 2 - 2 * brake * v_lead * dt
        gipps = -brake * dt + np.sqrt(np.maximum(inner, 0.0))
        in_step = dx / dt + np.maximum(v_lead - brake * dt, 0.0)
    return np.where(np.isfinite(dx), np.minimum(gipps, in_step), np.inf)


def acceleration(state: FollowState, params: W99Params, dt: float = DEFAULT_DT):
    '''Acceleration of the follower in m/s^2'''
    # pylint: disable=too-many-locals
    th = thresholds(state, params)
    codes = classify(state, th)
    v = np.asarray(state.v, dtype=float)
    dv = np.asarray(state.dv, dtype=float)
    dx = np.asarray(state.dx, dtype=float)
    a_lead = np.asarray(state.a_lead, dtype=float)

    a_free = free_acceleration(v, state.v_desired, params)
    with np.errstate(invalid='ignore', divide='ignore', over='ignore'):
        middle = 0.5 * (th.sdxc + th.sdxo)
        a_follow = np.clip(FOLLOW_SPEED_GAIN * dv + FOLLOW_GAP_GAIN * (dx - middle),
                           -params.cc7, params.cc7)

        room = np.maximum(dx - th.sdxc, APPROACH_MIN_GAP)
        a_approach = np.maximum(-0.5 * np.square(dv) / room, -A_MAX_BRAKE)

        closing = np.where(dx > params.cc0,
                           a_lead + np.square(dv) / (params.cc0 - dx),
                           a_lead + 0.5 * (dv - th.sdvo))
        a_emergency = np.minimum(np.where(dv < 0, closing, -params.cc7), -params.cc7)

        accel = np.select(
            [codes == Regime.Emergency, codes == Regime.Approaching, codes == Regime.Following],
            [a_emergency, a_approach, a_follow],
            default=a_free)
        accel = np.minimum(accel, a_free)
        accel = np.minimum(accel, (safe_speed(dx, state.v_lead, dt) - v) / dt)
    upper = np.maximum(params.cc8, params.cc9)
    return np.clip(np.nan_to_num(accel, nan=-A_MAX_BRAKE), -A_MAX_BRAKE, upper)
