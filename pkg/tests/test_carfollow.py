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

import unittest

import numpy as np

from w99cal.carfollow import (A_MAX_BRAKE, W99_RANGES, FollowState, Regime, W99Params,
                              acceleration, classify, free_acceleration, regime, safe_speed,
                              thresholds)
from w99cal.errors import ConfigurationError
from tests.common import SLOW_REASON, SLOW_TESTS

DT = 0.1
LENGTH = 4.5


def follow_leader(params, v, gap, v_desired, seconds, leader_speed=None):
    '''Follower behind a leader driving `leader_speed(t)`; returns the gap history'''
    s_lead, v_lead, a_lead = gap + LENGTH, v, 0.0
    s, speed = 0.0, v
    gaps = []
    for k in range(int(round(seconds / DT))):
        dx = s_lead - LENGTH - s
        state = FollowState.behind(speed, v_lead, dx, v_desired, a_lead)
        accel = acceleration(state, params, DT)
        speed = max(speed + accel * DT, 0.0)
        s += speed * DT
        new_lead = v_lead if leader_speed is None else leader_speed((k + 1) * DT, v_lead)
        a_lead = (new_lead - v_lead) / DT
        v_lead = new_lead
        s_lead += v_lead * DT
        gaps.append(s_lead - LENGTH - s)
    return np.array(gaps)


class ParamsTest(unittest.TestCase):
    '''W99 constants'''

    def test_defaults(self):
        params = W99Params()
        np.testing.assert_array_equal(params.as_array(),
                                      [1.5, 0.9, 4.0, -8.0, -0.35, 0.35, 11.44, 0.25, 3.5, 1.5])

    def test_sign_invariants(self):
        for name, value in (('cc0', 0.0), ('cc3', 1.0), ('cc4', 0.1), ('cc7', -0.1)):
            with self.assertRaises(ConfigurationError):
                W99Params().replace(**{name: value}).validate()

    def test_json(self):
        params = W99Params.from_json({'cc1': 1.2})
        self.assertEqual(params.cc1, 1.2)
        self.assertEqual(params.cc0, 1.5)
        with self.assertRaises(ConfigurationError):
            W99Params.from_json({'cc10': 1.0})

    def test_ranges_within_invariants(self):
        for name, (start, end) in W99_RANGES.items():
            W99Params().replace(**{name: start}).validate()
            W99Params().replace(**{name: end}).validate()


class ThresholdsTest(unittest.TestCase):
    '''Perception thresholds'''

    def test_standstill_leader(self):
        state = FollowState.behind(5.0, 0.0, 20.0, 30.0)
        self.assertEqual(float(thresholds(state, W99Params()).sdxc), 1.5)

    def test_equal_speeds(self):
        th = thresholds(FollowState.behind(30.0, 30.0, 40.0, 35.0), W99Params())
        self.assertAlmostEqual(float(th.sdxc), 28.5)
        self.assertAlmostEqual(float(th.sdxo), 32.5)

    def test_zero_following_band(self):
        rng = np.random.default_rng(1)
        v = rng.uniform(0, 40, 200)
        state = FollowState.behind(v, rng.uniform(0, 40, 200), rng.uniform(0, 100, 200), 40.0,
                                   draw=rng.uniform(0, 1, 200))
        th = thresholds(state, W99Params(cc2=0.0))
        np.testing.assert_array_equal(th.sdxo, th.sdxc)

    def test_monotone_bands_when_closing(self):
        rng = np.random.default_rng(2)
        v = rng.uniform(1, 40, 500)
        dv = rng.uniform(-10, -0.35, 500)
        state = FollowState.behind(v, np.maximum(v + dv, 0.0), rng.uniform(0, 150, 500), 40.0,
                                   a_lead=rng.uniform(-3, 2, 500), draw=rng.uniform(0, 1, 500))
        th = thresholds(state, W99Params())
        self.assertTrue(np.all(th.sdxc <= th.sdxo))
        self.assertTrue(np.all(th.sdxo <= th.sdxv + 1e-12))
        for value in th:
            self.assertTrue(np.all(np.isfinite(value)))


class RegimeTest(unittest.TestCase):
    '''Regime classification'''

    def test_no_leader_is_free(self):
        state = FollowState.alone(30.0, 35.0)
        self.assertEqual(regime(state, thresholds(state, W99Params())), Regime.Free)

    def test_emergency(self):
        state = FollowState.behind(30.0, 20.0, 10.0, 35.0)
        self.assertEqual(regime(state, thresholds(state, W99Params())), Regime.Emergency)

    def test_following(self):
        params = W99Params()
        sdxc = params.cc0 + params.cc1 * 25.0
        state = FollowState.behind(25.0, 25.0, sdxc + params.cc2 / 2, 30.0)
        self.assertEqual(regime(state, thresholds(state, params)), Regime.Following)

    def test_approaching(self):
        state = FollowState.behind(35.0, 20.0, 80.0, 36.0)
        self.assertEqual(regime(state, thresholds(state, W99Params())), Regime.Approaching)

    def test_vectorized_matches_scalar(self):
        rng = np.random.default_rng(4)
        v = rng.uniform(0, 40, 50)
        v_lead = rng.uniform(0, 40, 50)
        dx = rng.uniform(0, 120, 50)
        params = W99Params()
        codes = classify(FollowState.behind(v, v_lead, dx, 40.0), thresholds(
            FollowState.behind(v, v_lead, dx, 40.0), params))
        for i in range(50):
            state = FollowState.behind(v[i], v_lead[i], dx[i], 40.0)
            self.assertEqual(regime(state, thresholds(state, params)), Regime(codes[i]))


class AccelerationTest(unittest.TestCase):
    '''Acceleration output'''

    def test_standstill_free(self):
        self.assertAlmostEqual(float(acceleration(FollowState.alone(0.0, 30.0), W99Params())), 3.5)

    def test_cc9_at_80_kmh(self):
        self.assertAlmostEqual(float(free_acceleration(22.2, 40.0, W99Params())), 1.5)

    def test_free_at_desired_speed(self):
        self.assertEqual(float(acceleration(FollowState.alone(30.0, 30.0), W99Params())), 0.0)

    def test_never_exceeds_desired_speed(self):
        accel = float(acceleration(FollowState.alone(31.0, 30.0), W99Params()))
        self.assertLess(accel, 0.0)

    def test_equilibrium_following(self):
        params = W99Params()
        sdxc = params.cc0 + params.cc1 * 25.0
        s_lead, s = sdxc + params.cc2 / 2 + LENGTH, 0.0
        v_lead, v = 25.0, 25.0
        for _ in range(100):
            accel = float(acceleration(FollowState.behind(v, v_lead, s_lead - LENGTH - s, 30.0),
                                       params))
            self.assertLessEqual(abs(accel), params.cc7 + 1e-12)
            v += accel * DT
            s += v * DT
            s_lead += v_lead * DT

    def test_bounds(self):
        rng = np.random.default_rng(5)
        n = 2000
        state = FollowState.behind(rng.uniform(0, 45, n), rng.uniform(0, 45, n),
                                   rng.uniform(-1, 200, n), rng.uniform(10, 45, n),
                                   a_lead=rng.uniform(-8, 3, n), draw=rng.uniform(0, 1, n))
        params = W99Params()
        accel = acceleration(state, params)
        self.assertTrue(np.all(accel >= -A_MAX_BRAKE))
        self.assertTrue(np.all(accel <= max(params.cc8, params.cc9)))
        np.testing.assert_array_equal(accel, acceleration(state, params))

    def test_safe_speed(self):
        self.assertEqual(float(safe_speed(np.inf, 30.0)), np.inf)
        self.assertGreater(float(safe_speed(100.0, 30.0)), 30.0)
        self.assertLess(float(safe_speed(1.0, 0.0)), 5.0)


class PlatoonTest(unittest.TestCase):
    '''Closed-loop properties of the model'''

    def test_equilibrium_gap(self):
        params = W99Params()
        for v in (15.0, 25.0, 35.0):
            start = 2.0 * (params.cc0 + params.cc1 * v)
            gaps = follow_leader(params, v, start, v + 3.0, 120.0)
            last = gaps[-100:]
            self.assertTrue(np.all(last >= params.cc0 + params.cc1 * v - 0.5), (v, last.min()))
            self.assertTrue(np.all(last <= params.cc0 + params.cc1 * v + params.cc2 + 0.5),
                            (v, last.max()))

    def test_gap_grows_with_cc1(self):
        final = []
        for cc1 in np.linspace(0.1, 1.0, 4):
            params = W99Params(cc1=cc1)
            start = 2.0 * (params.cc0 + params.cc1 * 25.0)
            final.append(follow_leader(params, 25.0, start, 28.0, 120.0)[-1])
        self.assertTrue(np.all(np.diff(final) >= 0), final)

    def _braking_scenarios(self, count, seed):
        rng = np.random.default_rng(seed)
        params = W99Params()
        for _ in range(count):
            v = rng.uniform(5, 40)
            gap = params.cc0 + params.cc1 * v + rng.uniform(0, 20)
            decel = rng.uniform(0.5, 5.0)
            t_brake = rng.uniform(0, 5)
            duration = rng.uniform(1, 8)

            def leader_speed(t, v_lead, decel=decel, t_brake=t_brake, duration=duration):
                if t_brake <= t < t_brake + duration:
                    return max(v_lead - decel * DT, 0.0)
                return v_lead
            gaps = follow_leader(params, v, gap, v + rng.uniform(0, 5), 20.0, leader_speed)
            self.assertTrue(np.all(gaps >= 0), (v, gap, decel, gaps.min()))

    def test_no_collision_when_leader_brakes(self):
        self._braking_scenarios(100, 6)

    @unittest.skipUnless(SLOW_TESTS, SLOW_REASON)
    def test_no_collision_randomized_suite(self):
        self._braking_scenarios(1000, 7)


if __name__ == '__main__':
    unittest.main()
