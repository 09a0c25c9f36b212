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
from collections import defaultdict
from types import SimpleNamespace

import numpy as np

from w99cal import sim
from w99cal.errors import ConfigurationError
from w99cal.metrics import (ConflictZone, TtcSeries, accelerations, density_series, occupancy, pet,
                            sweep_aggregate, traffic_density, ttc, ttc_array, ttc_series)
from w99cal.roadnet import RoadNetwork
from tests.common import make_dataset, make_track, small_config


class TtcTest(unittest.TestCase):
    '''Time to collision'''

    def test_scalar(self):
        self.assertEqual(ttc(20.0, 30.0, 20.0), 2.0)
        self.assertIsNone(ttc(20.0, 20.0, 30.0))
        self.assertIsNone(ttc(20.0, 25.0, 25.0))

    def test_scale_consistent(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            dx, v_follower, v_leader = rng.uniform(0.0, 100.0), *rng.uniform(0.0, 45.0, 2)
            base = ttc(dx, v_follower, v_leader)
            for k in (1e-3, 0.5, 3.0, 1e4):
                scaled = ttc(k * dx, k * v_follower, k * v_leader)
                if base is None:
                    self.assertIsNone(scaled)
                else:
                    self.assertAlmostEqual(scaled / base, 1.0, places=9)

    def test_array(self):
        values = ttc_array([20.0, 20.0, -1.0, 0.0], [30.0, 20.0, 30.0, 30.0],
                           [20.0, 30.0, 20.0, 20.0])
        np.testing.assert_array_equal(values, [2.0, np.nan, np.nan, 0.0])

    def test_closing_platoon(self):
        t = np.arange(6.0)
        leader = make_track('lead', t, 104.5 + 20.0 * t, 20.0)
        follower = make_track('follow', t, 30.0 * t, 30.0)
        series = ttc_series(make_dataset([leader, follower]))
        self.assertEqual(len(series), 1)
        self.assertEqual(series[0].vehicle_id, 'follow')
        np.testing.assert_allclose(series[0].ttc, [10.0, 9.0, 8.0, 7.0, 6.0, 5.0])
        self.assertAlmostEqual(series[0].min_ttc, 5.0)
        self.assertAlmostEqual(series[0].mean_ttc, 7.5)
        self.assertEqual(series[0].samples[0], (0.0, 10.0))
        self.assertEqual(series[0].csv_row()[3], 6)

    def test_other_lane_is_ignored(self):
        t = np.arange(3.0)
        leader = make_track('lead', t, 50.0 + 20.0 * t, 20.0, lane=1)
        follower = make_track('follow', t, 30.0 * t, 30.0)
        self.assertEqual(ttc_series(make_dataset([leader, follower])), [])

    def test_aggregate(self):
        series = [TtcSeries(1, np.arange(2.0), np.array([4.0, 8.0])),
                  TtcSeries(2, np.arange(2.0), np.array([2.0, 6.0])),
                  SimpleNamespace(min_ttc=None, mean_ttc=None)]
        self.assertEqual(tuple(sweep_aggregate(series)), (4.0, 2.0))
        self.assertEqual(tuple(sweep_aggregate([])), (None, None))


class SimulatedTtcTest(unittest.TestCase):
    '''TTC series of a simulation against a direct rescan'''

    @classmethod
    def setUpClass(cls):
        cls.output = sim.run(small_config())

    def test_rescan(self):
        tracks = self.output.trajectories.tracks
        by_instant = defaultdict(list)
        for track in tracks:
            for row in track.samples:
                by_instant[(round(row[0] * 1000), int(row[4]))].append(
                    (row[3], row[5], track.length))
        expected = {}
        for track in tracks:
            values = []
            for row in track.samples:
                ahead = [other for other in by_instant[(round(row[0] * 1000), int(row[4]))]
                         if other[0] > row[3]]
                if not ahead:
                    continue
                s_lead, v_lead, length = min(ahead)
                value = ttc(s_lead - length - row[3], row[5], v_lead)
                if value is not None and value >= 0:
                    values.append(value)
            if values:
                expected[track.id] = values
        series = {item.vehicle_id: item for item in ttc_series(self.output)}
        self.assertEqual(set(series), set(expected))
        for vehicle_id, values in expected.items():
            np.testing.assert_allclose(series[vehicle_id].ttc, values)

    def test_matches_engine_statistics(self):
        series = {item.vehicle_id: item for item in ttc_series(self.output)}
        checked = 0
        for stat in self.output.stats:
            if stat.min_ttc is None:
                self.assertNotIn(stat.id, series)
                continue
            np.testing.assert_allclose(series[stat.id].min_ttc, stat.min_ttc, rtol=1e-9)
            np.testing.assert_allclose(series[stat.id].mean_ttc, stat.mean_ttc, rtol=1e-9)
            checked += 1
        self.assertGreater(checked, 0)


class PetTest(unittest.TestCase):
    '''Post-encroachment time'''

    def setUp(self):
        self.zone = ConflictZone(100.0, 105.0, 0)
        self.first = make_track('a', np.arange(4.0, 12.0),
                                [90.0, 100.0, 101.0, 102.0, 103.0, 104.0, 105.0, 115.0], 1.0)

    def test_overlap(self):
        second = make_track('b', np.arange(7.0, 13.0),
                            [95.0, 100.0, 103.0, 105.0, 109.0, 112.0], 3.0)
        self.assertEqual(occupancy(second, self.zone), (8.0, 10.0))
        self.assertEqual(pet(self.first, second, self.zone), -2.0)
        self.assertEqual(pet(second, self.first, self.zone), -2.0)

    def test_gap(self):
        second = make_track('b', [12.0, 12.5, 13.0], [99.0, 100.0, 105.0], 5.0)
        self.assertEqual(occupancy(self.first, self.zone), (5.0, 10.0))
        self.assertEqual(pet(self.first, second, self.zone), 2.5)

    def test_crossing_between_samples(self):
        t = np.arange(0.0, 11.0)
        zone = ConflictZone(100.0, 110.0, 0)
        early = make_track('a', t, 30.0 * t, 30.0)
        late = make_track('b', t, 30.0 * (t - 2.5), 30.0)
        entry, leave = occupancy(early, zone)
        self.assertAlmostEqual(entry, 10.0 / 3.0, places=9)
        self.assertAlmostEqual(leave, 11.0 / 3.0, places=9)
        self.assertAlmostEqual(occupancy(late, zone)[0], 35.0 / 6.0, places=9)
        self.assertAlmostEqual(pet(early, late, zone), 13.0 / 6.0, places=9)
        self.assertAlmostEqual(pet(late, early, zone), 13.0 / 6.0, places=9)

    def test_lane_change_through_zone(self):
        t = np.arange(0.0, 6.0)
        lanes = [1, 1, 1, 0, 0, 0]
        track = make_track('a', t, 30.0 * t + 50.0, 30.0, lane=lanes)
        self.assertIsNone(occupancy(track, ConflictZone(100.0, 110.0, 0)))
        self.assertAlmostEqual(occupancy(track, ConflictZone(100.0, 110.0, 1))[0], 5.0 / 3.0,
                               places=9)

    def test_never_inside(self):
        other_lane = make_track('c', np.arange(4.0, 12.0), np.linspace(90.0, 115.0, 8), 3.0,
                                lane=1)
        self.assertIsNone(pet(self.first, other_lane, self.zone))
        self.assertIsNone(occupancy(make_track('d', [], [], []), self.zone))

    def test_empty_zone(self):
        with self.assertRaises(ConfigurationError):
            ConflictZone(105.0, 100.0, 0)


class SummaryTest(unittest.TestCase):
    '''Acceleration and density summaries'''

    def test_accelerations(self):
        t = np.arange(0.0, 2.0, 0.1)
        np.testing.assert_allclose(accelerations(make_track(1, t, 0.0, 20.0 + 2.0 * t)), 2.0)
        self.assertEqual(len(accelerations(make_track(1, [0.0], 0.0, 20.0))), 1)

    def test_density(self):
        network = RoadNetwork(2, 1000.0, 100.0)
        t = [0.0, 0.5, 1.0, 1.5]
        inside = make_track(1, t, 500.0, 20.0)
        other_lane = make_track(2, t, 600.0, 20.0, lane=1)
        inflow = make_track(3, t, 50.0, 20.0)
        dataset = make_dataset([inside, other_lane, inflow])
        self.assertEqual(traffic_density(dataset, network, 0.5), 1.0)
        self.assertEqual(traffic_density(dataset, network, 7.0), 0.0)
        times, values = density_series(dataset, network, step=1.0)
        np.testing.assert_allclose(times, [0.0, 1.0])
        np.testing.assert_allclose(values, [1.0, 1.0])
        with self.assertRaises(ConfigurationError):
            density_series(dataset, network, step=0)


if __name__ == '__main__':
    unittest.main()
