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
import tempfile
import unittest

import numpy as np

from w99cal.carfollow import W99Params
from w99cal.config import AlteredSpec, DesiredSpeedDistribution, SimConfig
from w99cal.errors import ConfigurationError
from w99cal.lanechange import LaneChangeParams
from w99cal.utils import read_text
from w99cal.vehicle_class import VehicleClass
from tests.common import CONFIGS_DIR, small_config


class DesiredSpeedTest(unittest.TestCase):
    '''Truncated Gaussian desired speeds'''

    def setUp(self):
        self.speeds = DesiredSpeedDistribution(131.05, 17.48)

    def test_bounds(self):
        low, high = self.speeds.bounds
        self.assertAlmostEqual(low, 65.525)
        self.assertAlmostEqual(high, 196.575)
        np.testing.assert_allclose(self.speeds.sample([0.0, 1.0]), [low, high])

    def test_inverse_cdf(self):
        self.assertAlmostEqual(float(self.speeds.sample(0.5)), 131.05)
        samples = self.speeds.sample(np.linspace(0.01, 0.99, 99))
        self.assertTrue(np.all(np.diff(samples) > 0))
        self.assertAlmostEqual(float(self.speeds.sample(0.8413447)), 131.05 + 17.48, places=1)

    def test_invalid(self):
        for mu, sigma in ((0.0, 10.0), (120.0, 0.0), (-5.0, 1.0), (np.nan, 3.0)):
            with self.assertRaises(ConfigurationError):
                DesiredSpeedDistribution(mu, sigma)


class SimConfigTest(unittest.TestCase):
    '''Simulation configuration'''

    def test_defaults(self):
        config = SimConfig()
        self.assertEqual(config.network.lane_count, 3)
        self.assertEqual(config.flow[VehicleClass.Car].volume, 1680.0)
        self.assertEqual(config.desired_speed[VehicleClass.Truck].mu, 89.22)
        self.assertEqual(config.analysis_window, 1800.0)
        self.assertEqual(config.steps, 24000)
        self.assertEqual(small_config(warmup=200.0).analysis_window, 0.0)

    def test_round_trip(self):
        config = small_config(altered=AlteredSpec(0.2, {'cc3': -4.0}, True),
                              lane_change=LaneChangeParams(desire_threshold_kmh=np.inf),
                              kde_bandwidth=3.0)
        self.assertEqual(SimConfig.from_json(config.data_to_serialize()), config)
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'config.json')
            config.to_json_file(path)
            self.assertEqual(SimConfig.from_json_file(path), config)

    def test_shipped_configs(self):
        highway = SimConfig.from_json_file(os.path.join(CONFIGS_DIR, 'highway.json'))
        self.assertEqual(highway, SimConfig())
        light = SimConfig.from_json_file(os.path.join(CONFIGS_DIR, 'light_traffic.json'))
        self.assertEqual(light.flow[VehicleClass.Truck].length, 12.0)
        self.assertEqual(light.seed, 7)

    def test_w99_tables(self):
        flat = SimConfig.from_json({'w99': {'cc1': 1.2}})
        self.assertEqual(flat.w99[VehicleClass.Car], W99Params(cc1=1.2))
        self.assertEqual(flat.w99[VehicleClass.Truck], W99Params(cc1=1.2))
        per_class = SimConfig.from_json({'w99': {'truck': {'cc0': 3.0}}})
        self.assertEqual(per_class.w99[VehicleClass.Car], W99Params())
        self.assertEqual(per_class.w99[VehicleClass.Truck].cc0, 3.0)

    def test_altered(self):
        config = SimConfig(altered=AlteredSpec(0.1, {'cc1': 0.5}))
        self.assertEqual(config.altered_params(), W99Params(cc1=0.5))
        with self.assertRaises(ConfigurationError):
            AlteredSpec(1.5)
        with self.assertRaises(ConfigurationError):
            AlteredSpec(0.1, {'cc12': 1.0})
        with self.assertRaises(ConfigurationError):
            SimConfig(altered=AlteredSpec(0.1, {'cc0': -1.0}))

    def test_with_desired_speeds(self):
        config = small_config().with_desired_speeds((120.0, 10.0, 85.0, 4.0))
        self.assertEqual(config.desired_speed[VehicleClass.Car],
                         DesiredSpeedDistribution(120.0, 10.0))
        self.assertEqual(config.desired_speed[VehicleClass.Truck],
                         DesiredSpeedDistribution(85.0, 4.0))
        self.assertEqual(config.seed, 11)

    def test_invalid(self):
        cases = [
            {'lanes': 3},
            {'network': {'lane_count': 0}},
            {'flow': {'bus': {'volume_veh_h': 10}}},
            {'flow': {'bicycle': {'volume_veh_h': 10}}},
            {'flow': {'car': {'volume_veh_h': -1}}},
            {'desired_speed': {'car': {'mu_kmh': 120}}},
            {'w99': {'cc3': 1.0}},
            {'w99': {'cc13': 1.0}},
            {'seed': 'one'},
            {'seed': True},
            {'seed': -1},
            {'dt_s': 0},
            {'horizon_s': 0},
            {'kde': {'bandwidth': -1}},
            {'lane_change': {'cooldown_s': -1}},
            [],
        ]
        for data in cases:
            with self.subTest(data=data):
                with self.assertRaises(ConfigurationError):
                    SimConfig.from_json(data)

    def test_invalid_json_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'config.json')
            with open(path, 'w', encoding='utf-8') as config_file:
                config_file.write('{"seed": ')
            with self.assertRaises(ConfigurationError):
                SimConfig.from_json_file(path)
            self.assertEqual(read_text(path), '{"seed": ')

    def test_not_utf8_file(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'config.json')
            with open(path, 'wb') as config_file:
                config_file.write(b'{"seed": "\xe9"}')
            with self.assertRaises(ConfigurationError) as ctx:
                SimConfig.from_json_file(path)
            self.assertIn(path, str(ctx.exception))


if __name__ == '__main__':
    unittest.main()
