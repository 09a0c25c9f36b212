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

import argparse
import os
import sys

# pylint: disable=wrong-import-position
sys.path.append(os.path.join(os.path.dirname(__file__), '..'))
from w99cal.config import SimConfig
from w99cal.sim import run
from w99cal.utils import setup_logging
from w99cal.vehicle_class import VehicleClass
# pylint: enable=wrong-import-position

DEFAULT_THETA = (131.05, 17.48, 89.22, 6.20)


class SyntheticDatasetGenerator:
    '''Generates a "recorded" dataset by simulating known desired-speed distributions'''

    def __init__(self, config: SimConfig, theta, cars: int, trucks: int):
        self.config = config.with_desired_speeds(theta)
        self.wanted = {VehicleClass.Car: cars, VehicleClass.Truck: trucks}

    def generate(self, output_filepath: str, seed: int):
        '''Simulates, keeps a random subset of complete tracks and saves it'''
        output = run(self.config.replace(seed=seed, record_trajectories=True))
        dataset = output.recorded_subset(self.wanted, seed)
        dataset.to_json_file(output_filepath)
        print(f'Generated {output_filepath} with {len(dataset.tracks)} tracks')


if __name__ == '__main__':
    parser = argparse.ArgumentParser()
    parser.add_argument('-c', '--config', help='simulation config JSON',
                        default=os.path.join(os.path.dirname(__file__), '..', 'configs',
                                             'highway.json'))
    parser.add_argument('-o', '--output', help='dataset JSON output', default='synthetic.json')
    parser.add_argument('-s', '--seed', help='simulation and subsampling seed', type=int,
                        default=2021)
    parser.add_argument('--theta', help='mu_car sigma_car mu_truck sigma_truck in km/h',
                        type=float, nargs=4, default=DEFAULT_THETA)
    parser.add_argument('--cars', help='number of car tracks', type=int, default=180)
    parser.add_argument('--trucks', help='number of truck tracks', type=int, default=35)
    args = parser.parse_args()
    setup_logging()
    generator = SyntheticDatasetGenerator(SimConfig.from_json_file(args.config), args.theta,
                                          args.cars, args.trucks)
    generator.generate(args.output, args.seed)
