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

from enum import Enum


class VehicleClass(Enum):
    '''Coarse classification of a traffic participant'''
    Car = 'car'
    Truck = 'truck'
    Bicycle = 'bicycle'
    Pedestrian = 'pedestrian'
    Other = 'other'


# Classes the simulator spawns and calibration fits, in array-index order
SIMULATED_CLASSES = (VehicleClass.Car, VehicleClass.Truck)


class Provenance(Enum):
    '''How a scenario came to be'''
    Natural = 'natural'
    Staged = 'staged'
    Simulated = 'simulated'
