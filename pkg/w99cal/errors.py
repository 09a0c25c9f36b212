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


class W99Error(Exception):
    '''Base class for every error raised by w99cal'''


class UsageError(W99Error):
    '''Invalid command line usage'''


class ConfigurationError(W99Error):
    '''Invalid simulation, network or calibration configuration'''


class DatasetParseError(W99Error):
    '''Dataset document does not follow the JSON schema'''

    def __init__(self, path: str, message: str):
        super().__init__(f'{path}: {message}')
        self.path = path


class DatasetValidationError(W99Error):
    '''Dataset parsed but breaks one of its invariants'''

    def __init__(self, path: str, message: str):
        super().__init__(f'{path}: {message}')
        self.path = path


class CongestionError(W99Error):
    '''The inflow stayed jammed for too long'''

    def __init__(self, sim_time: float, message: str = None):
        super().__init__(
            message or f'inflow jammed, spawn queue stuck at simulated time {sim_time:.1f} s')
        self.sim_time = sim_time


class ConsistencyError(W99Error):
    '''Internal engine invariant broken (same-lane overlap)'''


class DegenerateDensityError(W99Error):
    '''Not enough samples or no spread to fit a density'''


class OptimizerInitError(W99Error):
    '''Objective is not finite at the starting point'''


class CalibrationFailedError(W99Error):
    '''Every calibration restart ended penalized'''
