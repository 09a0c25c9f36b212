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

import hashlib
import logging
import os
import tempfile
import unittest
from unittest import mock

import numpy as np

from w99cal import utils


class UtilsTest(unittest.TestCase):
    '''Helpers'''

    def test_units(self):
        self.assertAlmostEqual(utils.kmh(25.0), 90.0)
        self.assertAlmostEqual(utils.mps(90.0), 25.0)

    def test_format_float(self):
        self.assertEqual(utils.format_float(None), '')
        self.assertEqual(utils.format_float(True), '1')
        self.assertEqual(utils.format_float(np.int64(12)), '12')
        self.assertEqual(utils.format_float(1.0 / 3.0), '0.333333')
        self.assertEqual(utils.format_float(131.0512), '131.051')
        self.assertEqual(utils.format_float(1e9 + 2), '1e+09')

    def test_csv_text(self):
        text = utils.csv_text(['id', 'class', 'v'], [[1, 'car', 30.25], ['b,2', 'truck', None]])
        self.assertEqual(text, 'id,class,v\n1,car,30.25\n"b,2",truck,\n')

    def test_seed_streams(self):
        first = [rng.random() for rng in utils.seed_streams(42, 3)]
        second = [rng.random() for rng in utils.seed_streams(42, 3)]
        self.assertEqual(first, second)
        self.assertEqual(len(set(first)), 3)

    def test_atomic_write(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'sub', 'out.txt')
            utils.atomic_write(path, 'one\n')
            utils.atomic_write(path, 'two\n')
            self.assertEqual(utils.read_text(path), 'two\n')
            self.assertEqual(os.listdir(os.path.dirname(path)), ['out.txt'])
            self.assertEqual(utils.file_checksum(path), hashlib.md5(b'two\n').hexdigest())

    def test_checksum_only_when_debugging(self):
        self.addCleanup(utils.logger.setLevel, logging.NOTSET)
        with tempfile.TemporaryDirectory() as tmp, \
                mock.patch.object(utils, 'file_checksum', wraps=utils.file_checksum) as checksum:
            path = os.path.join(tmp, 'out.txt')
            utils.logger.setLevel(logging.WARNING)
            for _ in range(3):
                utils.atomic_write(path, 'quiet\n')
            checksum.assert_not_called()
            with self.assertLogs('w99cal.utils', level='DEBUG') as logs:
                utils.atomic_write(path, 'loud\n')
            checksum.assert_called_once_with(path)
            self.assertIn(hashlib.md5(b'loud\n').hexdigest(), logs.output[0])

    def test_setup_logging(self):
        with mock.patch.dict(os.environ, {utils.LOG_ENV: 'debug'}):
            utils.setup_logging()
            self.assertEqual(logging.getLogger().level, logging.DEBUG)
        with mock.patch.dict(os.environ, {utils.LOG_ENV: 'chatty'}):
            with self.assertLogs('w99cal.utils', level='WARNING'):
                utils.setup_logging()
            self.assertEqual(logging.getLogger().level, logging.WARNING)


if __name__ == '__main__':
    unittest.main()
