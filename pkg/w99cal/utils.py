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

import csv
import hashlib
import io
import json
import logging
import os
import sys
import tempfile

import numpy as np

LOG_ENV = 'W99_LOG'
LOG_LEVELS = {
    'error': logging.ERROR,
    'warn': logging.WARNING,
    'info': logging.INFO,
    'debug': logging.DEBUG,
}
LOG_FORMAT = '%(asctime)s %(levelname)s %(name)s: %(message)s'

MPS_TO_KMH = 3.6

logger = logging.getLogger(__name__)


def setup_logging():
    '''Configure stderr diagnostics from the W99_LOG environment variable'''
    value = os.environ.get(LOG_ENV, 'warn').lower()
    level = LOG_LEVELS.get(value)
    logging.basicConfig(level=level or logging.WARNING,
                        format=LOG_FORMAT, stream=sys.stderr, force=True)
    if level is None:
        logger.warning('Unknown %s value "%s", using "warn"', LOG_ENV, value)


def kmh(speed_mps):
    '''m/s to km/h'''
    return speed_mps * MPS_TO_KMH


def mps(speed_kmh):
    '''km/h to m/s'''
    return speed_kmh / MPS_TO_KMH


def seed_streams(seed: int, count: int):
    '''Derive `count` independent generators from one seed'''
    children = np.random.SeedSequence(seed).spawn(count)
    return [np.random.default_rng(child) for child in children]


def format_float(value):
    '''CSV float: 6 significant digits, empty when absent'''
    if value is None:
        return ''
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), '.6g')


def csv_text(header: list, rows) -> str:
    '''Render rows as CSV text with "\n" line endings'''
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(header)
    for row in rows:
        writer.writerow([field if isinstance(field, str) else format_float(field)
                         for field in row])
    return buffer.getvalue()


def atomic_write(path: str, text: str):
    '''Write text to path through a temporary file and a rename'''
    dest_dir = os.path.dirname(os.path.abspath(path))
    os.makedirs(dest_dir, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=dest_dir, prefix='.tmp-')
    try:
        with os.fdopen(fd, 'w', encoding='utf-8', newline='') as tmp_file:
            tmp_file.write(text)
        os.replace(tmp_path, path)
    except BaseException:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug('Wrote %s (md5 %s)', path, file_checksum(path))


def write_csv(path: str, header: list, rows):
    '''Atomically write a CSV file'''
    atomic_write(path, csv_text(header, rows))


def write_json(path: str, data):
    '''Atomically write a JSON document'''
    atomic_write(path, json.dumps(data, indent=1) + '\n')


def read_text(path: str) -> str:
    '''Read a UTF-8 file'''
    with open(path, encoding='utf-8') as in_file:
        return in_file.read()


def file_checksum(path: str):
    '''Calculates the checksum of a file reading chunks of 64KiB'''
    md5 = hashlib.md5()
    with open(path, 'rb') as file:
        while True:
            data = file.read(65536)
            if not data:
                break
            md5.update(data)
    return md5.hexdigest()
