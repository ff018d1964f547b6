import os
from pathlib import Path

import pytest

from sdms import init_container

VECTORS = Path(__file__).parent / "vectors"
FAST_ITERATIONS = 1000
PASSPHRASE = "correct horse battery staple"


def load_rsp(name):
    """Parse a CAVP .rsp file into (direction, record) pairs."""
    cases = []
    direction = None
    record = {}
    for line in (VECTORS / name).read_text().splitlines():
        line = line.strip()
        if line.startswith("#"):
            continue
        if line in ("[ENCRYPT]", "[DECRYPT]"):
            direction = line[1:-1].lower()
        elif " = " in line:
            key, value = line.split(" = ", 1)
            if key == "COUNT" and record:
                cases.append((direction, record))
                record = {}
            record[key] = value
    if record:
        cases.append((direction, record))
    return cases


def load_ieee():
    cases = []
    record = {}
    for line in (VECTORS / "ieee1619_xts_aes.txt").read_text().splitlines():
        if line.startswith("#") or " = " not in line:
            continue
        key, value = line.split(" = ", 1)
        if key == "vector" and record:
            cases.append(record)
            record = {}
        record[key] = value
    cases.append(record)
    return cases


@pytest.fixture
def make_container(tmp_path):
    """Factory for small, fast-to-unlock containers; closes them afterwards."""
    opened = []

    def make(name="disk.img", total_data_sectors=64, **kwargs):
        kwargs.setdefault("kdf_iterations", FAST_ITERATIONS)
        kwargs.setdefault("passphrase", PASSPHRASE)
        path = tmp_path / name
        device = init_container(path, total_data_sectors=total_data_sectors, **kwargs)
        opened.append(device)
        return device

    yield make
    for device in opened:
        device.close()


def file_bytes(path):
    with open(path, "rb") as f:
        return f.read()


@pytest.fixture
def urandom():
    return os.urandom
