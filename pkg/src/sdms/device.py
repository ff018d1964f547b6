"""The SDMS block device over a container file.

File layout: a 4096-byte header region (header record, zero padded),
then the SDMS blocks back to back. Every write draws a fresh seed,
derives the sector key from (DEK, seed, index), stores the ciphertext in
the DA area and finally the seed in its SA slot.
"""

import fcntl
import hashlib
import os
import struct
import threading
from dataclasses import dataclass, replace

from . import keystore
from .cipher import SectorCipherParams, xts_decrypt_sector, xts_encrypt_sector
from .errors import (
    ConfigurationError,
    ContractError,
    FormatError,
    SectorIOError,
)
from .kdf import RTEK_LENGTH, check_input_space, dk_func
from .layout import Geometry, derive_geometry, locate

MAGIC = b"SDMSDSK1"
VERSION = 1
HEADER_SIZE = 4096
EA_AES256_XTS = 1
KDF_SDMS_DKF1 = 1
KEYSTORE_EMBEDDED = 0
KEYSTORE_EXTERNAL = 1

_FIXED = struct.Struct("<8sHIHHQHBBB")
_CHECKSUM_SIZE = 32


@dataclass(frozen=True)
class ContainerHeader:
    sector_size: int
    seed_size: int
    sa_sectors_per_block: int
    total_data_sectors: int
    dek_length: int
    keystore_mode: int
    wrapped_dek_or_fingerprint: bytes
    ea_id: int = EA_AES256_XTS
    kdf_id: int = KDF_SDMS_DKF1
    version: int = VERSION
    magic: bytes = MAGIC

    def geometry(self) -> Geometry:
        return derive_geometry(
            self.sector_size, self.seed_size, self.sa_sectors_per_block, self.total_data_sectors
        )

    def wrapped_dek(self) -> keystore.WrappedDek:
        if self.keystore_mode != KEYSTORE_EMBEDDED:
            raise ConfigurationError("DEK is kept in an external keyfile")
        return keystore.WrappedDek.from_bytes(self.wrapped_dek_or_fingerprint)

    def pack(self) -> bytes:
        """Serialize to exactly HEADER_SIZE bytes."""
        body = _FIXED.pack(
            self.magic,
            self.version,
            self.sector_size,
            self.seed_size,
            self.sa_sectors_per_block,
            self.total_data_sectors,
            self.dek_length,
            self.ea_id,
            self.kdf_id,
            self.keystore_mode,
        )
        body += struct.pack("<H", len(self.wrapped_dek_or_fingerprint))
        body += self.wrapped_dek_or_fingerprint
        body += hashlib.sha256(body).digest()
        if len(body) > HEADER_SIZE:
            raise ConfigurationError("header does not fit in its reserved region")
        return body.ljust(HEADER_SIZE, b"\0")

    @classmethod
    def unpack(cls, data: bytes) -> "ContainerHeader":
        if len(data) < _FIXED.size + 2 + _CHECKSUM_SIZE:
            raise FormatError("file too short for an SDMS header")
        fields = _FIXED.unpack_from(data)
        magic, version = fields[0], fields[1]
        if magic != MAGIC:
            raise FormatError("not an SDMS container (bad magic)")
        if version != VERSION:
            raise FormatError(f"unsupported container version {version}")
        (blob_len,) = struct.unpack_from("<H", data, _FIXED.size)
        end = _FIXED.size + 2 + blob_len
        if end + _CHECKSUM_SIZE > min(len(data), HEADER_SIZE):
            raise FormatError("header blob overruns the header region")
        if hashlib.sha256(data[:end]).digest() != data[end:end + _CHECKSUM_SIZE]:
            raise FormatError("header checksum mismatch")
        (_, _, sector_size, seed_size, sa, total, dek_length, ea_id, kdf_id, mode) = fields
        if ea_id != EA_AES256_XTS:
            raise FormatError(f"unknown sector cipher id {ea_id}")
        if kdf_id != KDF_SDMS_DKF1:
            raise FormatError(f"unknown key derivation id {kdf_id}")
        if mode not in (KEYSTORE_EMBEDDED, KEYSTORE_EXTERNAL):
            raise FormatError(f"unknown keystore mode {mode}")
        header = cls(
            sector_size=sector_size,
            seed_size=seed_size,
            sa_sectors_per_block=sa,
            total_data_sectors=total,
            dek_length=dek_length,
            keystore_mode=mode,
            wrapped_dek_or_fingerprint=bytes(data[_FIXED.size + 2:end]),
            ea_id=ea_id,
            kdf_id=kdf_id,
        )
        try:
            header.geometry()
        except ConfigurationError as e:
            raise FormatError(f"header geometry invalid: {e}") from None
        return header


def read_header(path) -> ContainerHeader:
    """Parse and validate a container header without unlocking it."""
    with open(path, "rb") as f:
        return ContainerHeader.unpack(f.read(HEADER_SIZE))


class SdmsDevice:
    """An unlocked container.

    Holds an exclusive advisory lock on the file for its lifetime. Sector
    operations are serialized internally; do not share one handle between
    threads that expect parallelism.
    """

    def __init__(self, fd, header: ContainerHeader, dek: bytes, random_source=None, path=None):
        self._fd = fd
        self._lock = threading.RLock()
        self.path = path
        self.header = header
        self.geometry = header.geometry()
        self._dek = dek
        self.random_source = random_source or os.urandom

    @property
    def sector_size(self) -> int:
        return self.geometry.sector_size

    @property
    def total_sectors(self) -> int:
        return self.geometry.total_data_sectors

    @property
    def dek(self) -> bytes:
        self._check_open()
        return self._dek

    @property
    def closed(self) -> bool:
        return self._fd is None

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        with self._lock:
            if self._fd is not None:
                fcntl.flock(self._fd, fcntl.LOCK_UN)
                os.close(self._fd)
                self._fd = None
                self._dek = None

    def _check_open(self):
        if self._fd is None:
            raise ContractError("device is closed")

    def locate(self, sector_index):
        return locate(self.geometry, sector_index, origin=HEADER_SIZE)

    def _pread(self, offset, size):
        data = os.pread(self._fd, size, offset)
        if len(data) != size:
            raise SectorIOError(f"short read at offset {offset}")
        return data

    def _pwrite(self, offset, data):
        if os.pwrite(self._fd, data, offset) != len(data):
            raise SectorIOError(f"short write at offset {offset}")

    def _params(self, seed, sector_index):
        rtek = dk_func(self._dek, seed, sector_index, seed_size=self.geometry.seed_size)
        return SectorCipherParams.from_rtek(rtek, sector_index)

    def read_seed(self, sector_index) -> bytes:
        """Raw SA slot contents for a sector."""
        with self._lock:
            self._check_open()
            loc = self.locate(sector_index)
            return self._pread(loc.seed_offset, self.geometry.seed_size)

    def read_ciphertext(self, sector_index) -> bytes:
        """Raw DA sector contents for a sector."""
        with self._lock:
            self._check_open()
            loc = self.locate(sector_index)
            return self._pread(loc.data_offset, self.sector_size)

    def write_sector(self, sector_index: int, plaintext: bytes):
        if not isinstance(plaintext, (bytes, bytearray)) or len(plaintext) != self.sector_size:
            raise ContractError(f"sector payload must be exactly {self.sector_size} bytes")
        with self._lock:
            self._check_open()
            loc = self.locate(sector_index)
            seed = self.random_source(self.geometry.seed_size)
            if len(seed) != self.geometry.seed_size:
                raise ContractError("random source returned the wrong number of bytes")
            ciphertext = xts_encrypt_sector(self._params(seed, sector_index), plaintext)
            try:
                self._pwrite(loc.data_offset, ciphertext)
                self._pwrite(loc.seed_offset, seed)
            except OSError as e:
                raise SectorIOError(
                    f"write of sector {sector_index} failed; its contents are undefined: {e}"
                ) from e

    def read_sector(self, sector_index: int) -> bytes:
        with self._lock:
            self._check_open()
            loc = self.locate(sector_index)
            seed = self._pread(loc.seed_offset, self.geometry.seed_size)
            ciphertext = self._pread(loc.data_offset, self.sector_size)
        return xts_decrypt_sector(self._params(seed, sector_index), ciphertext)

    def import_raw(self, source, start: int = 0) -> int:
        """Copy a plaintext stream into consecutive sectors; returns sectors written.

        A short final chunk is zero padded.
        """
        index = start
        size = self.sector_size
        while True:
            chunk = _read_full(source, size)
            if not chunk:
                break
            if index >= self.total_sectors:
                raise ContractError("input does not fit in the container")
            self.write_sector(index, chunk.ljust(size, b"\0"))
            index += 1
            if len(chunk) < size:
                break
        return index - start

    def export_raw(self, sink, start: int = 0, count=None) -> int:
        stop = self.total_sectors if count is None else start + count
        for index in range(start, stop):
            sink.write(self.read_sector(index))
        return stop - start

    def change_passphrase(self, old_passphrase, new_passphrase, keyfile=None, iterations=None):
        """Rewrap the DEK under a new passphrase. Sector data is untouched."""
        with self._lock:
            self._check_open()
            header = self.header
            if header.keystore_mode == KEYSTORE_EMBEDDED:
                wrapped = keystore.rewrap_dek(
                    header.wrapped_dek(), old_passphrase, new_passphrase, iterations
                )
                blob = wrapped.to_bytes()
            else:
                if keyfile is None:
                    raise ConfigurationError("this container needs its keyfile")
                old, fingerprint = keystore.read_keyfile(keyfile)
                if fingerprint != header.wrapped_dek_or_fingerprint:
                    raise FormatError("keyfile does not belong to this container")
                wrapped = keystore.rewrap_dek(old, old_passphrase, new_passphrase, iterations)
                blob = keystore.write_keyfile(keyfile, wrapped)
            new_header = replace(header, wrapped_dek_or_fingerprint=blob)
            self._pwrite(0, new_header.pack())
            os.fsync(self._fd)
            self.header = new_header


def _read_full(stream, size):
    buf = bytearray()
    while len(buf) < size:
        chunk = stream.read(size - len(buf))
        if not chunk:
            break
        buf += chunk
    return bytes(buf)


def _lock(fd):
    try:
        fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
    except BlockingIOError:
        raise SectorIOError("container is in use by another handle") from None


def init_container(
    path,
    passphrase,
    *,
    total_data_sectors,
    sector_size=512,
    seed_size=16,
    sa_sectors_per_block=1,
    dek_length=256,
    kdf_iterations=keystore.DEFAULT_ITERATIONS,
    keyfile=None,
    overwrite=False,
    random_source=None,
) -> SdmsDevice:
    """Create a container and return it unlocked.

    Every data sector starts out as the encryption of zeros under its own
    fresh seed. The image is built in a temporary file and renamed into
    place, so a failure never leaves a container that opens.
    """
    geometry = derive_geometry(sector_size, seed_size, sa_sectors_per_block, total_data_sectors)
    check_input_space(dek_length, seed_size, RTEK_LENGTH)
    path = os.fspath(path)
    if os.path.exists(path) and not overwrite:
        raise FileExistsError(path)
    random_source = random_source or os.urandom

    dek = keystore.generate_dek(dek_length)
    wrapped = keystore.wrap_dek(dek, passphrase, kdf_iterations)
    if keyfile is None:
        mode, blob = KEYSTORE_EMBEDDED, wrapped.to_bytes()
    else:
        mode, blob = KEYSTORE_EXTERNAL, keystore.write_keyfile(keyfile, wrapped)
    header = ContainerHeader(
        sector_size=sector_size,
        seed_size=seed_size,
        sa_sectors_per_block=sa_sectors_per_block,
        total_data_sectors=total_data_sectors,
        dek_length=dek_length,
        keystore_mode=mode,
        wrapped_dek_or_fingerprint=blob,
    )

    tmp = f"{path}.init-{os.getpid()}"
    fd = os.open(tmp, os.O_RDWR | os.O_CREAT | os.O_TRUNC, 0o600)
    try:
        _lock(fd)
        os.pwrite(fd, header.pack(), 0)
        zero = bytes(sector_size)
        da = geometry.da_sectors_per_block
        for block in range(geometry.block_count):
            seeds = bytearray(geometry.sa_extent)
            data = bytearray(da * sector_size)
            first = block * da
            for slot in range(min(da, total_data_sectors - first)):
                index = first + slot
                seed = random_source(seed_size)
                seeds[slot * seed_size:(slot + 1) * seed_size] = seed
                rtek = dk_func(dek, seed, index, seed_size=seed_size)
                data[slot * sector_size:(slot + 1) * sector_size] = xts_encrypt_sector(
                    SectorCipherParams.from_rtek(rtek, index), zero
                )
            os.pwrite(fd, bytes(seeds) + bytes(data), HEADER_SIZE + block * geometry.block_extent)
        os.fsync(fd)
        os.replace(tmp, path)
    except BaseException:
        os.close(fd)
        try:
            os.unlink(tmp)
        except FileNotFoundError:
            pass
        raise
    return SdmsDevice(fd, header, dek, random_source, path=path)


def open_container(path, passphrase, *, keyfile=None, random_source=None, writable=True) -> SdmsDevice:
    fd = os.open(path, os.O_RDWR if writable else os.O_RDONLY)
    try:
        _lock(fd)
        header = ContainerHeader.unpack(os.pread(fd, HEADER_SIZE, 0))
        geometry = header.geometry()
        if os.fstat(fd).st_size < HEADER_SIZE + geometry.data_area_size:
            raise FormatError("container file is shorter than its geometry requires")
        if header.keystore_mode == KEYSTORE_EMBEDDED:
            if keyfile is not None:
                raise ConfigurationError("this container keeps its DEK in the header")
            wrapped = header.wrapped_dek()
        else:
            if keyfile is None:
                raise ConfigurationError("this container needs its keyfile")
            wrapped, fingerprint = keystore.read_keyfile(keyfile)
            if fingerprint != header.wrapped_dek_or_fingerprint:
                raise FormatError("keyfile does not belong to this container")
        if wrapped.dek_length != header.dek_length:
            raise FormatError("wrapped DEK length disagrees with the header")
        dek = keystore.unwrap_dek(wrapped, passphrase)
    except BaseException:
        fcntl.flock(fd, fcntl.LOCK_UN)
        os.close(fd)
        raise
    return SdmsDevice(fd, header, dek, random_source, path=os.fspath(path))
