"""DK_Func: derive the real-time sector key from (DEK, seed, sector index).

Block ``t`` of the output (counting from 1) is::

    HMAC-SHA-512(DEK, seed || LE64(index) || LE32(t) || b"SDMS-DKF1")

Blocks are concatenated and cut to the requested length.
"""

import hashlib
import hmac
import struct

from .errors import ConfigurationError, ContractError

DOMAIN_TAG = b"SDMS-DKF1"
RTEK_LENGTH = 64
INDEX_BITS = 64
MIN_DEK_LENGTH = 32
MAX_DEK_LENGTH = 1024

_DIGEST_SIZE = hashlib.sha512().digest_size


def check_dek(dek):
    if not isinstance(dek, (bytes, bytearray)):
        raise ContractError("DEK must be bytes")
    if not MIN_DEK_LENGTH <= len(dek) <= MAX_DEK_LENGTH:
        raise ContractError(
            f"DEK length {len(dek)} outside [{MIN_DEK_LENGTH}, {MAX_DEK_LENGTH}] bytes"
        )


def dk_func(dek: bytes, seed: bytes, sector_index: int, *, seed_size=None, length=RTEK_LENGTH) -> bytes:
    check_dek(dek)
    if not isinstance(seed, (bytes, bytearray)) or not seed:
        raise ContractError("seed must be a non-empty byte string")
    if seed_size is not None and len(seed) != seed_size:
        raise ContractError(f"seed is {len(seed)} bytes, expected {seed_size}")
    if not 0 <= sector_index < 1 << INDEX_BITS:
        raise ContractError(f"sector index {sector_index} does not fit in {INDEX_BITS} bits")
    if length <= 0:
        raise ContractError("RTEK length must be positive")

    prefix = bytes(seed) + struct.pack("<Q", sector_index)
    base = hmac.new(bytes(dek), digestmod=hashlib.sha512)
    out = bytearray()
    counter = 1
    while len(out) < length:
        mac = base.copy()
        mac.update(prefix + struct.pack("<I", counter) + DOMAIN_TAG)
        out += mac.digest()
        counter += 1
    return bytes(out[:length])


def input_space_bits(dek_bits: int, index_bits: int, seed_bits: int) -> int:
    """log2 of the number of distinct (DEK, index, seed) inputs."""
    for value in (dek_bits, index_bits, seed_bits):
        if value <= 0:
            raise ConfigurationError("bit widths must be positive")
    return dek_bits + index_bits + seed_bits


def check_input_space(dek_length: int, seed_size: int, rtek_length: int = RTEK_LENGTH):
    """Reject configurations whose input space does not exceed the RTEK space."""
    bits = input_space_bits(dek_length * 8, INDEX_BITS, seed_size * 8)
    if bits <= rtek_length * 8:
        raise ConfigurationError(
            f"input space 2^{bits} does not exceed the {rtek_length * 8}-bit key space"
        )
    return bits
