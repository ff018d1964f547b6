"""AES-XTS sector encryption with an in-repo tweak chain.

Each 16-byte block ``j`` of a sector is processed as::

    T_j = E_k2(n) * alpha^j          (in GF(2^128))
    C_j = E_k1(P_j ^ T_j) ^ T_j

Only the raw AES block permutation comes from ``cryptography``; the mask
computation and the composition live here.
"""

from dataclasses import dataclass

from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .errors import ContractError

BLOCK_SIZE = 16
_MASK128 = (1 << 128) - 1
# x^128 = x^7 + x^2 + x + 1
_REDUCTION = 0x87


def gf128_mul_alpha(x: int) -> int:
    """Multiply by the primitive element alpha = x.

    Elements are integers read from 16 bytes in little-endian order, so
    bit ``k`` is the coefficient of ``x^k``.
    """
    carry = x >> 127
    return ((x << 1) & _MASK128) ^ (_REDUCTION if carry else 0)


@dataclass(frozen=True)
class SectorCipherParams:
    k1: bytes
    k2: bytes
    tweak: bytes

    def __post_init__(self):
        if len(self.k1) not in (16, 32) or len(self.k2) != len(self.k1):
            raise ContractError("k1 and k2 must both be 16 or 32 bytes")
        if len(self.tweak) != BLOCK_SIZE:
            raise ContractError("tweak must be 16 bytes")

    @classmethod
    def from_rtek(cls, rtek: bytes, sector_index: int) -> "SectorCipherParams":
        """Split a sector key into (k1, k2) and build the tweak from the index."""
        if len(rtek) != 64:
            raise ContractError(f"RTEK must be 64 bytes for AES-256-XTS, got {len(rtek)}")
        return cls(k1=rtek[:32], k2=rtek[32:], tweak=sector_tweak(sector_index))


def sector_tweak(sector_index: int) -> bytes:
    if not 0 <= sector_index < 1 << 128:
        raise ContractError("sector index does not fit the 128-bit tweak")
    return sector_index.to_bytes(BLOCK_SIZE, "little")


def _ecb(key: bytes, data: bytes, decrypt=False) -> bytes:
    cipher = Cipher(algorithms.AES(key), modes.ECB())
    ctx = cipher.decryptor() if decrypt else cipher.encryptor()
    return ctx.update(data) + ctx.finalize()


def _mask(params: SectorCipherParams, nblocks: int) -> int:
    t = int.from_bytes(_ecb(params.k2, params.tweak), "little")
    mask = 0
    for j in range(nblocks):
        mask |= t << (128 * j)
        t = gf128_mul_alpha(t)
    return mask


def _xor(data: bytes, mask: int) -> bytes:
    return (int.from_bytes(data, "little") ^ mask).to_bytes(len(data), "little")


def _check(data):
    if not isinstance(data, (bytes, bytearray)) or not data or len(data) % BLOCK_SIZE:
        raise ContractError(
            f"sector data must be a non-empty multiple of {BLOCK_SIZE} bytes"
        )


def xts_encrypt_sector(params: SectorCipherParams, plaintext: bytes) -> bytes:
    _check(plaintext)
    mask = _mask(params, len(plaintext) // BLOCK_SIZE)
    return _xor(_ecb(params.k1, _xor(plaintext, mask)), mask)


def xts_decrypt_sector(params: SectorCipherParams, ciphertext: bytes) -> bytes:
    _check(ciphertext)
    mask = _mask(params, len(ciphertext) // BLOCK_SIZE)
    return _xor(_ecb(params.k1, _xor(ciphertext, mask), decrypt=True), mask)
