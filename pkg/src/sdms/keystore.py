"""DEK generation and password-based wrapping.

The wrapping key is PBKDF2-HMAC-SHA-256 over the passphrase; the DEK is
sealed with AES-256-GCM under it.
"""

import hashlib
import os
import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .errors import AuthenticationError, ContractError, FormatError
from .kdf import MAX_DEK_LENGTH, MIN_DEK_LENGTH

DEFAULT_ITERATIONS = 600_000
SALT_SIZE = 16
NONCE_SIZE = 12
TAG_SIZE = 16
KEYFILE_MAGIC = b"SDMSKEY1"
KEYFILE_VERSION = 1
_AAD = b"SDMS-WRAP1"

randbytes = os.urandom


@dataclass(frozen=True)
class WrappedDek:
    kdf_salt: bytes
    kdf_iterations: int
    wrap_nonce: bytes
    wrapped_bytes: bytes

    @property
    def dek_length(self) -> int:
        return len(self.wrapped_bytes) - TAG_SIZE

    def to_bytes(self) -> bytes:
        """Fields in declared order, each prefixed by its u16 LE length."""
        fields = (
            self.kdf_salt,
            struct.pack("<I", self.kdf_iterations),
            self.wrap_nonce,
            self.wrapped_bytes,
        )
        return b"".join(struct.pack("<H", len(f)) + f for f in fields)

    @classmethod
    def from_bytes(cls, data: bytes) -> "WrappedDek":
        fields = []
        pos = 0
        for _ in range(4):
            if pos + 2 > len(data):
                raise FormatError("truncated wrapped DEK")
            (n,) = struct.unpack_from("<H", data, pos)
            pos += 2
            if pos + n > len(data):
                raise FormatError("truncated wrapped DEK")
            fields.append(bytes(data[pos:pos + n]))
            pos += n
        if pos != len(data):
            raise FormatError("trailing bytes after wrapped DEK")
        salt, iters, nonce, wrapped = fields
        if len(iters) != 4 or len(nonce) != NONCE_SIZE or len(wrapped) <= TAG_SIZE:
            raise FormatError("malformed wrapped DEK fields")
        (iterations,) = struct.unpack("<I", iters)
        if iterations <= 0:
            raise FormatError("kdf_iterations must be positive")
        return cls(salt, iterations, nonce, wrapped)


def generate_dek(length_bytes: int = 256) -> bytes:
    if not MIN_DEK_LENGTH <= length_bytes <= MAX_DEK_LENGTH:
        raise ContractError(
            f"DEK length must be in [{MIN_DEK_LENGTH}, {MAX_DEK_LENGTH}] bytes, got {length_bytes}"
        )
    return randbytes(length_bytes)


def _wrapping_key(passphrase, salt, iterations):
    if isinstance(passphrase, str):
        passphrase = passphrase.encode("utf-8")
    return hashlib.pbkdf2_hmac("sha256", passphrase, salt, iterations, 32)


def wrap_dek(dek: bytes, passphrase, iterations: int = DEFAULT_ITERATIONS) -> WrappedDek:
    if not passphrase:
        raise ContractError("passphrase must not be empty")
    if iterations <= 0 or iterations >= 1 << 32:
        raise ContractError("iterations must fit in a positive u32")
    salt = randbytes(SALT_SIZE)
    nonce = randbytes(NONCE_SIZE)
    key = _wrapping_key(passphrase, salt, iterations)
    sealed = AESGCM(key).encrypt(nonce, bytes(dek), _AAD)
    return WrappedDek(salt, iterations, nonce, sealed)


def unwrap_dek(wrapped: WrappedDek, passphrase) -> bytes:
    key = _wrapping_key(passphrase or b"", wrapped.kdf_salt, wrapped.kdf_iterations)
    try:
        return AESGCM(key).decrypt(wrapped.wrap_nonce, wrapped.wrapped_bytes, _AAD)
    except InvalidTag:
        raise AuthenticationError("wrong passphrase or corrupted keystore") from None


def rewrap_dek(wrapped: WrappedDek, old_passphrase, new_passphrase, iterations=None) -> WrappedDek:
    dek = unwrap_dek(wrapped, old_passphrase)
    return wrap_dek(dek, new_passphrase, iterations or wrapped.kdf_iterations)


def keyfile_bytes(wrapped: WrappedDek) -> bytes:
    return KEYFILE_MAGIC + struct.pack("<H", KEYFILE_VERSION) + wrapped.to_bytes()


def parse_keyfile(data: bytes) -> WrappedDek:
    if data[:8] != KEYFILE_MAGIC:
        raise FormatError("not an SDMS keyfile (bad magic)")
    if len(data) < 10:
        raise FormatError("truncated keyfile")
    (version,) = struct.unpack_from("<H", data, 8)
    if version != KEYFILE_VERSION:
        raise FormatError(f"unsupported keyfile version {version}")
    return WrappedDek.from_bytes(data[10:])


def keyfile_fingerprint(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def write_keyfile(path, wrapped: WrappedDek) -> bytes:
    """Write the keyfile atomically and return its fingerprint."""
    data = keyfile_bytes(wrapped)
    tmp = f"{os.fspath(path)}.tmp"
    fd = os.open(tmp, os.O_WRONLY | os.O_CREAT | os.O_TRUNC, 0o600)
    try:
        os.write(fd, data)
        os.fsync(fd)
    finally:
        os.close(fd)
    os.replace(tmp, path)
    return keyfile_fingerprint(data)


def read_keyfile(path):
    with open(path, "rb") as f:
        data = f.read()
    return parse_keyfile(data), keyfile_fingerprint(data)
