import os
import random

import pytest
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes
from hypothesis import given, settings, strategies as st

from conftest import load_ieee, load_rsp
from sdms.analysis import monobit_statistic
from sdms.cipher import (
    SectorCipherParams,
    gf128_mul_alpha,
    sector_tweak,
    xts_decrypt_sector,
    xts_encrypt_sector,
)
from sdms.errors import ContractError

MODULUS = (1 << 128) | (1 << 7) | (1 << 2) | (1 << 1) | 1


def clmul(a, b):
    """Carry-less product of two polynomials over GF(2)."""
    out = 0
    while b:
        if b & 1:
            out ^= a
        a <<= 1
        b >>= 1
    return out


def poly_mod(a, m=MODULUS):
    deg = m.bit_length() - 1
    while a.bit_length() - 1 >= deg:
        a ^= m << (a.bit_length() - 1 - deg)
    return a


def naive_mul(a, b):
    return poly_mod(clmul(a, b))


def test_mul_alpha_zero():
    assert gf128_mul_alpha(0) == 0


def test_mul_alpha_one():
    assert gf128_mul_alpha(1) == 2


def test_mul_alpha_top_bit_reduces():
    x = (1 << 127) | 0x1234
    assert gf128_mul_alpha(x) == ((x << 1) & ((1 << 128) - 1)) ^ 0x87
    assert gf128_mul_alpha(1 << 127) == 0x87


def test_mul_alpha_agrees_with_naive_oracle():
    rng = random.Random(1619)
    mismatches = 0
    for _ in range(10_000):
        x = rng.getrandbits(128)
        if gf128_mul_alpha(x) != naive_mul(x, 2):
            mismatches += 1
    assert mismatches == 0


def test_repeated_alpha_matches_power():
    rng = random.Random(7)
    x = rng.getrandbits(128)
    alpha_pow = 1
    y = x
    for _ in range(40):
        y = gf128_mul_alpha(y)
        alpha_pow = naive_mul(alpha_pow, 2)
    assert y == naive_mul(x, alpha_pow)


def _nist_params(record):
    key = bytes.fromhex(record["Key"])
    if "DataUnitSeqNumber" in record:
        tweak = int(record["DataUnitSeqNumber"]).to_bytes(16, "little")
    else:
        tweak = bytes.fromhex(record["i"])
    return SectorCipherParams(key[:32], key[32:], tweak)


@pytest.mark.parametrize(
    "name", ["XTSGenAES256_dataunitseqno.rsp", "XTSGenAES256_128hexstr.rsp"]
)
def test_nist_xtsvs_vectors(name):
    cases = load_rsp(name)
    assert len(cases) == 600
    for direction, rec in cases:
        params = _nist_params(rec)
        pt, ct = bytes.fromhex(rec["PT"]), bytes.fromhex(rec["CT"])
        if direction == "encrypt":
            assert xts_encrypt_sector(params, pt) == ct, rec["COUNT"]
        else:
            assert xts_decrypt_sector(params, ct) == pt, rec["COUNT"]


@pytest.mark.parametrize("case", load_ieee(), ids=lambda c: "vector" + c["vector"])
def test_ieee1619_vectors_both_directions(case):
    params = SectorCipherParams(
        bytes.fromhex(case["key1"]),
        bytes.fromhex(case["key2"]),
        int(case["dusn"], 16).to_bytes(16, "little"),
    )
    pt, ct = bytes.fromhex(case["ptx"]), bytes.fromhex(case["ctx"])
    assert xts_encrypt_sector(params, pt) == ct
    assert xts_decrypt_sector(params, ct) == pt


def test_agrees_with_openssl_xts():
    for _ in range(200):
        rtek = os.urandom(64)
        index = int.from_bytes(os.urandom(8), "little")
        params = SectorCipherParams.from_rtek(rtek, index)
        pt = os.urandom(512)
        enc = Cipher(algorithms.AES(rtek), modes.XTS(sector_tweak(index))).encryptor()
        assert xts_encrypt_sector(params, pt) == enc.update(pt) + enc.finalize()


def test_from_rtek_slices_keys():
    rtek = bytes(range(64))
    params = SectorCipherParams.from_rtek(rtek, 258)
    assert params.k1 + params.k2 == rtek
    assert params.tweak == (258).to_bytes(2, "little") + bytes(14)


def test_roundtrip_random_cases():
    for _ in range(1000):
        params = SectorCipherParams.from_rtek(os.urandom(64), int.from_bytes(os.urandom(8), "little"))
        pt = os.urandom(512)
        assert xts_decrypt_sector(params, xts_encrypt_sector(params, pt)) == pt


@given(
    rtek=st.binary(min_size=64, max_size=64),
    index=st.integers(0, 2**64 - 1),
    blocks=st.integers(1, 256),
    data=st.data(),
)
@settings(max_examples=200)
def test_roundtrip_property(rtek, index, blocks, data):
    pt = data.draw(st.binary(min_size=16 * blocks, max_size=16 * blocks))
    params = SectorCipherParams.from_rtek(rtek, index)
    ct = xts_encrypt_sector(params, pt)
    assert len(ct) == len(pt)
    assert xts_decrypt_sector(params, ct) == pt


def test_tweak_changes_every_block():
    for _ in range(200):
        rtek = os.urandom(64)
        n = int.from_bytes(os.urandom(7), "little")
        pt = os.urandom(512)
        a = xts_encrypt_sector(SectorCipherParams.from_rtek(rtek, n), pt)
        b = xts_encrypt_sector(SectorCipherParams.from_rtek(rtek, n + 1), pt)
        assert all(a[j:j + 16] != b[j:j + 16] for j in range(0, 512, 16))


def test_block_independence():
    params = SectorCipherParams.from_rtek(os.urandom(64), 99)
    pt = bytearray(os.urandom(512))
    ct = xts_encrypt_sector(params, bytes(pt))
    for i in range(32):
        changed = bytearray(pt)
        changed[16 * i] ^= 0x01
        ct2 = xts_encrypt_sector(params, bytes(changed))
        diff = [j for j in range(32) if ct[16 * j:16 * j + 16] != ct2[16 * j:16 * j + 16]]
        assert diff == [i]


def test_zero_ciphertext_decrypts_to_noise():
    pooled = b"".join(
        xts_decrypt_sector(SectorCipherParams.from_rtek(os.urandom(64), i), bytes(512))
        for i in range(64)
    )
    assert abs(monobit_statistic(pooled)) <= 3.0


@pytest.mark.parametrize("size", [0, 15, 511, 513])
def test_wrong_length_rejected(size):
    params = SectorCipherParams.from_rtek(os.urandom(64), 0)
    with pytest.raises(ContractError):
        xts_encrypt_sector(params, bytes(size))
    with pytest.raises(ContractError):
        xts_decrypt_sector(params, bytes(size))


def test_bad_params_rejected():
    with pytest.raises(ContractError):
        SectorCipherParams(bytes(32), bytes(16), bytes(16))
    with pytest.raises(ContractError):
        SectorCipherParams(bytes(32), bytes(32), bytes(8))
    with pytest.raises(ContractError):
        SectorCipherParams.from_rtek(bytes(32), 0)
