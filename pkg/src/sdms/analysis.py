"""Attack-cost calculators and property campaigns.

Costs are log2 exponents kept as exact integers. Campaigns exercise a
live container and report what they observed.
"""

import math
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from .errors import CampaignFailure, ConfigurationError, ContractError
from .kdf import INDEX_BITS, RTEK_LENGTH, dk_func

MONOBIT_SIGMA = 3.0
CHI2_MIN_P = 0.001
# expected count per byte value below which chi-square is not meaningful
CHI2_MIN_EXPECTED = 5


def _positive(*values):
    for v in values:
        if not isinstance(v, int) or v <= 0:
            raise ConfigurationError(f"expected a positive integer, got {v!r}")


def sector_attack_work(rtek_bits: int) -> int:
    """log2 of the EA trials needed to brute-force one sector key."""
    _positive(rtek_bits)
    return rtek_bits


def dek_search_space(dek_bits: int) -> int:
    _positive(dek_bits)
    return dek_bits


def dek_candidate_count(dek_bits: int, rtek_bits: int) -> int:
    """log2 of the DEKs consistent with one recovered sector key."""
    _positive(dek_bits, rtek_bits)
    if dek_bits <= rtek_bits:
        raise ConfigurationError("DEK must be longer than the sector key")
    return dek_bits - rtek_bits


def cross_sector_success_exponent(dek_bits, rtek_bits, index_bits, seed_bits) -> int:
    """Decrypting a second sector with a DEK candidate succeeds with probability 2^-result."""
    _positive(index_bits, seed_bits)
    return dek_candidate_count(dek_bits, rtek_bits) + index_bits + seed_bits


@dataclass(frozen=True)
class AttackCostReport:
    sector_attack_work_log2: int
    dek_space_log2: int
    dek_candidate_count_log2: int
    cross_sector_success_exponent: int

    @classmethod
    def for_config(cls, dek_bits, rtek_bits=RTEK_LENGTH * 8, index_bits=INDEX_BITS, seed_bits=128):
        return cls(
            sector_attack_work_log2=sector_attack_work(rtek_bits),
            dek_space_log2=dek_search_space(dek_bits),
            dek_candidate_count_log2=dek_candidate_count(dek_bits, rtek_bits),
            cross_sector_success_exponent=cross_sector_success_exponent(
                dek_bits, rtek_bits, index_bits, seed_bits
            ),
        )

    def to_dict(self):
        return asdict(self)

    def to_text(self):
        return "\n".join(
            [
                f"sector key search:     W_EA x 2^{self.sector_attack_work_log2}",
                f"DEK search space:      2^{self.dek_space_log2}",
                f"DEK candidates/RTEK:   2^{self.dek_candidate_count_log2}",
                f"next-sector success:   2^-{self.cross_sector_success_exponent}",
            ]
        )


class RecordingSource:
    """Wraps a randomness source and keeps every output for later replay."""

    def __init__(self, source=os.urandom):
        self._source = source
        self.transcript = []

    def __call__(self, n):
        out = self._source(n)
        self.transcript.append(out)
        return out


class ReplaySource:
    """Serves a recorded transcript back, one output per call."""

    def __init__(self, transcript):
        self._items = list(transcript)
        self._pos = 0

    def __call__(self, n):
        if self._pos >= len(self._items):
            raise ContractError("randomness transcript exhausted")
        out = self._items[self._pos]
        self._pos += 1
        if len(out) != n:
            raise ContractError(f"transcript entry has {len(out)} bytes, {n} requested")
        return out


def _collisions(values):
    first = {}
    pairs = []
    for i, v in enumerate(values):
        if v in first:
            pairs.append((first[v], i))
        else:
            first[v] = i
    return pairs


@dataclass
class TemporalReport:
    sector_index: int
    trials: int
    seed_collisions: list = field(default_factory=list)
    ciphertext_collisions: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.seed_collisions and not self.ciphertext_collisions

    def to_dict(self):
        return {
            "sector_index": self.sector_index,
            "trials": self.trials,
            "seed_collisions": len(self.seed_collisions),
            "ciphertext_collisions": len(self.ciphertext_collisions),
            "passed": self.passed,
        }

    def to_text(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"temporal campaign [{status}]: sector {self.sector_index}, {self.trials} rewrites, "
            f"{len(self.seed_collisions)} seed collisions, "
            f"{len(self.ciphertext_collisions)} ciphertext collisions"
        )


def run_temporal_campaign(device, sector_index, trials, plaintext=None, source=None):
    """Rewrite one sector ``trials`` times with fixed content and check the
    persisted seeds and ciphertexts are pairwise distinct.

    ``source`` temporarily replaces the device's seed source, e.g. with a
    ReplaySource for reproducing an earlier run.
    """
    if trials < 2:
        raise ContractError("trials must be at least 2")
    if plaintext is None:
        plaintext = bytes(device.sector_size)
    seeds, ciphertexts = [], []
    saved = device.random_source
    if source is not None:
        device.random_source = source
    try:
        for _ in range(trials):
            device.write_sector(sector_index, plaintext)
            seeds.append(device.read_seed(sector_index))
            ciphertexts.append(device.read_ciphertext(sector_index))
    finally:
        device.random_source = saved
    report = TemporalReport(
        sector_index=sector_index,
        trials=trials,
        seed_collisions=_collisions(seeds),
        ciphertext_collisions=_collisions(ciphertexts),
    )
    if not report.passed:
        raise CampaignFailure(
            f"repeated writes collided at trials {report.seed_collisions + report.ciphertext_collisions}",
            report,
        )
    return report


def min_pairwise_hamming(keys):
    """Smallest Hamming distance between any two equal-length byte strings."""
    if len(keys) < 2:
        raise ContractError("need at least two keys")
    bits = np.unpackbits(np.frombuffer(b"".join(keys), dtype=np.uint8).reshape(len(keys), -1), axis=1)
    a = bits.astype(np.float32)
    weight = a.sum(axis=1)
    best = bits.shape[1]
    chunk = 1024
    for lo in range(0, len(keys) - 1, chunk):
        hi = min(lo + chunk, len(keys))
        # |x ^ y| = |x| + |y| - 2 x.y, exact in float32 for these sizes
        dist = weight[lo:hi, None] + weight[None, :] - 2.0 * (a[lo:hi] @ a.T)
        rows = np.arange(lo, hi)[:, None]
        dist[np.arange(len(keys))[None, :] <= rows] = np.inf
        best = min(best, int(dist.min()))
    return best


@dataclass
class SpatialReport:
    samples: int
    collisions: list = field(default_factory=list)
    min_hamming_distance: int = 0
    rtek_bits: int = RTEK_LENGTH * 8

    @property
    def passed(self):
        return not self.collisions

    def to_dict(self):
        return {
            "samples": self.samples,
            "rtek_collisions": len(self.collisions),
            "min_hamming_distance": self.min_hamming_distance,
            "passed": self.passed,
        }

    def to_text(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"spatial campaign [{status}]: {self.samples} (seed, index) samples, "
            f"{len(self.collisions)} key collisions, "
            f"min Hamming distance {self.min_hamming_distance}/{self.rtek_bits} bits"
        )


def run_spatial_campaign(dek, sample_count, seed_size=16, source=None):
    """Derive sector keys for random seeds at distinct random indices under
    one DEK and check they are pairwise distinct."""
    if sample_count < 2:
        raise ContractError("sample_count must be at least 2")
    source = source or os.urandom
    indices = []
    seen = set()
    draws = 0
    while len(indices) < sample_count:
        draws += 1
        if draws > 4 * sample_count:
            raise CampaignFailure(
                "randomness source keeps repeating sector indices",
                SpatialReport(samples=len(indices)),
            )
        i = int.from_bytes(source(8), "little")
        if i not in seen:
            seen.add(i)
            indices.append(i)
    keys = [dk_func(dek, source(seed_size), i) for i in indices]
    report = SpatialReport(
        samples=sample_count,
        collisions=_collisions(keys),
        min_hamming_distance=min_pairwise_hamming(keys),
    )
    if not report.passed:
        raise CampaignFailure(f"sector keys collided at samples {report.collisions}", report)
    return report


def monobit_statistic(data: bytes) -> float:
    """(ones - zeros) / sqrt(n); approximately standard normal for fair bits."""
    bits = np.unpackbits(np.frombuffer(data, dtype=np.uint8))
    n = bits.size
    if n == 0:
        raise ContractError("no data")
    ones = int(bits.sum())
    return (2 * ones - n) / math.sqrt(n)


def byte_chi_square(data: bytes):
    """Chi-square statistic and p-value of byte frequencies against uniform."""
    counts = np.bincount(np.frombuffer(data, dtype=np.uint8), minlength=256)
    result = stats.chisquare(counts)
    return float(result.statistic), float(result.pvalue)


@dataclass
class SeedScanReport:
    seed_bytes: int
    monobit: float
    chi_square: float = None
    chi_square_p: float = None

    @property
    def monobit_passed(self):
        return abs(self.monobit) <= MONOBIT_SIGMA

    @property
    def chi_square_passed(self):
        # None means too little data to judge
        if self.chi_square_p is None:
            return None
        return self.chi_square_p > CHI2_MIN_P

    @property
    def passed(self):
        return self.monobit_passed and self.chi_square_passed is not False

    def to_dict(self):
        return {
            "seed_bytes": self.seed_bytes,
            "monobit": self.monobit,
            "monobit_passed": self.monobit_passed,
            "chi_square": self.chi_square,
            "chi_square_p": self.chi_square_p,
            "chi_square_passed": self.chi_square_passed,
            "passed": self.passed,
        }

    def to_text(self):
        status = "PASS" if self.passed else "FAIL"
        lines = [
            f"seed scan [{status}]: {self.seed_bytes} seed bytes",
            f"  monobit z = {self.monobit:+.3f} (|z| <= {MONOBIT_SIGMA})",
        ]
        if self.chi_square_p is None:
            lines.append("  byte chi-square: skipped, too few bytes")
        else:
            lines.append(
                f"  byte chi-square = {self.chi_square:.1f}, p = {self.chi_square_p:.4f} (p > {CHI2_MIN_P})"
            )
        return "\n".join(lines)


def seed_entropy_scan(device) -> SeedScanReport:
    pooled = b"".join(device.read_seed(i) for i in range(device.total_sectors))
    report = SeedScanReport(seed_bytes=len(pooled), monobit=monobit_statistic(pooled))
    if len(pooled) >= 256 * CHI2_MIN_EXPECTED:
        report.chi_square, report.chi_square_p = byte_chi_square(pooled)
    return report
