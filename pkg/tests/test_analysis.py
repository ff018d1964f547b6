import os
import random
from itertools import combinations

import pytest

from sdms import analysis
from sdms.analysis import (
    AttackCostReport,
    RecordingSource,
    ReplaySource,
    cross_sector_success_exponent,
    dek_candidate_count,
    dek_search_space,
    min_pairwise_hamming,
    run_spatial_campaign,
    run_temporal_campaign,
    sector_attack_work,
    seed_entropy_scan,
)
from sdms.errors import CampaignFailure, ConfigurationError, ContractError


@pytest.mark.parametrize("bits, expected", [(512, 512), (1, 1), (256, 256)])
def test_sector_attack_work(bits, expected):
    assert sector_attack_work(bits) == expected


@pytest.mark.parametrize("args, expected", [((2048, 512), 1536), ((513, 512), 1), ((1024, 512), 512)])
def test_dek_candidate_count(args, expected):
    assert dek_candidate_count(*args) == expected


@pytest.mark.parametrize(
    "args, expected",
    [((2048, 512, 32, 64), 1632), ((2048, 512, 32, 128), 1696), ((513, 512, 1, 1), 3)],
)
def test_cross_sector_exponent(args, expected):
    assert cross_sector_success_exponent(*args) == expected


def test_dek_search_space():
    assert dek_search_space(2048) == 2048


@pytest.mark.parametrize(
    "call",
    [
        lambda: dek_candidate_count(512, 512),
        lambda: dek_candidate_count(256, 512),
        lambda: sector_attack_work(0),
        lambda: cross_sector_success_exponent(2048, 512, 0, 64),
        lambda: sector_attack_work(512.0),
    ],
)
def test_calculator_preconditions(call):
    with pytest.raises(ConfigurationError):
        call()


def test_calculators_stay_exact_for_huge_exponents():
    r = AttackCostReport.for_config(dek_bits=8192, seed_bits=4096)
    assert r.cross_sector_success_exponent == 8192 - 512 + 64 + 4096
    assert all(isinstance(v, int) for v in r.to_dict().values())


def test_cost_report_fields_and_text():
    r = AttackCostReport.for_config(dek_bits=2048, rtek_bits=512, index_bits=32, seed_bits=64)
    assert r.to_dict() == {
        "sector_attack_work_log2": 512,
        "dek_space_log2": 2048,
        "dek_candidate_count_log2": 1536,
        "cross_sector_success_exponent": 1632,
    }
    text = r.to_text()
    assert "2^512" in text and "2^2048" in text and "2^1536" in text and "2^-1632" in text
    assert r == AttackCostReport.for_config(dek_bits=2048, rtek_bits=512, index_bits=32, seed_bits=64)


def test_min_pairwise_hamming_matches_brute_force():
    rng = random.Random(3)
    for n, size in ((2, 64), (17, 8), (300, 64), (1100, 4)):
        keys = [rng.randbytes(size) for _ in range(n)]
        brute = min(
            bin(int.from_bytes(a, "big") ^ int.from_bytes(b, "big")).count("1")
            for a, b in combinations(keys, 2)
        )
        assert min_pairwise_hamming(keys) == brute


def test_min_pairwise_hamming_duplicates():
    assert min_pairwise_hamming([b"\x01" * 8, b"\x02" * 8, b"\x01" * 8]) == 0


def test_temporal_campaign_passes(make_container):
    d = make_container()
    report = run_temporal_campaign(d, 10, 50)
    assert report.passed and report.trials == 50
    assert "PASS" in report.to_text()
    assert report.to_dict()["seed_collisions"] == 0


def test_temporal_campaign_detects_stuck_source(make_container):
    d = make_container()
    with pytest.raises(CampaignFailure) as exc:
        run_temporal_campaign(d, 10, 5, source=lambda n: b"\x07" * n)
    report = exc.value.report
    assert not report.passed
    assert report.seed_collisions[0] == (0, 1)
    assert len(report.ciphertext_collisions) == 4
    # the device's own source is restored
    assert d.random_source is not None and d.random_source(16) != b"\x07" * 16


def test_temporal_campaign_replays_from_transcript(make_container):
    d = make_container()
    recorder = RecordingSource()
    run_temporal_campaign(d, 4, 20, source=recorder)
    first = [d.read_ciphertext(4)]
    assert len(recorder.transcript) == 20
    run_temporal_campaign(d, 4, 20, source=ReplaySource(recorder.transcript))
    assert d.read_ciphertext(4) == first[0]


def test_temporal_campaign_requires_two_trials(make_container):
    with pytest.raises(ContractError):
        run_temporal_campaign(make_container(), 0, 1)


def test_spatial_campaign():
    report = run_spatial_campaign(os.urandom(256), 500)
    assert report.passed
    assert report.min_hamming_distance > 160
    assert report.to_dict()["rtek_collisions"] == 0


def test_spatial_campaign_is_reproducible():
    dek = os.urandom(256)
    rec = RecordingSource()
    a = run_spatial_campaign(dek, 50, source=rec)
    b = run_spatial_campaign(dek, 50, source=ReplaySource(rec.transcript))
    assert a.min_hamming_distance == b.min_hamming_distance


def test_replay_source_exhaustion():
    src = ReplaySource([b"ab"])
    assert src(2) == b"ab"
    with pytest.raises(ContractError):
        src(2)
    with pytest.raises(ContractError):
        ReplaySource([b"abc"])(2)


def test_monobit_statistic():
    assert analysis.monobit_statistic(b"\x0f" * 100) == 0
    assert analysis.monobit_statistic(b"\xff" * 4) == pytest.approx(32 / 32**0.5)


def test_seed_scan_on_fresh_container(make_container):
    d = make_container(total_data_sectors=1024)
    report = seed_entropy_scan(d)
    assert report.seed_bytes == 1024 * 16
    assert report.passed, report.to_text()
    assert report.chi_square_p is not None


def test_seed_scan_skips_chi_square_for_small_containers(make_container):
    report = seed_entropy_scan(make_container(total_data_sectors=8))
    assert report.chi_square_p is None and report.chi_square_passed is None
    assert "skipped" in report.to_text()


def test_seed_scan_reports_bad_seeds_without_raising(make_container):
    counter = iter(range(10**6))
    d = make_container(
        total_data_sectors=256, random_source=lambda n: bytes([next(counter) % 4]) * n
    )
    report = seed_entropy_scan(d)
    assert not report.passed
    assert "FAIL" in report.to_text()


def test_spatial_campaign_stuck_source_fails_fast():
    with pytest.raises(CampaignFailure):
        run_spatial_campaign(os.urandom(256), 10, source=lambda n: bytes(n))
