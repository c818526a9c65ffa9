import csv
import logging
import math
import os
from dataclasses import replace
from pathlib import Path
from unittest.mock import patch

import numpy as np
import pytest
from scipy.stats import binomtest

from rmperm.config import load_sim_config
from rmperm.exceptions import ArgumentError, ConfigurationError
from rmperm.permdec import ETConfig
from rmperm.rmcodes import rm_code
from rmperm.sc_core import Kernel
from rmperm.simharness import (
    CSV_HEADER,
    ChannelSection,
    CodeSection,
    DecoderKind,
    DecoderSection,
    RunSection,
    SimConfig,
    SimRecord,
    SnrConvention,
    SnrGrid,
    StoppingSection,
    ThresholdSection,
    TrialOutcome,
    TrialPlan,
    awgn_llrs,
    read_llrs,
    run_bler,
    run_gain_sweep,
    run_trial,
    snr_to_sigma2,
    write_csv,
)
from rmperm.threshold import ThresholdMethod
from rmperm.types import ABORTED_METRIC, KernelCounters

PRESETS = Path(__file__).parents[1] / "presets"


@pytest.fixture
def small_config():
    return SimConfig(
        code=CodeSection(m=4, r=2),
        decoder=DecoderSection(list_size=4),
        channel=ChannelSection(snr_db=SnrGrid("1:1:2"), convention=SnrConvention.ES_N0),
        threshold=ThresholdSection(method=ThresholdMethod.CLT),
        stopping=StoppingSection(min_errors=1000, max_trials=12, trials=8),
        run=RunSection(seed=7),
    )


def _rows(records):
    return [(record.technique, *record.as_row()) for record in records]


def test_snr_to_sigma2_conventions():
    assert snr_to_sigma2(0.0, SnrConvention.ES_N0) == 0.5
    assert snr_to_sigma2(0.0, SnrConvention.SNR) == 1.0
    assert snr_to_sigma2(0.0, SnrConvention.EB_N0, rate=0.5) == 1.0
    assert snr_to_sigma2(10.0, SnrConvention.EB_N0, rate=0.25) == pytest.approx(0.2)
    with pytest.raises(ArgumentError):
        snr_to_sigma2(1.0, SnrConvention.EB_N0, rate=0.0)


@pytest.mark.parametrize(
    ("alias", "convention"),
    [
        ("EbN0", SnrConvention.EB_N0),
        ("Es/N0", SnrConvention.ES_N0),
        ("es_n0", SnrConvention.ES_N0),
        ("SNR", SnrConvention.SNR),
    ],
)
def test_snr_convention_aliases(alias, convention):
    assert SnrConvention(alias) is convention


def test_snr_convention_rejects_unknown():
    with pytest.raises(ValueError):
        SnrConvention("ebno_db")


def test_snr_grid_parsing():
    grid = SnrGrid("-4:0.25:1.25")
    assert len(grid) == 22
    assert grid[0] == -4.0
    assert grid[-1] == 1.25
    assert SnrGrid("0:0.5:1") == (0.0, 0.5, 1.0)
    assert SnrGrid("1.5, 2") == (1.5, 2.0)
    assert SnrGrid("[1, 2.5]") == (1.0, 2.5)
    assert SnrGrid([3, 4]) == (3.0, 4.0)


@pytest.mark.parametrize("text", ["1:0:2", "2:1:1", "", "a:b:c", "1,nan", "1,x", "[1,"])
def test_snr_grid_rejects_malformed_points(text):
    with pytest.raises(ArgumentError):
        SnrGrid(text)


def test_awgn_llrs_noiseless(rng):
    llrs = awgn_llrs(np.array([0, 1]), 0.5, rng, noiseless=True)
    assert list(llrs) == [4.0, -4.0]


def test_awgn_llrs_statistics(rng):
    llrs = awgn_llrs(np.zeros(200_000, dtype=np.uint8), 0.5, rng)
    assert llrs.mean() == pytest.approx(4.0, abs=0.05)
    assert llrs.var() == pytest.approx(8.0, rel=0.02)
    with pytest.raises(ArgumentError):
        awgn_llrs(np.zeros(4), 0.0, rng)


def test_sim_record_statistics():
    record = SimRecord(
        snr_db=1.0, trials=4, block_errors=1, fplus=40, fminus=40, reference_ops=160
    )
    assert record.bler == 0.25
    assert record.avg_fplus == 10.0
    assert record.gain == 2.0
    assert record.as_row() == ["1", "4", "1", "0.25", "10", "10", "2"]
    assert SimRecord(snr_db=0.0).gain == 1.0


def test_run_trial_is_reproducible():
    plan = TrialPlan(
        spec=rm_code(4, 2),
        decoder=DecoderKind.PERM,
        list_size=4,
        et_config=ETConfig(),
        threshold=ABORTED_METRIC,
        sigma2=0.8,
        all_zero=False,
        parallel=False,
        kernel=Kernel.MIN_SUM,
        seed=3,
        point_index=1,
    )
    assert run_trial(plan, 5) == run_trial(plan, 5)
    assert plan.reference_ops == 4 * 16 * 4


def test_run_bler_without_early_termination(small_config):
    records = run_bler(small_config)
    assert [record.snr_db for record in records] == [1.0, 2.0]
    for record in records:
        assert record.trials == 12
        assert record.technique == "none"
        assert record.threshold is None
        assert record.gain == 1.0
        assert record.avg_fplus == record.avg_fminus == 4 * 8 * 4


def test_run_bler_is_deterministic(small_config):
    assert _rows(run_bler(small_config)) == _rows(run_bler(small_config))


def test_run_bler_independent_of_workers(small_config):
    pooled = replace(small_config, run=RunSection(seed=7, workers=2, chunk=2))
    assert _rows(run_bler(pooled)) == _rows(run_bler(small_config))


def test_run_bler_stops_at_min_errors(small_config):
    config = replace(
        small_config,
        channel=ChannelSection(snr_db=SnrGrid("-6"), convention=SnrConvention.ES_N0),
        stopping=StoppingSection(min_errors=2, max_trials=500),
    )
    (record,) = run_bler(config)
    assert record.block_errors == 2
    assert record.trials < 500


def test_branch_and_bound_keeps_error_rate(small_config):
    plain = run_bler(small_config)
    bounded = run_bler(
        replace(small_config, early_termination=ETConfig(branch_bound=True))
    )
    for reference, record in zip(plain, bounded):
        assert record.technique == "bb"
        assert record.block_errors == reference.block_errors
        assert record.gain >= 1.0


def test_run_bler_with_snr_threshold(small_config):
    records = run_bler(
        replace(small_config, early_termination=ETConfig(snr_target=1e-3))
    )
    for record in records:
        assert record.technique == "snr"
        assert record.threshold is not None and record.threshold < 0
        assert record.trials == 12


def test_parallel_decoding_keeps_error_rate(small_config):
    config = replace(small_config, early_termination=ETConfig(snr_target=1e-3))
    lockstep = replace(config, decoder=DecoderSection(list_size=4, parallel=True))
    expected = [record.block_errors for record in run_bler(config)]
    assert [record.block_errors for record in run_bler(lockstep)] == expected


@pytest.mark.parametrize("kind", [DecoderKind.SCL, DecoderKind.SC])
def test_baseline_decoders_report_unit_gain(small_config, kind):
    config = replace(small_config, decoder=DecoderSection(kind=kind, list_size=4))
    for record in run_bler(config):
        assert record.gain == 1.0


def test_early_termination_ignored_for_baselines(small_config, caplog):
    config = replace(
        small_config,
        decoder=DecoderSection(kind=DecoderKind.SC),
        early_termination=ETConfig(repetition=2),
    )
    with caplog.at_level(logging.WARNING):
        config.validate()
    assert "only applies to the permutation decoder" in caplog.text


def test_gain_sweep_isolates_techniques(small_config):
    et_config = ETConfig(branch_bound=True, repetition=2)
    config = replace(small_config, early_termination=et_config)
    records = run_gain_sweep(config)
    assert [record.technique for record in records] == ["bb", "bb", "rep", "rep"]
    assert all(record.trials == 8 for record in records)
    assert all(record.gain >= 1.0 for record in records)


def test_gain_sweep_without_techniques(small_config):
    records = run_gain_sweep(small_config)
    assert [record.technique for record in records] == ["none", "none"]
    assert all(record.gain == 1.0 for record in records)


def test_validate_rejects_inconsistent_config(small_config):
    with pytest.raises(ConfigurationError):
        replace(small_config, decoder=DecoderSection(list_size=0)).validate()
    with pytest.raises(ConfigurationError):
        replace(small_config, code=CodeSection(m=4, r=5)).validate()
    with pytest.raises(ConfigurationError):
        replace(
            small_config,
            decoder=DecoderSection(parallel=True),
            early_termination=ETConfig(branch_bound=True),
        ).validate()


def test_interrupt_keeps_gathered_points(small_config):
    outcome = TrialOutcome(error=False, ops=KernelCounters(10, 10), reference_ops=40)
    outcomes = [outcome, outcome, KeyboardInterrupt]
    with patch("rmperm.simharness.run_trial", side_effect=outcomes):
        records = run_bler(small_config)
    assert len(records) == 1
    assert records[0].trials == 2
    assert records[0].gain == 2.0


def test_write_csv(tmp_path):
    records = [
        SimRecord(1.0, 10, block_errors=3, fplus=50, fminus=50, reference_ops=200),
        SimRecord(1.5, 10, block_errors=0, fplus=40, fminus=40, reference_ops=200),
    ]
    path = write_csv(records, tmp_path / "bler.csv")
    with path.open(newline="") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == CSV_HEADER
    assert rows[1] == ["1", "10", "3", "0.3", "5", "5", "2"]
    assert rows[2] == ["1.5", "10", "0", "0", "4", "4", "2.5"]


def test_read_llrs(llr_file):
    path = llr_file([1.5, -2.0, 0.25, 3.0])
    assert list(read_llrs(path, 4)) == [1.5, -2.0, 0.25, 3.0]
    with pytest.raises(ArgumentError):
        read_llrs(path, 8)


def test_read_llrs_rejects_bad_files(tmp_path):
    with pytest.raises(ArgumentError):
        read_llrs(tmp_path / "missing.txt")
    malformed = tmp_path / "malformed.txt"
    malformed.write_text("1.0 abc\n")
    with pytest.raises(ArgumentError):
        read_llrs(malformed)
    infinite = tmp_path / "infinite.txt"
    infinite.write_text("1.0 inf\n")
    with pytest.raises(ArgumentError):
        read_llrs(infinite)


def _binomial_se(record):
    return math.sqrt(max(record.bler * (1.0 - record.bler), 1e-12) / record.trials)


def _fixed_trials(config, trials):
    stopping = StoppingSection(min_errors=10**6, max_trials=trials)
    return replace(config, stopping=stopping)


def test_snr_threshold_error_rate_stays_near_target(small_config):
    target = 0.05
    config = replace(
        _fixed_trials(small_config, 2000),
        threshold=ThresholdSection(method=ThresholdMethod.PRECISE),
        channel=ChannelSection(snr_db=SnrGrid("6, 7"), convention=SnrConvention.SNR),
    )
    plain = run_bler(config)
    thresholded = run_bler(
        replace(config, early_termination=ETConfig(snr_target=target))
    )
    for reference, record in zip(plain, thresholded):
        assert record.threshold < 0
        assert record.bler >= target - 3 * _binomial_se(record)
        assert record.bler <= 2 * target
        assert reference.bler < target


def test_permutation_decoding_beats_single_sc_on_same_channels(small_config):
    config = replace(
        _fixed_trials(small_config, 300),
        code=CodeSection(m=5, r=2),
        channel=ChannelSection(snr_db=SnrGrid("0"), convention=SnrConvention.ES_N0),
    )
    (single,) = run_bler(replace(config, decoder=DecoderSection(kind=DecoderKind.SC)))
    (permuted,) = run_bler(replace(config, decoder=DecoderSection(list_size=8)))
    assert single.block_errors > 0
    assert permuted.block_errors <= single.block_errors


def test_error_rate_falls_as_snr_rises(small_config):
    config = replace(
        _fixed_trials(small_config, 400),
        channel=ChannelSection(snr_db=SnrGrid("0:1:3"), convention=SnrConvention.ES_N0),
    )
    records = run_bler(config)
    for lower, higher in zip(records, records[1:]):
        spread = math.hypot(_binomial_se(lower), _binomial_se(higher))
        assert higher.bler <= lower.bler + 3 * spread
    assert records[-1].bler < records[0].bler


def _preset(name, **overrides):
    overrides.setdefault("run__workers", str(os.cpu_count() or 1))
    return load_sim_config([PRESETS / name], overrides=overrides)


def _agrees_with(record, expected, factor=1.5):
    if expected / factor <= record.bler <= expected * factor:
        return True
    interval = binomtest(record.block_errors, record.trials).proportion_ci(0.95)
    return interval.low <= expected <= interval.high


@pytest.mark.slow
def test_permutation_decoding_error_rate_of_rm_8_3():
    expected = {0.0: 0.0433, 0.5: 0.00743, 1.0: 0.00086}
    config = _preset(
        "bler_rm_256_93.ini", channel__snr_db="0, 0.5, 1", stopping__min_errors="50"
    )
    records = run_bler(config)
    assert [record.snr_db for record in records] == list(expected)
    for record in records:
        assert record.block_errors >= 50
        assert _agrees_with(record, expected[record.snr_db])


@pytest.mark.slow
def test_list_decoding_error_rate_of_rm_8_3():
    (record,) = run_bler(_preset("bler_scl_rm_256_93.ini", channel__snr_db="0"))
    assert record.block_errors >= 100
    assert 0.0521 / 1.5 <= record.bler <= 0.0521 * 1.5


@pytest.mark.slow
def test_repetition_gain_of_rm_8_5():
    config = _preset(
        "gain_rm_256_219.ini",
        channel__snr_db="7",
        early_termination__branch_bound="false",
        early_termination__snr_target="none",
    )
    (record,) = run_gain_sweep(config)
    assert record.technique == "rep"
    assert record.trials >= 2000
    assert record.gain >= 15


@pytest.mark.slow
def test_branch_and_bound_gain_of_rm_8_5():
    config = _preset(
        "gain_rm_256_219.ini",
        channel__snr_db="4.75",
        early_termination__snr_target="none",
        early_termination__repetition="none",
    )
    (record,) = run_gain_sweep(config)
    assert record.technique == "bb"
    assert 1.5 <= record.gain <= 2.2


@pytest.mark.slow
def test_snr_threshold_gain_of_rm_8_4():
    config = _preset(
        "gain_rm_256_163.ini",
        decoder__parallel="true",
        early_termination__branch_bound="false",
        early_termination__repetition="none",
    )
    records = run_gain_sweep(config)
    assert len(records) == len(SnrGrid("0:0.25:4.5"))
    for record in records:
        assert record.technique == "snr"
        assert record.trials >= 2000
        assert 1.0 <= record.gain <= 1.25
