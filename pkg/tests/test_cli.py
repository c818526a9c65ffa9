import csv

import pytest

from rmperm.cli import (
    EXIT_ARGUMENT_ERROR,
    EXIT_CONFIGURATION_ERROR,
    EXIT_OK,
    main,
    parse_et,
)
from rmperm.exceptions import ArgumentError
from rmperm.permdec import ETConfig
from rmperm.simharness import CSV_HEADER
from rmperm.threshold import ChannelNoise, clt_threshold, precise_threshold


@pytest.mark.parametrize(
    ("text", "expected"),
    [
        ("none", ETConfig()),
        ("bb", ETConfig(branch_bound=True)),
        ("snr:1e-3", ETConfig(snr_target=1e-3)),
        ("rep", ETConfig(repetition=8)),
        ("rep:3", ETConfig(repetition=3)),
        ("BB, rep:2", ETConfig(branch_bound=True, repetition=2)),
        (
            "bb,snr:5e-4,rep:8",
            ETConfig(branch_bound=True, snr_target=5e-4, repetition=8),
        ),
    ],
)
def test_parse_et(text, expected):
    assert parse_et(text) == expected


@pytest.mark.parametrize(
    "text", ["bb:1", "snr", "snr:abc", "rep:x", "rep:0", "snr:2", "fast"]
)
def test_parse_et_rejects_malformed_options(text):
    with pytest.raises(ArgumentError):
        parse_et(text)


def _threshold_argv(n, p, *extra):
    return ["threshold", "--n", str(n), "--sigma2", "0.5", "--p", str(p), *extra]


def test_threshold_command(capsys):
    code = main(_threshold_argv(512, 1e-4, "--method", "clt"))
    out = capsys.readouterr().out.strip()
    assert code == EXIT_OK
    assert out == f"{clt_threshold(512, ChannelNoise(0.5), 1e-4):.6g}"


def test_threshold_command_precise(capsys):
    assert main(_threshold_argv(8, 1e-3)) == EXIT_OK
    out = capsys.readouterr().out.strip()
    assert out == f"{precise_threshold(8, ChannelNoise(0.5), 1e-3):.6g}"


def test_threshold_command_flags_the_point_mass(capsys):
    assert main(_threshold_argv(1, 0.5)) == EXIT_OK
    assert capsys.readouterr().out.strip() == "0 (point mass at 0)"


def test_decode_command_noiseless(capsys, llr_file):
    path = llr_file([2.0] * 8)
    code = main(
        ["decode", "--m", "3", "--r", "1", "--llrs", str(path), "--list", "4"]
    )
    lines = capsys.readouterr().out.splitlines()
    assert code == EXIT_OK
    assert lines[0] == "codeword 00000000"
    assert float(lines[1].split()[1]) == 0.0
    assert lines[2] == "ops fplus=48 fminus=48"
    assert lines[3] == "stop=exhausted decoded=true"


@pytest.mark.parametrize("decoder", ["sc", "scl"])
def test_decode_command_baselines(capsys, llr_file, decoder):
    path = llr_file([1.0, -1.0, 1.0, -1.0])
    argv = ["decode", "--m", "2", "--r", "1", "--llrs", str(path)]
    code = main([*argv, "--decoder", decoder, "--list", "4"])
    lines = capsys.readouterr().out.splitlines()
    assert code == EXIT_OK
    assert lines[0] == "codeword 0101"
    assert len(lines) == 3


def test_decode_command_with_snr_threshold(capsys, llr_file):
    path = llr_file([2.0] * 16)
    argv = ["decode", "--m", "4", "--r", "2", "--llrs", str(path), "--list", "4"]
    argv += ["--et", "snr:1e-3"]
    assert main(argv) == EXIT_ARGUMENT_ERROR
    assert main([*argv, "--sigma2", "0.5", "--threshold-method", "clt"]) == EXIT_OK
    assert "decoded=true" in capsys.readouterr().out


def test_argument_errors_exit_with_one(llr_file):
    short_llrs = str(llr_file([1.0] * 4))
    assert main(["decode", "--m", "3", "--r", "1"]) == EXIT_ARGUMENT_ERROR
    assert main(_threshold_argv(8, 2)) == EXIT_ARGUMENT_ERROR
    argv = ["decode", "--m", "3", "--r", "1", "--llrs", short_llrs]
    assert main(argv) == EXIT_ARGUMENT_ERROR
    assert main(["bogus"]) == EXIT_ARGUMENT_ERROR


def test_configuration_errors_exit_with_two(tmp_path, config_file):
    missing = str(tmp_path / "missing.ini")
    assert main(["simulate", "--config", missing]) == EXIT_CONFIGURATION_ERROR
    simulate = ["simulate", "--config", config_file]
    assert main([*simulate, "--list", "0"]) == EXIT_CONFIGURATION_ERROR
    assert main([*simulate, "--parallel", "--et", "bb"]) == EXIT_CONFIGURATION_ERROR


def test_simulate_writes_csv(tmp_path, config_file):
    out = tmp_path / "bler.csv"
    assert main(["simulate", "--config", config_file, "--out", str(out)]) == EXIT_OK
    with out.open(newline="") as handle:
        rows = list(csv.reader(handle))
    assert tuple(rows[0]) == CSV_HEADER
    assert [row[0] for row in rows[1:]] == ["1", "2"]
    assert all(row[1] == "12" for row in rows[1:])


def test_simulate_prints_csv(capsys, config_file):
    argv = ["simulate", "--config", config_file, "--snr", "2", "--max-trials", "3"]
    assert main(argv) == EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == ",".join(CSV_HEADER)
    assert lines[1].startswith("2,3,")


def test_gain_writes_one_file_per_technique(tmp_path, config_file):
    out = tmp_path / "gain.csv"
    argv = ["gain", "--config", config_file, "--et", "bb,rep:2", "--out", str(out)]
    assert main(argv) == EXIT_OK
    for technique in ("bb", "rep"):
        with (tmp_path / f"gain_{technique}.csv").open(newline="") as handle:
            rows = list(csv.reader(handle))
        assert tuple(rows[0]) == CSV_HEADER
        assert [row[1] for row in rows[1:]] == ["8", "8"]


def test_gain_prints_technique_blocks(capsys, config_file):
    assert main(["gain", "--config", config_file, "--et", "bb,rep:2"]) == EXIT_OK
    out = capsys.readouterr().out
    assert "# bb\n" in out
    assert "# rep\n" in out
