from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import NoReturn, Optional, Sequence

import numpy as np

from rmperm import __version__
from rmperm.config import load_sim_config
from rmperm.exceptions import ArgumentError, ConfigurationError
from rmperm.permdec import (
    DEFAULT_REPETITIONS,
    ETConfig,
    perm_decode,
    sample_permutations,
)
from rmperm.rmcodes import rm_code
from rmperm.sc_core import sc_decode
from rmperm.scl_baseline import scl_decode
from rmperm.simharness import (
    CSV_HEADER,
    DecoderKind,
    SimRecord,
    read_llrs,
    run_bler,
    run_gain_sweep,
    write_csv,
)
from rmperm.threshold import (
    DEFAULT_GRID_STEP,
    ChannelNoise,
    ThresholdMethod,
    clt_threshold,
    metric_threshold,
    precise_quantile,
)
from rmperm.types import ABORTED_METRIC

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ARGUMENT_ERROR = 1
EXIT_CONFIGURATION_ERROR = 2


class _ArgumentParser(argparse.ArgumentParser):
    def error(self, message: str) -> NoReturn:
        raise ArgumentError(f"{self.prog}: {message}")


def parse_et(text: str) -> ETConfig:
    """
    Parse the early-termination flag.

    ``none`` disables everything; otherwise a comma separated list of ``bb``,
    ``snr:<p>`` and ``rep[:<L_c>]``.

    :raises ArgumentError: On an unknown technique or a malformed argument.

    **Examples:**

    .. code-block:: python

        >>> parse_et("bb,snr:5e-4,rep:8")
        ETConfig(branch_bound=True, snr_target=0.0005, repetition=8)
    """
    if text.strip().lower() == "none":
        return ETConfig()
    branch_bound, snr_target, repetition = False, None, None
    for token in filter(None, (t.strip().lower() for t in text.split(","))):
        name, _, argument = token.partition(":")
        valid = (
            (name == "bb" and not argument)
            or (name == "snr" and argument)
            or name == "rep"
        )
        if not valid:
            raise ArgumentError(f"Unknown early-termination option {token!r}")
        try:
            if name == "bb":
                branch_bound = True
            elif name == "snr":
                snr_target = float(argument)
            else:
                repetition = int(argument) if argument else DEFAULT_REPETITIONS
        except ValueError as e:
            raise ArgumentError(f"Malformed early-termination option {token!r}") from e
    return ETConfig(
        branch_bound=branch_bound, snr_target=snr_target, repetition=repetition
    )


def _et_overrides(text: Optional[str]) -> dict[str, Optional[str]]:
    if text is None:
        return {}
    et_config = parse_et(text)
    return {
        "early_termination__branch_bound": str(et_config.branch_bound).lower(),
        "early_termination__snr_target": str(et_config.snr_target).lower(),
        "early_termination__repetition": str(et_config.repetition).lower(),
    }


def _flag(value: object) -> Optional[str]:
    return None if value is None else str(value)


def _sim_overrides(args: argparse.Namespace) -> dict[str, Optional[str]]:
    overrides = {
        "code__m": _flag(args.m),
        "code__r": _flag(args.r),
        "decoder__kind": _flag(args.decoder),
        "decoder__list_size": _flag(args.list),
        "decoder__parallel": "true" if args.parallel else None,
        "channel__snr_db": _flag(args.snr),
        "channel__convention": _flag(args.convention),
        "channel__all_zero": "true" if args.all_zero else None,
        "threshold__method": _flag(args.threshold_method),
        "threshold__grid_step": _flag(args.grid_step),
        "stopping__min_errors": _flag(args.min_errors),
        "stopping__max_trials": _flag(args.max_trials),
        "stopping__trials": _flag(args.trials),
        "run__seed": _flag(args.seed),
        "run__workers": _flag(args.workers),
    }
    overrides.update(_et_overrides(args.et))
    return overrides


def _print_records(records: Sequence[SimRecord]) -> None:
    print(",".join(CSV_HEADER))
    for record in records:
        print(",".join(record.as_row()))


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = load_sim_config(args.config, overrides=_sim_overrides(args))
    records = run_bler(config)
    if args.out:
        write_csv(records, args.out)
    else:
        _print_records(records)
    return EXIT_OK


def _cmd_gain(args: argparse.Namespace) -> int:
    config = load_sim_config(args.config, overrides=_sim_overrides(args))
    records = run_gain_sweep(config)
    techniques = list(dict.fromkeys(record.technique for record in records))
    for technique in techniques:
        selected = [record for record in records if record.technique == technique]
        if args.out is None:
            if len(techniques) > 1:
                print(f"# {technique}")
            _print_records(selected)
        elif len(techniques) == 1:
            write_csv(selected, args.out)
        else:
            out = Path(args.out)
            suffix = out.suffix or ".csv"
            write_csv(selected, out.with_name(f"{out.stem}_{technique}{suffix}"))
    return EXIT_OK


def _cmd_threshold(args: argparse.Namespace) -> int:
    noise, method = ChannelNoise(args.sigma2), ThresholdMethod(args.method)
    if method is ThresholdMethod.CLT:
        print(f"{clt_threshold(args.n, noise, args.p):.6g}")
        return EXIT_OK
    value, at_atom = precise_quantile(args.n, noise, args.p, args.grid_step)
    print(f"{value:.6g} (point mass at 0)" if at_atom else f"{value:.6g}")
    return EXIT_OK


def _cmd_decode(args: argparse.Namespace) -> int:
    spec = rm_code(args.m, args.r)
    llrs = read_llrs(args.llrs, spec.n)
    kind = DecoderKind(args.decoder)
    et_config = parse_et(args.et)
    if kind is DecoderKind.SC:
        outcome = sc_decode(llrs, spec)
        codeword, metric, ops, note = outcome.codeword, outcome.metric, outcome.ops, ""
    elif kind is DecoderKind.SCL:
        listed = scl_decode(spec, llrs, args.list)
        codeword, metric, ops, note = listed.codeword, listed.metric, listed.ops, ""
    else:
        threshold = ABORTED_METRIC
        if et_config.snr_target is not None:
            if args.sigma2 is None:
                raise ArgumentError("--sigma2 is required with an SNR-based threshold")
            threshold = metric_threshold(
                spec.n,
                ChannelNoise(args.sigma2),
                et_config.snr_target,
                ThresholdMethod(args.threshold_method),
                args.grid_step,
            )
        perms = sample_permutations(spec.m, args.list, np.random.default_rng(args.seed))
        result = perm_decode(spec, llrs, perms, threshold, et_config)
        codeword, metric, ops = result.codeword, result.metric, result.stats.ops
        decoded = str(result.decoded).lower()
        note = f"stop={result.stats.stop_reason.value} decoded={decoded}"
    print("codeword " + "".join(str(int(bit)) for bit in codeword))
    print(f"metric {metric:.6g}")
    print(f"ops fplus={ops.fplus} fminus={ops.fminus}")
    if note:
        print(note)
    return EXIT_OK


def _add_decoder_arguments(parser: argparse.ArgumentParser, defaults: bool) -> None:
    parser.add_argument(
        "--m", type=int, required=not defaults, help="code length exponent, n = 2**m"
    )
    parser.add_argument(
        "--r", type=int, required=not defaults, help="Reed-Muller order"
    )
    parser.add_argument(
        "--decoder",
        choices=[kind.value for kind in DecoderKind],
        default=None if defaults else DecoderKind.PERM.value,
    )
    parser.add_argument(
        "--list", type=int, default=None if defaults else 16, help="list size L"
    )
    parser.add_argument(
        "--et",
        default=None if defaults else "none",
        help="none, or any of bb,snr:<p>,rep[:<L_c>]",
    )
    parser.add_argument(
        "--threshold-method",
        choices=[method.value for method in ThresholdMethod],
        default=None if defaults else ThresholdMethod.PRECISE.value,
    )
    parser.add_argument(
        "--grid-step", type=float, default=None if defaults else DEFAULT_GRID_STEP
    )


def _add_simulation_arguments(parser: argparse.ArgumentParser) -> None:
    _add_decoder_arguments(parser, defaults=True)
    parser.add_argument(
        "--config", type=Path, action="append", help="INI file, may be repeated"
    )
    parser.add_argument(
        "--snr", help="SNR points in dB: start:step:stop or a comma list"
    )
    parser.add_argument("--convention", help="ebn0, esn0 or snr")
    parser.add_argument("--min-errors", type=int)
    parser.add_argument("--max-trials", type=int)
    parser.add_argument("--trials", type=int, help="trials per point for gain sweeps")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--workers", type=int)
    parser.add_argument(
        "--all-zero", action="store_true", help="transmit the all-zero codeword"
    )
    parser.add_argument(
        "--parallel", action="store_true", help="decode the permutations in lock-step"
    )
    parser.add_argument("--out", type=Path, help="CSV output, stdout when omitted")


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgumentParser(
        prog="rmperm", description="Permutation decoding of Reed-Muller codes"
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")
    commands = parser.add_subparsers(
        dest="command", required=True, parser_class=_ArgumentParser
    )

    simulate = commands.add_parser("simulate", help="block error rate per SNR point")
    _add_simulation_arguments(simulate)
    simulate.set_defaults(handler=_cmd_simulate)

    gain = commands.add_parser("gain", help="early-termination gain per technique")
    _add_simulation_arguments(gain)
    gain.set_defaults(handler=_cmd_gain)

    threshold = commands.add_parser("threshold", help="SNR-based metric threshold")
    threshold.add_argument("--n", type=int, required=True)
    threshold.add_argument("--sigma2", type=float, required=True)
    threshold.add_argument("--p", type=float, required=True)
    threshold.add_argument(
        "--method",
        choices=[method.value for method in ThresholdMethod],
        default=ThresholdMethod.PRECISE.value,
    )
    threshold.add_argument("--grid-step", type=float, default=DEFAULT_GRID_STEP)
    threshold.set_defaults(handler=_cmd_threshold)

    decode = commands.add_parser("decode", help="decode one LLR vector")
    _add_decoder_arguments(decode, defaults=False)
    decode.add_argument(
        "--llrs", type=Path, required=True, help="whitespace separated LLRs"
    )
    decode.add_argument(
        "--sigma2", type=float, help="noise variance for the SNR-based threshold"
    )
    decode.add_argument(
        "--seed", type=int, default=0, help="seed for the permutation sample"
    )
    decode.set_defaults(handler=_cmd_decode)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """
    Entry point of the ``rmperm`` command.

    :return: 0 on success, 1 on an argument error, 2 on a configuration error.
    :rtype: int
    """
    try:
        args = build_parser().parse_args(argv)
    except ArgumentError as e:
        print(e, file=sys.stderr)
        return EXIT_ARGUMENT_ERROR

    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s"
    )
    try:
        return args.handler(args)
    except ArgumentError as e:
        logger.error(str(e))
        return EXIT_ARGUMENT_ERROR
    except ConfigurationError as e:
        logger.error(str(e))
        return EXIT_CONFIGURATION_ERROR
