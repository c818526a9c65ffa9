from __future__ import annotations

import ast
import csv
import enum
import logging
import math
from concurrent.futures import Executor, ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from functools import partial
from pathlib import Path
from typing import TYPE_CHECKING, Iterable, Iterator, Optional

import numpy as np

from rmperm.exceptions import ArgumentError, ConfigurationError
from rmperm.permdec import ETConfig, perm_decode, sample_permutations
from rmperm.rmcodes import CodeSpec, encode, rm_code, scatter_info
from rmperm.sc_core import Kernel, sc_decode
from rmperm.scl_baseline import scl_decode
from rmperm.threshold import (
    DEFAULT_GRID_STEP,
    ChannelNoise,
    ThresholdMethod,
    metric_threshold,
)
from rmperm.types import ABORTED_METRIC, KernelCounters

if TYPE_CHECKING:
    from rmperm.types import BitVector, LlrVector

logger = logging.getLogger(__name__)

#: Column order of result files.
CSV_HEADER = ("snr_db", "trials", "errors", "bler", "avg_fplus", "avg_fminus", "gain")


class SnrConvention(enum.Enum):
    ES_N0 = "es_n0"
    EB_N0 = "eb_n0"
    SNR = "snr"

    @classmethod
    def _missing_(cls, value: object) -> SnrConvention | None:
        key = str(value).strip().lower().replace("/", "").replace("_", "")
        for member in cls:
            if member.value.replace("_", "") == key:
                return member
        return None


class DecoderKind(enum.Enum):
    PERM = "perm"
    SCL = "scl"
    SC = "sc"


class SnrGrid(tuple):
    """
    Ordered SNR points in dB.

    Built from ``start:step:stop`` (both ends inclusive), a comma separated
    list, a Python literal list or any iterable of numbers.

    **Examples:**

    .. code-block:: python

        >>> SnrGrid("0:0.5:1")
        (0.0, 0.5, 1.0)
        >>> SnrGrid("1.5, 2")
        (1.5, 2.0)
    """

    def __new__(cls, value: str | Iterable[float]) -> SnrGrid:
        if isinstance(value, str):
            points = cls._parse(value)
        else:
            points = [float(v) for v in value]
        if not points:
            raise ArgumentError("SNR grid is empty")
        if not all(math.isfinite(p) for p in points):
            raise ArgumentError(f"SNR grid has non-finite points: {points}")
        return super().__new__(cls, points)

    @staticmethod
    def _parse(text: str) -> list[float]:
        text = text.strip()
        if ":" in text:
            try:
                start, step, stop = (float(part) for part in text.split(":"))
            except ValueError as e:
                raise ArgumentError(f"SNR range {text!r} is not start:step:stop") from e
            if not step > 0 or stop < start:
                raise ArgumentError(
                    f"SNR range {text!r} is empty or has a nonpositive step"
                )
            count = math.floor((stop - start) / step + 1e-9) + 1
            return [round(start + i * step, 10) for i in range(count)]
        try:
            if text.startswith(("[", "(")):
                return [float(v) for v in ast.literal_eval(text)]
            return [float(part) for part in text.split(",") if part.strip()]
        except (ValueError, TypeError, SyntaxError) as e:
            raise ArgumentError(f"SNR points {text!r} are not a list of numbers") from e


def snr_to_sigma2(snr_db: float, convention: SnrConvention, rate: float = 1.0) -> float:
    """
    Noise variance for unit-energy BPSK at the given SNR.

    ``es_n0``: ``1 / (2 Es/N0)``; ``eb_n0``: ``1 / (2 R Eb/N0)``;
    ``snr``: ``1 / SNR`` with SNR the signal to noise power ratio.

    :raises ArgumentError: If the rate is outside ``(0, 1]``.

    **Examples:**

    .. code-block:: python

        >>> snr_to_sigma2(0.0, SnrConvention.EB_N0, rate=0.5)
        1.0
    """
    linear = 10.0 ** (snr_db / 10.0)
    if convention is SnrConvention.ES_N0:
        return 1.0 / (2.0 * linear)
    if convention is SnrConvention.SNR:
        return 1.0 / linear
    if not 0.0 < rate <= 1.0:
        raise ArgumentError(f"Code rate must lie in (0, 1], got {rate=}")
    return 1.0 / (2.0 * rate * linear)


def awgn_llrs(
    codeword: BitVector,
    sigma2: float,
    rng: np.random.Generator,
    noiseless: bool = False,
) -> LlrVector:
    """
    BPSK over AWGN: ``s = 1 - 2c``, ``r = s + N(0, sigma2)``, LLR ``2 r / sigma2``.

    :param codeword: Transmitted bits.
    :type codeword: numpy.ndarray
    :param sigma2: Noise variance.
    :type sigma2: float
    :param rng: Random generator.
    :type rng: numpy.random.Generator
    :param noiseless: Skip the noise but keep the ``2 / sigma2`` scaling.
    :type noiseless: bool
    :return: Channel LLRs.
    :rtype: numpy.ndarray
    """
    if not sigma2 > 0:
        raise ArgumentError(f"Noise variance must be positive, got {sigma2=}")
    received = 1.0 - 2.0 * np.asarray(codeword, dtype=np.float64)
    if not noiseless:
        received = received + rng.normal(0.0, math.sqrt(sigma2), size=received.shape)
    return 2.0 * received / sigma2


@dataclass
class CodeSection:
    m: int = 8
    r: int = 3


@dataclass
class DecoderSection:
    kind: DecoderKind = DecoderKind.PERM
    list_size: int = 256
    parallel: bool = False
    kernel: Kernel = Kernel.MIN_SUM


@dataclass
class ChannelSection:
    snr_db: SnrGrid = field(default_factory=lambda: SnrGrid("0"))
    convention: SnrConvention = SnrConvention.EB_N0
    all_zero: bool = False


@dataclass
class ThresholdSection:
    method: ThresholdMethod = ThresholdMethod.PRECISE
    grid_step: float = DEFAULT_GRID_STEP


@dataclass
class StoppingSection:
    min_errors: int = 100
    max_trials: int = 1_000_000
    trials: int = 2000


@dataclass
class RunSection:
    seed: int = 0
    workers: int = 1
    chunk: int = 64


@dataclass
class SimConfig:
    """
    Complete description of a simulation run; one attribute per INI section.
    """

    code: CodeSection = field(default_factory=CodeSection)
    decoder: DecoderSection = field(default_factory=DecoderSection)
    early_termination: ETConfig = field(default_factory=ETConfig)
    channel: ChannelSection = field(default_factory=ChannelSection)
    threshold: ThresholdSection = field(default_factory=ThresholdSection)
    stopping: StoppingSection = field(default_factory=StoppingSection)
    run: RunSection = field(default_factory=RunSection)

    def validate(self) -> None:
        """
        Check the cross-field invariants.

        :raises ConfigurationError: On the first violated invariant.
        """
        code, stopping, run = self.code, self.stopping, self.run
        positive = [
            ("code.m", code.m),
            ("decoder.list_size", self.decoder.list_size),
            ("stopping.min_errors", stopping.min_errors),
            ("stopping.max_trials", stopping.max_trials),
            ("stopping.trials", stopping.trials),
            ("run.workers", run.workers),
            ("run.chunk", run.chunk),
        ]
        for name, value in positive:
            if value < 1:
                raise ConfigurationError(f"{name} must be at least 1, got {value}")
        if not 0 <= code.r <= code.m:
            raise ConfigurationError(f"code.r must lie in [0, {code.m}], got {code.r}")
        if not len(self.channel.snr_db):
            raise ConfigurationError("channel.snr_db is empty")
        if not self.threshold.grid_step > 0:
            raise ConfigurationError(
                f"threshold.grid_step must be positive, got {self.threshold.grid_step}"
            )
        if self.decoder.parallel and not self.early_termination.parallel_capable:
            raise ConfigurationError(
                "decoder.parallel needs branch-and-bound and repetition disabled"
            )
        if self.decoder.kind is not DecoderKind.PERM and self.early_termination.enabled:
            logger.warning(
                "Early termination only applies to the permutation decoder, "
                f"ignored for {self.decoder.kind.value}"
            )

    @property
    def spec(self) -> CodeSpec:
        return rm_code(self.code.m, self.code.r)


@dataclass
class SimRecord:
    """
    Counts gathered at one SNR point.

    :ivar fplus: Total ``f_+`` invocations over all trials.
    :ivar fminus: Total ``f_-`` invocations over all trials.
    :ivar reference_ops: Kernel invocations the same trials cost without early
        termination, ``q`` per trial.
    :ivar threshold: SNR-based metric threshold used, if any.
    :ivar technique: Early-termination technique the record isolates.
    """

    snr_db: float
    trials: int = 0
    block_errors: int = 0
    fplus: int = 0
    fminus: int = 0
    reference_ops: int = 0
    threshold: Optional[float] = None
    technique: str = "none"

    @property
    def bler(self) -> float:
        return self.block_errors / self.trials if self.trials else 0.0

    @property
    def avg_fplus(self) -> float:
        return self.fplus / self.trials if self.trials else 0.0

    @property
    def avg_fminus(self) -> float:
        return self.fminus / self.trials if self.trials else 0.0

    @property
    def gain(self) -> float:
        spent = self.fplus + self.fminus
        return self.reference_ops / spent if spent else 1.0

    def as_row(self) -> list[str]:
        return [
            f"{self.snr_db:.6g}",
            str(self.trials),
            str(self.block_errors),
            f"{self.bler:.6g}",
            f"{self.avg_fplus:.6g}",
            f"{self.avg_fminus:.6g}",
            f"{self.gain:.6g}",
        ]


@dataclass(frozen=True)
class TrialPlan:
    """Everything a worker needs to run the trials of one SNR point."""

    spec: CodeSpec
    decoder: DecoderKind
    list_size: int
    et_config: ETConfig
    threshold: float
    sigma2: float
    all_zero: bool
    parallel: bool
    kernel: Kernel
    seed: int
    point_index: int

    @property
    def reference_ops(self) -> int:
        """``q``: kernel calls of a full decode, ``L n log2 n``, ``n log2 n`` for SC."""
        branches = 1 if self.decoder is DecoderKind.SC else self.list_size
        return branches * self.spec.n * self.spec.m


@dataclass(frozen=True)
class TrialOutcome:
    error: bool
    ops: KernelCounters
    reference_ops: int


def run_trial(plan: TrialPlan, trial: int) -> TrialOutcome:
    """
    Transmit one codeword and decode it.

    The random stream depends only on ``(seed, point_index, trial)``.
    """
    rng = np.random.default_rng([plan.seed, plan.point_index, trial])
    spec = plan.spec
    if plan.all_zero:
        info = np.zeros(spec.k, dtype=np.uint8)
    else:
        info = rng.integers(0, 2, spec.k, dtype=np.uint8)
    codeword = encode(spec, scatter_info(spec, info))
    llrs = awgn_llrs(codeword, plan.sigma2, rng)

    if plan.decoder is DecoderKind.PERM:
        perms = sample_permutations(spec.m, plan.list_size, rng)
        result = perm_decode(
            spec,
            llrs,
            perms,
            plan.threshold,
            plan.et_config,
            plan.parallel,
            plan.kernel,
        )
        error = not result.decoded or not np.array_equal(result.codeword, codeword)
        return TrialOutcome(error, result.stats.ops, plan.reference_ops)
    if plan.decoder is DecoderKind.SCL:
        outcome = scl_decode(spec, llrs, plan.list_size, plan.kernel)
        # List decoding has no early termination to measure against
        error = not np.array_equal(outcome.codeword, codeword)
        return TrialOutcome(error, outcome.ops, outcome.ops.total)
    single = sc_decode(llrs, spec, kernel=plan.kernel)
    error = not np.array_equal(single.codeword, codeword)
    return TrialOutcome(error, single.ops, plan.reference_ops)


def _outcomes(
    plan: TrialPlan, limit: int, pool: Executor | None, chunk: int
) -> Iterator[TrialOutcome]:
    if pool is None:
        for trial in range(limit):
            yield run_trial(plan, trial)
        return
    worker = partial(run_trial, plan)
    # Bounded batches keep the number of queued tasks small for large trial limits
    batch = chunk * 16
    for start in range(0, limit, batch):
        trials = range(start, min(limit, start + batch))
        yield from pool.map(worker, trials, chunksize=chunk)


class _ThresholdCache:
    def __init__(self, config: SimConfig):
        self.config = config
        self.values: dict[float, float] = {}

    def __call__(self, sigma2: float) -> float:
        p = self.config.early_termination.snr_target
        if p is None or self.config.decoder.kind is not DecoderKind.PERM:
            return ABORTED_METRIC
        if sigma2 not in self.values:
            self.values[sigma2] = metric_threshold(
                self.config.spec.n,
                ChannelNoise(sigma2),
                p,
                self.config.threshold.method,
                self.config.threshold.grid_step,
            )
            logger.debug(f"Metric threshold {self.values[sigma2]} at {sigma2=}")
        return self.values[sigma2]


def _plan(
    config: SimConfig, point_index: int, snr_db: float, thresholds: _ThresholdCache
) -> TrialPlan:
    spec = config.spec
    sigma2 = snr_to_sigma2(snr_db, config.channel.convention, spec.rate)
    return TrialPlan(
        spec=spec,
        decoder=config.decoder.kind,
        list_size=config.decoder.list_size,
        et_config=config.early_termination,
        threshold=thresholds(sigma2),
        sigma2=sigma2,
        all_zero=config.channel.all_zero,
        parallel=config.decoder.parallel,
        kernel=config.decoder.kernel,
        seed=config.run.seed,
        point_index=point_index,
    )


def _simulate_point(
    plan: TrialPlan,
    record: SimRecord,
    limit: int,
    min_errors: int | None,
    pool: Executor | None,
    chunk: int,
) -> SimRecord:
    for outcome in _outcomes(plan, limit, pool, chunk):
        record.trials += 1
        record.block_errors += outcome.error
        record.fplus += outcome.ops.fplus
        record.fminus += outcome.ops.fminus
        record.reference_ops += outcome.reference_ops
        if min_errors is not None and record.block_errors >= min_errors:
            break
    logger.debug(
        f"{record.technique}: snr_db={record.snr_db:g} trials={record.trials} "
        f"errors={record.block_errors} gain={record.gain:.4g}"
    )
    return record


def _sweep(
    config: SimConfig,
    fixed_trials: bool,
    technique: str,
    records: list[SimRecord],
    pool: Executor | None,
) -> None:
    thresholds = _ThresholdCache(config)
    limit = config.stopping.trials if fixed_trials else config.stopping.max_trials
    min_errors = None if fixed_trials else config.stopping.min_errors
    for point_index, snr_db in enumerate(config.channel.snr_db):
        plan = _plan(config, point_index, snr_db, thresholds)
        threshold = None if plan.threshold == ABORTED_METRIC else plan.threshold
        record = SimRecord(snr_db=snr_db, threshold=threshold, technique=technique)
        records.append(record)
        _simulate_point(plan, record, limit, min_errors, pool, config.run.chunk)


def _run(
    config: SimConfig, runs: list[tuple[str, SimConfig]], fixed_trials: bool
) -> list[SimRecord]:
    config.validate()
    records: list[SimRecord] = []
    pool = ProcessPoolExecutor(config.run.workers) if config.run.workers > 1 else None
    try:
        for technique, run_config in runs:
            _sweep(run_config, fixed_trials, technique, records, pool)
    except KeyboardInterrupt:
        logger.warning("Simulation interrupted, keeping the points gathered so far")
    finally:
        if pool is not None:
            pool.shutdown(wait=False, cancel_futures=True)
    return [record for record in records if record.trials]


def run_bler(config: SimConfig) -> list[SimRecord]:
    """
    Block error rate per SNR point.

    Every point runs until ``stopping.min_errors`` block errors or
    ``stopping.max_trials`` trials. A decode that reports no codeword counts
    as a block error. Results are identical for any number of workers.

    :param config: The simulation configuration.
    :type config: SimConfig
    :return: One record per simulated point; partial when interrupted.
    :rtype: list[SimRecord]
    :raises ConfigurationError: If the configuration is inconsistent.
    """
    label = "+".join(name for name, _ in config.early_termination.isolated()) or "none"
    return _run(config, [(label, config)], fixed_trials=False)


def run_gain_sweep(config: SimConfig) -> list[SimRecord]:
    """
    Early-termination gain of every enabled technique on its own.

    Each technique runs ``stopping.trials`` trials per point on the same random
    streams; with no technique enabled a single run labelled ``none`` is made.

    :param config: The simulation configuration.
    :type config: SimConfig
    :return: Records labelled by technique, in the order bb, snr, rep.
    :rtype: list[SimRecord]
    """
    runs = [
        (technique, replace(config, early_termination=et_config))
        for technique, et_config in config.early_termination.isolated()
    ] or [("none", config)]
    return _run(config, runs, fixed_trials=True)


def write_csv(records: Iterable[SimRecord], path: str | Path) -> Path:
    """
    Write records as CSV with the header of :data:`CSV_HEADER`.

    :return: The written path.
    :rtype: pathlib.Path
    """
    target = Path(path)
    with target.open("w", newline="", encoding="utf-8") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for record in records:
            writer.writerow(record.as_row())
    logger.debug(f"Wrote {target}")
    return target


def read_llrs(path: str | Path, n: int | None = None) -> LlrVector:
    """
    Read whitespace separated channel LLRs.

    :param path: Text file.
    :type path: str | pathlib.Path
    :param n: Expected length, if known.
    :type n: int | None
    :return: The LLRs.
    :rtype: numpy.ndarray
    :raises ArgumentError: On unreadable, malformed or non-finite values, or a
        length other than ``n``.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ArgumentError(f"Cannot read LLR file {path}: {e}") from e
    try:
        values = np.array([float(token) for token in text.split()], dtype=np.float64)
    except ValueError as e:
        raise ArgumentError(
            f"LLR file {path} holds a value that is not a real number"
        ) from e
    if not np.all(np.isfinite(values)):
        raise ArgumentError(f"LLR file {path} holds non-finite values")
    if n is not None and values.size != n:
        raise ArgumentError(f"LLR file {path} has {values.size} values, expected {n}")
    return values

