from __future__ import annotations

import enum
import itertools
import logging
import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from rmperm._strategy_factory import StrategyFactory
from rmperm.exceptions import (
    ArgumentError,
    ConfigurationError,
    FrozenSetNotInvariantError,
)
from rmperm.rmcodes import CodeSpec
from rmperm.sc_core import Kernel, sc_decode, sc_decode_batch
from rmperm.types import ABORTED_METRIC, BitVector, KernelCounters, LlrVector

logger = logging.getLogger(__name__)

#: Default number of agreeing branches for the repetition rule.
DEFAULT_REPETITIONS = 8

# Above this many layer permutations sampling no longer enumerates them all
_ENUMERATION_LIMIT = 8


def bit_permutation(layer_map: Sequence[int], m: int) -> np.ndarray:
    """
    Bit-index permutation induced by a layer permutation.

    Digit ``b_j`` of index ``i`` moves to digit position ``layer_map[j]``.

    :param layer_map: Permutation of ``{0..m-1}``.
    :type layer_map: Sequence[int]
    :param m: Number of layers.
    :type m: int
    :return: Array ``bit_map`` with ``bit_map[i]`` the image of ``i``.
    :rtype: numpy.ndarray
    :raises ArgumentError: If ``layer_map`` is not a permutation of ``{0..m-1}``.

    **Examples:**

    .. code-block:: python

        >>> bit_permutation((1, 0), 2)
        array([0, 2, 1, 3])
    """
    if len(layer_map) != m or sorted(layer_map) != list(range(m)):
        raise ArgumentError(f"{tuple(layer_map)} is not a permutation of range({m})")
    indices = np.arange(1 << m)
    image = np.zeros_like(indices)
    for digit, position in enumerate(layer_map):
        image |= ((indices >> digit) & 1) << position
    return image


@dataclass(frozen=True)
class LayerPermutation:
    """
    A factor-graph layer permutation ``pi^l`` with its bit permutation ``pi``.

    :ivar layer_map: Images of the layers ``0..m-1``.
    :ivar bit_map: Induced permutation of bit indices.
    :ivar inverse: Inverse of ``bit_map``.
    """

    layer_map: tuple[int, ...]
    bit_map: np.ndarray = field(init=False, repr=False, compare=False)
    inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        layer_map = tuple(int(j) for j in self.layer_map)
        bit_map = bit_permutation(layer_map, len(layer_map))
        inverse = np.empty_like(bit_map)
        inverse[bit_map] = np.arange(bit_map.size)
        bit_map.flags.writeable = False
        inverse.flags.writeable = False
        object.__setattr__(self, "layer_map", layer_map)
        object.__setattr__(self, "bit_map", bit_map)
        object.__setattr__(self, "inverse", inverse)

    @classmethod
    def identity(cls, m: int) -> LayerPermutation:
        return cls(tuple(range(m)))

    @property
    def m(self) -> int:
        return len(self.layer_map)

    @property
    def is_identity(self) -> bool:
        return self.layer_map == tuple(range(self.m))

    def permute(self, values: np.ndarray) -> np.ndarray:
        """Apply ``pi``: the entry at index ``i`` moves to ``bit_map[i]``."""
        permuted = np.empty_like(values)
        permuted[..., self.bit_map] = values
        return permuted

    def depermute(self, values: np.ndarray) -> np.ndarray:
        """Apply ``pi^-1``, undoing :meth:`permute`."""
        return values[..., self.bit_map]

    def preserves(self, spec: CodeSpec) -> bool:
        """Whether ``pi`` maps the frozen set of ``spec`` onto itself."""
        frozen = np.asarray(spec.frozen, dtype=np.int64)
        return bool(np.array_equal(np.sort(self.bit_map[frozen]), frozen))


@lru_cache(maxsize=_ENUMERATION_LIMIT + 1)
def _non_identity_layer_maps(m: int) -> tuple[tuple[int, ...], ...]:
    identity = tuple(range(m))
    return tuple(p for p in itertools.permutations(range(m)) if p != identity)


def sample_permutations(
    m: int, L: int, rng: np.random.Generator
) -> list[LayerPermutation]:
    """
    Draw ``L`` layer permutations, the identity first.

    The other ``L - 1`` are uniform over the non-identity permutations, without
    replacement while ``L <= m!`` and with replacement beyond that.

    :param m: Number of layers.
    :type m: int
    :param L: List size, at least 1.
    :type L: int
    :param rng: Random generator.
    :type rng: numpy.random.Generator
    :return: The permutations.
    :rtype: list[LayerPermutation]
    """
    if L < 1:
        raise ArgumentError(f"List size must be at least 1, got {L=}")
    identity = tuple(range(m))
    total = math.factorial(m)
    if L > total:
        logger.warning(
            f"{L=} exceeds the {total} layer permutations of m={m}, "
            "sampling with replacement"
        )
        drawn = [tuple(int(j) for j in rng.permutation(m)) for _ in range(L - 1)]
    elif m <= _ENUMERATION_LIMIT:
        others = _non_identity_layer_maps(m)
        picks = rng.choice(len(others), size=L - 1, replace=False)
        drawn = [others[i] for i in picks]
    else:
        seen = {identity}
        drawn = []
        while len(drawn) < L - 1:
            candidate = tuple(int(j) for j in rng.permutation(m))
            if candidate not in seen:
                seen.add(candidate)
                drawn.append(candidate)
    return [LayerPermutation(identity)] + [LayerPermutation(p) for p in drawn]


@dataclass(frozen=True)
class ETConfig:
    """
    Early-termination switches of the permutation decoder.

    :ivar branch_bound: Abort branches whose running metric falls below the
        best completed metric.
    :ivar snr_target: Probability used to derive the SNR-based threshold, or None.
    :ivar repetition: Stop after ``L_c`` branches returned the best codeword, or None.
    """

    branch_bound: bool = False
    snr_target: Optional[float] = None
    repetition: Optional[int] = None

    def __post_init__(self) -> None:
        if self.snr_target is not None and not 0.0 < self.snr_target < 1.0:
            raise ArgumentError(
                f"SNR threshold probability must lie in (0, 1), got {self.snr_target}"
            )
        if self.repetition is not None and self.repetition < 1:
            raise ArgumentError(
                f"Repetition count must be at least 1, got {self.repetition}"
            )

    @property
    def enabled(self) -> bool:
        return (
            self.branch_bound
            or self.snr_target is not None
            or self.repetition is not None
        )

    @property
    def parallel_capable(self) -> bool:
        return not self.branch_bound and self.repetition is None

    def isolated(self) -> list[tuple[str, ETConfig]]:
        """Split into one configuration per enabled technique, labelled bb/snr/rep."""
        techniques = []
        if self.branch_bound:
            techniques.append(("bb", ETConfig(branch_bound=True)))
        if self.snr_target is not None:
            techniques.append(("snr", ETConfig(snr_target=self.snr_target)))
        if self.repetition is not None:
            techniques.append(("rep", ETConfig(repetition=self.repetition)))
        return techniques


class StopReason(enum.Enum):
    EXHAUSTED = "exhausted"
    REPETITION = "repetition"
    THRESHOLD_FAILURE = "threshold-failure"


@dataclass
class DecodeStats:
    per_permutation: list[KernelCounters] = field(default_factory=list)
    branches_run: int = 0
    branches_aborted: int = 0
    stop_reason: StopReason = StopReason.EXHAUSTED
    repeated_permutations: bool = False

    @property
    def ops(self) -> KernelCounters:
        return sum(self.per_permutation, KernelCounters())


@dataclass
class PermDecodeResult:
    """
    Output of :func:`perm_decode`.

    :ivar codeword: Estimate of the transmitted codeword, ``pi^-1(u^m)``.
    :ivar layer0: The matching layer-0 vector, ``pi^-1(u^0)``.
    :ivar metric: Metric of the returned codeword, :data:`ABORTED_METRIC` when
        nothing was decoded.
    :ivar decoded: False when no branch beat the initial threshold.
    """

    codeword: BitVector
    layer0: BitVector
    metric: float
    decoded: bool
    stats: DecodeStats


def _validate_permutations(spec: CodeSpec, perms: Sequence[LayerPermutation]) -> None:
    if not perms:
        raise ArgumentError("At least one permutation is required")
    for perm in perms:
        if perm.m != spec.m:
            raise ArgumentError(
                f"Permutation over {perm.m} layers used with m={spec.m}"
            )
        if not perm.preserves(spec):
            raise FrozenSetNotInvariantError(
                f"Layer permutation {perm.layer_map} does not preserve the frozen set"
            )


def _failure(spec: CodeSpec, stats: DecodeStats) -> PermDecodeResult:
    stats.stop_reason = StopReason.THRESHOLD_FAILURE
    zeros = np.zeros(spec.n, dtype=np.uint8)
    return PermDecodeResult(zeros, zeros.copy(), ABORTED_METRIC, False, stats)


def perm_decode(
    spec: CodeSpec,
    channel_llrs: LlrVector,
    perms: Sequence[LayerPermutation],
    threshold: float = ABORTED_METRIC,
    et_config: ETConfig = ETConfig(),
    parallel: bool = False,
    kernel: Kernel = Kernel.MIN_SUM,
) -> PermDecodeResult:
    """
    Decode with one SC decoder per layer permutation and keep the best metric.

    Branches run in the order of ``perms``. A completed branch replaces the
    current best when its metric is strictly larger, so among equal metrics the
    first branch wins. ``threshold`` is the SNR-based threshold ``M_t``
    (``-inf`` when unused) and also the metric every result has to beat.

    :param spec: The code; its frozen set must be invariant under every permutation.
    :type spec: CodeSpec
    :param channel_llrs: Channel LLRs of length ``n``.
    :type channel_llrs: numpy.ndarray
    :param perms: Layer permutations, usually from :func:`sample_permutations`.
    :type perms: Sequence[LayerPermutation]
    :param threshold: Initial metric threshold ``M_t``.
    :type threshold: float
    :param et_config: Branch-and-bound and repetition switches.
    :type et_config: ETConfig
    :param parallel: Decode all branches in lock-step and reduce at the end;
        only allowed without branch-and-bound and repetition handling.
    :type parallel: bool
    :return: The decoding result.
    :rtype: PermDecodeResult
    :raises FrozenSetNotInvariantError: If a permutation moves the frozen set.
    :raises ConfigurationError: If ``parallel`` is combined with sequential-only
        early termination.
    """
    _validate_permutations(spec, perms)
    llrs = np.asarray(channel_llrs, dtype=np.float64)
    distinct = len({p.layer_map for p in perms})
    stats = DecodeStats(repeated_permutations=distinct < len(perms))
    if parallel:
        if not et_config.parallel_capable:
            raise ConfigurationError(
                "Branch-and-bound and repetition handling need sequential branches"
            )
        return _decode_lockstep(spec, llrs, perms, threshold, stats, kernel)

    strategy = StrategyFactory(et_config, threshold).get_strategy()
    best_metric = threshold
    best: tuple[BitVector, BitVector] | None = None
    best_key: bytes | None = None
    hits: Counter[bytes] = Counter()

    for index, perm in enumerate(perms):
        outcome = sc_decode(
            perm.permute(llrs), spec, strategy.branch_threshold(best_metric), kernel
        )
        stats.per_permutation.append(outcome.ops)
        stats.branches_run += 1
        if outcome.aborted:
            stats.branches_aborted += 1
            logger.debug(
                f"Branch {index} aborted after {outcome.ops.total} kernel calls"
            )
            continue

        codeword = perm.depermute(outcome.codeword)
        key = codeword.tobytes()
        hits[key] += 1
        if outcome.metric > best_metric:
            best_metric = outcome.metric
            best = (codeword, perm.depermute(outcome.layer0))
            best_key = key
        if strategy.should_stop(hits[key], key == best_key):
            stats.stop_reason = StopReason.REPETITION
            break

    if best is None:
        return _failure(spec, stats)
    return PermDecodeResult(best[0], best[1], best_metric, True, stats)


def _decode_lockstep(
    spec: CodeSpec,
    llrs: np.ndarray,
    perms: Sequence[LayerPermutation],
    threshold: float,
    stats: DecodeStats,
    kernel: Kernel,
) -> PermDecodeResult:
    permuted = np.stack([perm.permute(llrs) for perm in perms])
    outcomes = sc_decode_batch(permuted, spec, threshold, kernel)
    stats.per_permutation = [outcome.ops for outcome in outcomes]
    stats.branches_run = len(outcomes)
    stats.branches_aborted = sum(outcome.aborted for outcome in outcomes)

    metrics = np.array([outcome.metric for outcome in outcomes])
    # argmax returns the lowest permutation index among equal metrics
    winner = int(np.argmax(metrics))
    if outcomes[winner].aborted or not metrics[winner] > threshold:
        return _failure(spec, stats)
    perm, outcome = perms[winner], outcomes[winner]
    return PermDecodeResult(
        perm.depermute(outcome.codeword),
        perm.depermute(outcome.layer0),
        outcome.metric,
        True,
        stats,
    )

