from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from rmperm.exceptions import ArgumentError
from rmperm.rmcodes import CodeSpec, polar_transform
from rmperm.types import ABORTED_METRIC, BitVector, KernelCounters, LlrVector

logger = logging.getLogger(__name__)


class Kernel(enum.Enum):
    MIN_SUM = "minsum"
    EXACT = "exact"


def f_minus_exact(x, y):
    """
    Exact check-node kernel ``ln((e^(x+y) + 1) / (e^x + e^y))``.

    Evaluated as a difference of ``logaddexp`` terms, which stays finite for
    arguments far beyond ``|x|, |y| <= 700``. Accepts scalars or arrays.
    """
    return np.logaddexp(np.add(x, y), 0.0) - np.logaddexp(x, y)


def f_minus_minsum(x, y):
    """
    Min-sum check-node kernel ``sign(x) sign(y) min(|x|, |y|)``, ``sign(0) = +1``.

    **Examples:**

    .. code-block:: python

        >>> f_minus_minsum(2.0, -3.0)
        -2.0
    """
    sign = np.where(np.less(x, 0), -1.0, 1.0) * np.where(np.less(y, 0), -1.0, 1.0)
    result = sign * np.minimum(np.abs(x), np.abs(y))
    return result if np.ndim(result) else float(result)


def f_plus(x, y, u):
    """Variable-node kernel ``(1 - 2u) x + y``."""
    result = (1 - 2 * np.asarray(u, dtype=np.float64)) * x + y
    return result if np.ndim(result) else float(result)


_KERNELS: dict[Kernel, Callable] = {
    Kernel.MIN_SUM: f_minus_minsum,
    Kernel.EXACT: f_minus_exact,
}


class NodeKind(enum.IntEnum):
    MIXED = 0
    RATE0 = 1
    RATE1 = 2


@lru_cache(maxsize=64)
def node_kinds(spec: CodeSpec) -> tuple[np.ndarray, ...]:
    """
    Classify every sub-tree ``(l, g)`` of the decoding tree.

    Entry ``[l][g]`` describes the leaves ``g * 2**l .. (g+1) * 2**l - 1``: all
    frozen (:attr:`NodeKind.RATE0`), none frozen (:attr:`NodeKind.RATE1`) or
    :attr:`NodeKind.MIXED`.
    """
    kinds = []
    for l in range(spec.m + 1):
        blocks = spec.frozen_mask.reshape(-1, 1 << l)
        kind = np.full(blocks.shape[0], NodeKind.MIXED, dtype=np.int8)
        kind[blocks.all(axis=1)] = NodeKind.RATE0
        kind[~blocks.any(axis=1)] = NodeKind.RATE1
        kind.flags.writeable = False
        kinds.append(kind)
    return tuple(kinds)


@dataclass
class DecodeOutcome:
    """
    Result of one SC decode.

    :ivar codeword: Decided codeword ``u^m``; unspecified when aborted.
    :ivar layer0: Decided layer-0 vector ``u^0``.
    :ivar metric: Frozen-side path metric, :data:`ABORTED_METRIC` when aborted.
    :ivar ops: Kernel invocations performed before returning.
    :ivar aborted: Whether the running metric fell below the threshold.
    """

    codeword: BitVector
    layer0: BitVector
    metric: float
    ops: KernelCounters = field(default_factory=KernelCounters)
    aborted: bool = False


class _SuccessiveCancellation:
    """
    Lock-step SC recursion over ``B`` rows of channel LLRs.

    Every row carries its own running metric, threshold, abort flag and
    counters. Aborted rows keep flowing through the arithmetic but are no
    longer counted, so each row observes exactly the sequential recursion.
    """

    def __init__(
        self,
        spec: CodeSpec,
        thresholds: np.ndarray,
        kernel: Kernel = Kernel.MIN_SUM,
    ):
        self.spec = spec
        self.thresholds = thresholds
        self.f_minus = _KERNELS[kernel]
        # Closed-form sub-trees assume the min-sum check node
        self.shortcuts = kernel is Kernel.MIN_SUM
        self.kinds = node_kinds(spec)
        rows = thresholds.shape[0]
        self.metric = np.zeros(rows)
        self.alive = np.ones(rows, dtype=bool)
        self.layer0 = np.zeros((rows, spec.n), dtype=np.uint8)
        self.fplus = np.zeros(rows, dtype=np.int64)
        self.fminus = np.zeros(rows, dtype=np.int64)

    def run(self, llrs: np.ndarray) -> np.ndarray:
        return self._node(llrs, 0, self.spec.m)

    def _abort_below_threshold(self) -> bool:
        self.alive &= ~(self.metric < self.thresholds)
        return not self.alive.any()

    def _count_subtree(self, l: int) -> None:
        ops = l << (l - 1)
        self.fplus[self.alive] += ops
        self.fminus[self.alive] += ops

    def _leaf(self, llrs: np.ndarray, g: int) -> np.ndarray:
        if self.spec.frozen_mask[g]:
            self.metric += np.minimum(llrs[:, 0], 0.0)
            return np.zeros_like(llrs, dtype=np.uint8)
        bits = (llrs <= 0).astype(np.uint8)
        self.layer0[:, g] = bits[:, 0]
        return bits

    def _closed_form(self, llrs: np.ndarray, g: int, l: int) -> np.ndarray | None:
        kind = self.kinds[l][g]
        if kind == NodeKind.RATE0:
            projected = self.metric + np.minimum(llrs, 0.0).sum(axis=1)
            if np.any(self.alive & (projected < self.thresholds)):
                return None
            self._count_subtree(l)
            self.metric = projected
            return np.zeros_like(llrs, dtype=np.uint8)
        if kind == NodeKind.RATE1:
            if np.any(llrs[self.alive] == 0):
                return None
            self._count_subtree(l)
            bits = (llrs < 0).astype(np.uint8)
            width = 1 << l
            self.layer0[:, g * width : (g + 1) * width] = polar_transform(bits)
            return bits
        return None

    def _node(self, llrs: np.ndarray, g: int, l: int) -> np.ndarray:
        if l == 0:
            return self._leaf(llrs, g)
        if self.shortcuts:
            bits = self._closed_form(llrs, g, l)
            if bits is not None:
                return bits

        half = 1 << (l - 1)
        upper, lower = llrs[:, :half], llrs[:, half:]
        self.fminus[self.alive] += half
        left = self._node(self.f_minus(upper, lower), 2 * g, l - 1)
        if self._abort_below_threshold():
            return np.zeros_like(llrs, dtype=np.uint8)

        self.fplus[self.alive] += half
        right = self._node(f_plus(upper, lower, left), 2 * g + 1, l - 1)
        if self._abort_below_threshold():
            return np.zeros_like(llrs, dtype=np.uint8)
        return np.concatenate([left ^ right, right], axis=1)


def _check_llrs(llrs: np.ndarray, spec: CodeSpec) -> np.ndarray:
    values = np.asarray(llrs, dtype=np.float64)
    if values.shape[-1] != spec.n:
        raise ArgumentError(
            f"LLR vector has length {values.shape[-1]}, code length is {spec.n}"
        )
    if not np.all(np.isfinite(values)):
        raise ArgumentError("Channel LLRs must be finite")
    return values


def _check_threshold(threshold: float) -> float:
    if np.isnan(threshold) or threshold > 0:
        raise ArgumentError(f"Metric threshold must lie in [-inf, 0], got {threshold=}")
    return float(threshold)


def sc_decode_batch(
    llrs: np.ndarray,
    spec: CodeSpec,
    thresholds: np.ndarray | float = ABORTED_METRIC,
    kernel: Kernel = Kernel.MIN_SUM,
) -> list[DecodeOutcome]:
    """
    Run independent SC decodes for every row of ``llrs`` in lock-step.

    :param llrs: Array of shape ``(B, n)``.
    :type llrs: numpy.ndarray
    :param spec: The code.
    :type spec: CodeSpec
    :param thresholds: Per-row metric thresholds, or one threshold for all rows.
    :type thresholds: numpy.ndarray | float
    :param kernel: Check-node kernel.
    :type kernel: Kernel
    :return: One outcome per row, identical to :func:`sc_decode` on that row.
    :rtype: list[DecodeOutcome]
    """
    values = _check_llrs(llrs, spec)
    if values.ndim != 2:
        raise ArgumentError(
            f"Batched LLRs must be two-dimensional, got shape {values.shape}"
        )
    given = np.asarray(thresholds, dtype=np.float64)
    limits = np.broadcast_to(given, values.shape[:1]).copy()
    for limit in limits:
        _check_threshold(limit)

    decoder = _SuccessiveCancellation(spec, limits, kernel)
    codewords = decoder.run(values)
    # Rows that crossed the threshold at the final check are still flagged alive
    decoder._abort_below_threshold()

    outcomes = []
    for row in range(values.shape[0]):
        aborted = not decoder.alive[row]
        outcomes.append(
            DecodeOutcome(
                codeword=codewords[row].copy(),
                layer0=decoder.layer0[row].copy(),
                metric=ABORTED_METRIC if aborted else float(decoder.metric[row]),
                ops=KernelCounters(int(decoder.fplus[row]), int(decoder.fminus[row])),
                aborted=aborted,
            )
        )
    return outcomes


def sc_decode(
    llrs: np.ndarray | list[float],
    spec: CodeSpec,
    threshold: float = ABORTED_METRIC,
    kernel: Kernel = Kernel.MIN_SUM,
) -> DecodeOutcome:
    """
    Successive cancellation decoding with path-metric accumulation.

    Frozen leaves decide 0 and add ``min{0, y}`` to the metric; information
    leaves decide 1 when ``y <= 0``. After each half of every node the running
    metric is compared with ``threshold``; once it is smaller the decode stops
    and reports :data:`ABORTED_METRIC`.

    :param llrs: Channel LLRs of length ``n``.
    :type llrs: numpy.ndarray
    :param spec: The code.
    :type spec: CodeSpec
    :param threshold: Abort threshold ``M_t`` in ``[-inf, 0]``.
    :type threshold: float
    :param kernel: Check-node kernel; min-sum unless a high-accuracy run is wanted.
    :type kernel: Kernel
    :return: The decode outcome.
    :rtype: DecodeOutcome
    :raises ArgumentError: On a shape mismatch or an invalid threshold.

    **Examples:**

    .. code-block:: python

        >>> outcome = sc_decode([-1.0, 2.0], CodeSpec(m=1, frozen=(0, 1)))
        >>> outcome.metric
        -1.0
    """
    values = _check_llrs(llrs, spec)
    if values.ndim != 1:
        raise ArgumentError(f"LLRs must be one-dimensional, got shape {values.shape}")
    limit = _check_threshold(threshold)
    return sc_decode_batch(values[np.newaxis, :], spec, limit, kernel)[0]


def codeword_metric(
    codeword: np.ndarray | list[int], channel_llrs: LlrVector | list[float]
) -> float:
    """
    Codeword-side metric ``sum_i min{0, (1 - 2 c_i) y_i}``.

    :raises ArgumentError: If the lengths differ.
    """
    bits = np.asarray(codeword, dtype=np.float64)
    values = np.asarray(channel_llrs, dtype=np.float64)
    if bits.shape != values.shape:
        raise ArgumentError(
            f"Codeword shape {bits.shape} does not match LLR shape {values.shape}"
        )
    return float(np.minimum(0.0, (1.0 - 2.0 * bits) * values).sum())
