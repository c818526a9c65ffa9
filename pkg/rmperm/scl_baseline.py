from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from rmperm.exceptions import ArgumentError
from rmperm.rmcodes import CodeSpec
from rmperm.sc_core import _KERNELS, Kernel, NodeKind, _check_llrs, f_plus, node_kinds
from rmperm.types import BitVector, KernelCounters, LlrVector

logger = logging.getLogger(__name__)


@dataclass
class PathState:
    """
    Alive decoding paths.

    :ivar layer0: Layer-0 decisions, one row per path.
    :ivar metric: Path metrics, nonpositive and nonincreasing along decoding.
    """

    layer0: np.ndarray
    metric: np.ndarray

    @classmethod
    def root(cls, n: int) -> PathState:
        return cls(np.zeros((1, n), dtype=np.uint8), np.zeros(1))

    @property
    def size(self) -> int:
        return self.metric.size

    def select(self, origin: np.ndarray) -> None:
        self.layer0 = self.layer0[origin]
        self.metric = self.metric[origin]


@dataclass
class ListDecodeOutcome:
    codeword: BitVector
    layer0: BitVector
    metric: float
    ops: KernelCounters = field(default_factory=KernelCounters)


class _ListDecoder:
    """
    Recursive SC list decoding.

    Every call takes the LLRs of all alive paths and returns the bits decided
    for the sub-tree together with ``origin``, the input row every surviving
    path descends from.
    """

    def __init__(self, spec: CodeSpec, list_size: int, kernel: Kernel):
        self.spec = spec
        self.list_size = list_size
        self.f_minus = _KERNELS[kernel]
        self.shortcuts = kernel is Kernel.MIN_SUM
        self.kinds = node_kinds(spec)
        self.paths = PathState.root(spec.n)
        self.ops = KernelCounters()

    def _leaf(self, llrs: np.ndarray, g: int) -> tuple[np.ndarray, np.ndarray]:
        paths = self.paths
        if self.spec.frozen_mask[g]:
            paths.metric = paths.metric + np.minimum(llrs[:, 0], 0.0)
            return np.zeros_like(llrs, dtype=np.uint8), np.arange(paths.size)

        hard = (llrs[:, 0] <= 0).astype(np.uint8)
        bits = np.stack([hard, 1 - hard], axis=1).ravel()
        penalized = paths.metric - np.abs(llrs[:, 0])
        candidates = np.stack([paths.metric, penalized], axis=1).ravel()
        if candidates.size > self.list_size:
            keep = np.sort(np.argsort(-candidates, kind="stable")[: self.list_size])
        else:
            keep = np.arange(candidates.size)
        origin = keep // 2
        paths.select(origin)
        paths.metric = candidates[keep]
        paths.layer0[:, g] = bits[keep]
        return bits[keep][:, np.newaxis], origin

    def _node(self, llrs: np.ndarray, g: int, l: int) -> tuple[np.ndarray, np.ndarray]:
        if l == 0:
            return self._leaf(llrs, g)
        rows = llrs.shape[0]
        if self.shortcuts and self.kinds[l][g] == NodeKind.RATE0:
            ops = rows * (l << (l - 1))
            self.ops += KernelCounters(ops, ops)
            self.paths.metric = self.paths.metric + np.minimum(llrs, 0.0).sum(axis=1)
            return np.zeros_like(llrs, dtype=np.uint8), np.arange(rows)

        half = 1 << (l - 1)
        upper, lower = llrs[:, :half], llrs[:, half:]
        self.ops.fminus += rows * half
        left, first = self._node(self.f_minus(upper, lower), 2 * g, l - 1)

        upper, lower = upper[first], lower[first]
        self.ops.fplus += first.size * half
        right, second = self._node(f_plus(upper, lower, left), 2 * g + 1, l - 1)
        left = left[second]
        return np.concatenate([left ^ right, right], axis=1), first[second]

    def run(self, llrs: np.ndarray) -> ListDecodeOutcome:
        codewords, _ = self._node(llrs[np.newaxis, :], 0, self.spec.m)
        best = int(np.argmax(self.paths.metric))
        logger.debug(f"List decoding kept {self.paths.size} paths, best {best=}")
        return ListDecodeOutcome(
            codeword=codewords[best].copy(),
            layer0=self.paths.layer0[best].copy(),
            metric=float(self.paths.metric[best]),
            ops=self.ops,
        )


def scl_decode(
    spec: CodeSpec,
    channel_llrs: LlrVector | list[float],
    L: int,
    kernel: Kernel = Kernel.MIN_SUM,
) -> ListDecodeOutcome:
    """
    Successive cancellation list decoding with LLR path metrics.

    Each information bit splits every path into the hard decision, which keeps
    the metric, and its complement, which adds ``-|y|``. Frozen bits add
    ``min{0, y}``. When more than ``L`` paths exist the ``L`` largest metrics
    survive, ties going to the lower path index, and paths keep their relative
    order.

    :param spec: The code.
    :type spec: CodeSpec
    :param channel_llrs: Channel LLRs of length ``n``.
    :type channel_llrs: numpy.ndarray
    :param L: List size, at least 1.
    :type L: int
    :param kernel: Check-node kernel.
    :type kernel: Kernel
    :return: The path with the largest metric, the first one among equals.
    :rtype: ListDecodeOutcome
    :raises ArgumentError: If ``L < 1`` or the LLRs are malformed.

    **Examples:**

    .. code-block:: python

        >>> from rmperm.rmcodes import rm_code
        >>> scl_decode(rm_code(2, 1), [1.0, -1.0, 1.0, -1.0], L=4).codeword
        array([0, 1, 0, 1], dtype=uint8)
    """
    if L < 1:
        raise ArgumentError(f"List size must be at least 1, got {L=}")
    values = _check_llrs(channel_llrs, spec)
    if values.ndim != 1:
        raise ArgumentError(f"LLRs must be one-dimensional, got shape {values.shape}")
    return _ListDecoder(spec, int(L), kernel).run(values)
