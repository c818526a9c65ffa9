from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, TypeVar

import numpy as np
import numpy.typing as npt

if TYPE_CHECKING:
    from _typeshed import DataclassInstance

    Dataclass = TypeVar("Dataclass", bound=DataclassInstance)

#: Array over {0, 1} whose length is a power of two (u^l, codeword, info bits).
BitVector = npt.NDArray[np.uint8]
#: Array of finite log-likelihood ratios; positive values favour bit 0.
LlrVector = npt.NDArray[np.float64]

#: Sentinel metric of an aborted decode; compares below every finite metric.
ABORTED_METRIC = float("-inf")


@dataclass
class KernelCounters:
    """Number of f_+ and min-sum f_- kernel invocations."""

    fplus: int = 0
    fminus: int = 0

    @property
    def total(self) -> int:
        return self.fplus + self.fminus

    def __add__(self, other: Any) -> KernelCounters:
        if not isinstance(other, KernelCounters):
            return NotImplemented
        return KernelCounters(self.fplus + other.fplus, self.fminus + other.fminus)

    def __iadd__(self, other: KernelCounters) -> KernelCounters:
        self.fplus += other.fplus
        self.fminus += other.fminus
        return self
