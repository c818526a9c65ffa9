from __future__ import annotations

import enum
import logging
from abc import ABC, abstractmethod

logger = logging.getLogger(__name__)


class Strategy(ABC):
    def __init__(self, threshold: float, repetitions: int | None = None):
        """
        Initialize the base early-termination Strategy.

        :param threshold: Initial metric threshold ``M_t``; ``-inf`` when the
            SNR-based threshold is disabled.
        :type threshold: float
        :param repetitions: Number of branches ``L_c`` that must agree on the best
            codeword before decoding stops, or None to never stop early.
        :type repetitions: int | None, optional
        """
        self.threshold = threshold
        self.repetitions = repetitions

    @abstractmethod
    def branch_threshold(self, best_metric: float) -> float:
        """
        Abort threshold handed to the next SC branch.

        Must be implemented by subclasses.
        """
        pass

    def should_stop(self, hits: int, holds_best: bool) -> bool:
        """
        Decide whether the permutation loop may stop after a completed branch.

        :param hits: Number of completed branches that produced this codeword.
        :type hits: int
        :param holds_best: Whether this codeword carries the best metric so far.
        :type holds_best: bool
        :return: True when the repetition rule fires.
        :rtype: bool
        """
        if self.repetitions is None or not holds_best:
            return False
        if hits >= self.repetitions:
            logger.debug(f"Codeword repeated {hits=} times, stopping")
            return True
        return False


class StaticThresholdStrategy(Strategy):
    def branch_threshold(self, best_metric: float) -> float:
        return self.threshold


class BranchAndBoundStrategy(Strategy):
    def branch_threshold(self, best_metric: float) -> float:
        return max(self.threshold, best_metric)


class TerminationStrategies(enum.Enum):
    STATIC_THRESHOLD = StaticThresholdStrategy
    BRANCH_AND_BOUND = BranchAndBoundStrategy
