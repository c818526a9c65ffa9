from __future__ import annotations

import logging
from typing import TYPE_CHECKING

from rmperm._termination_strategy import Strategy, TerminationStrategies
from rmperm.exceptions import StrategyNotImplementedError

if TYPE_CHECKING:
    from rmperm.permdec import ETConfig

logger = logging.getLogger(__name__)


class StrategyFactory:
    def __init__(self, et_config: ETConfig, threshold: float):
        """
        Initialize the StrategyFactory.

        :param et_config: Early-termination switches of the permutation decoder.
        :type et_config: ETConfig
        :param threshold: Initial metric threshold ``M_t``.
        :type threshold: float
        """
        self.et_config = et_config
        self.threshold = threshold

    def get_strategy(self) -> Strategy:
        """
        Determine and return the strategy matching the early-termination switches.

        :return: The appropriate strategy instance.
        :rtype: Strategy
        :raises StrategyNotImplementedError: If no matching strategy is found.
        """
        strategies = {
            False: TerminationStrategies.STATIC_THRESHOLD,
            True: TerminationStrategies.BRANCH_AND_BOUND,
        }
        strategy_cls = strategies.get(self.et_config.branch_bound)
        if strategy_cls is None:
            raise StrategyNotImplementedError(
                f"No strategy for branch_bound={self.et_config.branch_bound!r}"
            )
        logger.debug(f"Selected {strategy_cls.name} with threshold={self.threshold}")
        return strategy_cls.value(self.threshold, self.et_config.repetition)
