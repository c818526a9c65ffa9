import math
from types import SimpleNamespace

import pytest

from rmperm._strategy_factory import StrategyFactory
from rmperm._termination_strategy import BranchAndBoundStrategy, StaticThresholdStrategy
from rmperm.exceptions import StrategyNotImplementedError
from rmperm.permdec import ETConfig


def test_strategy_factory_static_threshold():
    factory = StrategyFactory(ETConfig(), -math.inf)
    strategy = factory.get_strategy()
    assert isinstance(strategy, StaticThresholdStrategy)


def test_strategy_factory_static_threshold_with_repetition():
    factory = StrategyFactory(ETConfig(snr_target=1e-3, repetition=4), -20.0)
    strategy = factory.get_strategy()
    assert isinstance(strategy, StaticThresholdStrategy)
    assert strategy.threshold == -20.0
    assert strategy.repetitions == 4


def test_strategy_factory_branch_and_bound():
    factory = StrategyFactory(ETConfig(branch_bound=True), -math.inf)
    strategy = factory.get_strategy()
    assert isinstance(strategy, BranchAndBoundStrategy)


def test_strategy_factory_raises_not_implemented_error():
    et_config = SimpleNamespace(branch_bound="s", repetition=None)
    factory = StrategyFactory(et_config, 0.0)  # type: ignore
    with pytest.raises(StrategyNotImplementedError):
        factory.get_strategy()


def test_static_threshold_ignores_best_metric():
    strategy = StaticThresholdStrategy(-12.0)
    assert strategy.branch_threshold(-3.0) == -12.0
    assert strategy.branch_threshold(-math.inf) == -12.0


def test_branch_and_bound_tightens_threshold():
    strategy = BranchAndBoundStrategy(-12.0)
    assert strategy.branch_threshold(-3.0) == -3.0
    assert strategy.branch_threshold(-15.0) == -12.0
    assert BranchAndBoundStrategy(-math.inf).branch_threshold(-math.inf) == -math.inf


def test_should_stop_requires_best_codeword():
    strategy = StaticThresholdStrategy(-math.inf, repetitions=2)
    assert not strategy.should_stop(1, True)
    assert not strategy.should_stop(5, False)
    assert strategy.should_stop(2, True)


def test_should_stop_disabled_without_repetitions():
    strategy = BranchAndBoundStrategy(-math.inf)
    assert not strategy.should_stop(100, True)
