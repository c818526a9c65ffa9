__version__ = "0.1.0"

import logging

from rmperm.permdec import ETConfig, LayerPermutation, perm_decode, sample_permutations
from rmperm.rmcodes import CodeSpec, encode, rm_code
from rmperm.sc_core import sc_decode
from rmperm.scl_baseline import scl_decode
from rmperm.threshold import ChannelNoise, clt_threshold, precise_threshold

logging.getLogger(__name__).addHandler(logging.NullHandler())

__all__ = [
    "__version__",
    "ChannelNoise",
    "CodeSpec",
    "ETConfig",
    "LayerPermutation",
    "clt_threshold",
    "encode",
    "perm_decode",
    "precise_threshold",
    "rm_code",
    "sample_permutations",
    "sc_decode",
    "scl_decode",
]
