import os

import numpy as np
import pytest

from rmperm.rmcodes import encode, rm_code, scatter_info
from tests._constants import APP_ENV_PREFIX, SMALL_CONFIG


@pytest.fixture(autouse=True)
def clear_env():
    # Clear environment variables before and after each test
    keys_to_clear = [
        key for key in os.environ if key.upper().startswith(APP_ENV_PREFIX)
    ]

    for key in keys_to_clear:
        del os.environ[key]

    yield

    for key in [key for key in os.environ if key.upper().startswith(APP_ENV_PREFIX)]:
        del os.environ[key]


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def rm_4_2():
    return rm_code(4, 2)


@pytest.fixture
def random_codeword(rng):
    def _draw(spec):
        info = rng.integers(0, 2, spec.k, dtype=np.uint8)
        u0 = scatter_info(spec, info)
        return u0, encode(spec, u0)

    return _draw


@pytest.fixture
def config_file(tmp_path):
    config_path = tmp_path / "rmperm.ini"
    config_path.write_text(SMALL_CONFIG)
    return str(config_path)


@pytest.fixture
def llr_file(tmp_path):
    def _write(values):
        path = tmp_path / "llrs.txt"
        path.write_text(" ".join(repr(float(v)) for v in values) + "\n")
        return path

    return _write
