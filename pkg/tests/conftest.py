import sys
from pathlib import Path

import pytest

from ddn.numerics import float_mode, set_float_mode

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture(autouse=True)
def _restore_float_mode():
    mode = float_mode()
    yield
    set_float_mode(mode)
