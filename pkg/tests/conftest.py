import os
import sys
from pathlib import Path

import pytest

PROJECT_ROOT = Path(__file__).resolve().parents[1]
if str(PROJECT_ROOT) not in sys.path:
    sys.path.insert(0, str(PROJECT_ROOT))

os.environ["SEMPE_JBTABLE_CAPACITY"] = "30"
os.environ["SEMPE_DRAIN_PENALTY"] = "14"
os.environ["SEMPE_STEP_LIMIT"] = "5000000"
os.environ["SEMPE_SCAN_WORKERS"] = "1"
os.environ["SEMPE_BENCH_WORKERS"] = "2"

NESTED_SOURCE = """\
@secret A, B, C;
var j;
var k;

proc main() {
    if A or B {
        j = j + 1;
    } else {
        if C {
            k = k + 1;
        } else {
            k = k - 1;
        }
    }
}
"""


@pytest.fixture(autouse=True)
def fresh_settings():
    from sempe.config import clear_settings_cache

    clear_settings_cache()
    yield
    clear_settings_cache()


@pytest.fixture
def nested_source() -> str:
    return NESTED_SOURCE


@pytest.fixture
def nested_file(tmp_path) -> Path:
    path = tmp_path / "nested.sl"
    path.write_text(NESTED_SOURCE, encoding="utf-8")
    return path
