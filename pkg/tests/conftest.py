import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from dpcert.formula import Formula  # noqa: E402
from oracles import WORKED_EXAMPLE  # noqa: E402

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@pytest.fixture
def worked():
    return Formula.from_clauses(WORKED_EXAMPLE, 3)


@pytest.fixture
def worked_cnf(tmp_path):
    path = tmp_path / "worked.cnf"
    path.write_text("p cnf 3 6\n" + "".join(" ".join(map(str, c)) + " 0\n" for c in WORKED_EXAMPLE))
    return str(path)
