import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mctou.model import assemble_matrices, table1_params  # noqa: E402
from mctou.term_structure import ContractSpec  # noqa: E402


@pytest.fixture
def params():
    return table1_params()


@pytest.fixture
def matrices(params):
    return assemble_matrices(params)


@pytest.fixture
def sde_matrices():
    """Reference values read with the raw-SDE volatility scaling."""
    return assemble_matrices(table1_params(vol_convention="sde"))


@pytest.fixture
def contracts():
    return (ContractSpec(1 / 12, "T1"), ContractSpec(2 / 12, "T2"), ContractSpec(3 / 12, "T3"))


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
