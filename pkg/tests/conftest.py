import pytest

from adm_broadcast.model import Scenario, SourceEmission, Priority


@pytest.fixture
def small_line():
    """Five nodes 100 m apart, 150 m radio: a pure chain."""
    return Scenario(node_count=5, inter_vehicle_distance=100.0, line_length=400.0,
                    comm_range=150.0, source_schedule=(SourceEmission(0, Priority.HL, 0.0),),
                    duration=10.0, seed=3)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def acceptance_report(request):
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def report(criterion, ok, detail):
        line = f"criterion {criterion}: {'PASS' if ok else 'FAIL'}  {detail}"
        lines.append(line)
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
