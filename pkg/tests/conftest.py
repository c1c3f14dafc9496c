import pytest

from edgeswitch.kernels import available_backends

# Table II reading: 720 at index 9 and 760 at index 13; the elided
# indices 2..6 are filled with low idle values.
TABLE_II_FSR = (3, 5, 4, 6, 2, 7, 9, 8, 20, 720, 12, 0, 1, 760, 3)


@pytest.fixture(params=sorted(available_backends()))
def backend(request):
    return available_backends()[request.param]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
