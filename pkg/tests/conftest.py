import pytest

from squintsense.wideband import SystemConfig

FC = 30e9
BW = 6e9


def make_config(m=128, p=1.0, n=1024, fc=FC, bw=BW):
    return SystemConfig(antenna_count=m, spacing_ratio=p, carrier_hz=fc, bandwidth_hz=bw, subcarrier_count=n)


@pytest.fixture
def cfg():
    return make_config()


_ACCEPTANCE = {}


def record_acceptance(number, ok, detail):
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
    _ACCEPTANCE[number] = line
    return line


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[number])
