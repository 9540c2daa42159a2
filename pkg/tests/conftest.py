from fractions import Fraction

from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile(
    "ipslab", deadline=None, max_examples=40,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("ipslab")


def rationals(lo=0, hi=1, max_denominator: int = 20):
    """Rationals in [lo, hi] with denominators at most ``max_denominator``."""
    return st.fractions(Fraction(lo), Fraction(hi), max_denominator=max_denominator)


ACCEPTANCE_LINES: list[str] = []
"""One line per acceptance criterion, filled by test_acceptance.py."""


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
