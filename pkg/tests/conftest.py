"""Collects one verdict line per acceptance criterion and prints them at the end."""

VERDICTS: dict[int, str] = {}


def record(n: int, title: str, ok: bool, detail: str) -> bool:
    VERDICTS[n] = f"criterion {n:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    print(VERDICTS[n])
    return ok


def pytest_terminal_summary(terminalreporter):
    if not VERDICTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(VERDICTS):
        terminalreporter.write_line(VERDICTS[n])
