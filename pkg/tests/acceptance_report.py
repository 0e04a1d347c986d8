"""Collects one status line per acceptance criterion for the terminal summary."""

LINES: dict = {}


def record(number: int, title: str, passed: bool, detail: str) -> str:
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number:>2}: {title}: {detail}"
    LINES[number] = line
    print(line)
    return line
