"""Shared PASS/FAIL lines for the acceptance suite."""

ACCEPTANCE: dict[int, str] = {}


def record(number: int, passed: bool, detail: str) -> bool:
    line = f"criterion {number:>2}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE[number] = line
    print(line)
    return passed
