"""Collects one pass/fail line per acceptance criterion for the terminal summary."""

RESULTS: list[str] = []


def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
    line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}" + (f" ({detail})" if detail else "")
    RESULTS.append(line)
    print(line)
    return ok
