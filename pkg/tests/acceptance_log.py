"""Shared PASS/FAIL log for the acceptance suite (printed in the pytest summary)."""

LINES = []


def record(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    LINES.append(line)
    print(line)
    return ok
