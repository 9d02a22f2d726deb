"""Pass/fail lines collected by the acceptance suite and echoed in the pytest summary."""

LINES: list[str] = []


def record(number, title, ok, detail):
    line = f"criterion {number} {'PASS' if ok else 'FAIL'}: {title} ({detail})"
    LINES.append(line)
    return line
