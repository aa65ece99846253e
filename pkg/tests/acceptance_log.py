"""Collects one PASS/FAIL/SKIP line per acceptance criterion."""

LINES: list[str] = []


def record(number: int, ok: bool | None, detail: str) -> None:
    status = "SKIP" if ok is None else ("PASS" if ok else "FAIL")
    line = f"criterion {number:2d}: {status}  {detail}"
    LINES.append(line)
    print(line)
