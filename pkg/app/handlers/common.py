import sys
from pathlib import Path
from typing import List

from report import CheckRow, FLOAT_FORMAT, checks_frame, write_frame


def print_checks(checks: List[CheckRow]) -> None:
    checks_frame(checks).to_csv(sys.stdout, index=False, float_format=FLOAT_FORMAT, lineterminator='\n')


def save_checks(checks: List[CheckRow], path: Path) -> Path:
    return write_frame(checks_frame(checks), path)


def exit_code(checks: List[CheckRow]) -> int:
    return 0 if checks and all(check.passed for check in checks) else 1
