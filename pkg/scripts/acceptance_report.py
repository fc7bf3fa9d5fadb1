"""Run the acceptance suite and print one pass/fail line per criterion.

    python3 scripts/acceptance_report.py
"""

from __future__ import annotations

import sys
from pathlib import Path

import pytest

ROOT = Path(__file__).resolve().parents[1]


def main() -> int:
    return int(pytest.main(["-q", "-p", "no:cacheprovider", str(ROOT / "tests" / "test_acceptance.py")]))


if __name__ == "__main__":
    sys.exit(main())
