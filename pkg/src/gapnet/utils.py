"""Utility & helper functions."""

from __future__ import annotations

import sys
from pathlib import Path
from typing import Iterable, Optional


def write_lines(lines: Iterable[str], out: Optional[Path] = None) -> None:
    """Write one record per line to `out`, or to stdout when no path is given."""
    text = "".join(f"{line}\n" for line in lines)
    if out is None:
        sys.stdout.write(text)
    else:
        out.write_text(text)
