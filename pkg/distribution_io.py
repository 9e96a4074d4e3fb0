"""
Reading and writing the shared distribution file format.

Format: a header line ``# ckpt-dist v1 t_start=<int> t_end=<int>`` followed by one
``<time>,<count>`` pair per line. Blank lines and other ``#`` comments are ignored.
"""

import io
import logging
import re
from pathlib import Path
from typing import Iterable, List, Optional, TextIO, Union

import pandas as pd

from distribution_core import (
    DistributionError,
    FaultDistribution,
    SavingsReport,
    build_distribution,
)

logger = logging.getLogger(__name__)

FORMAT_TAG = "ckpt-dist v1"
HEADER_PATTERN = re.compile(r'^#\s*ckpt-dist v1\s+t_start=(\d+)\s+t_end=(\d+)\s*$')


class DistributionFormatError(DistributionError):
    """Raised for malformed distribution files."""


def parse_distribution(text: str, source: str = "<text>") -> FaultDistribution:
    """Parse distribution text into a validated FaultDistribution."""
    t_range = None
    pairs = []

    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith('#'):
            match = HEADER_PATTERN.match(line)
            if match and t_range is None:
                t_range = (int(match.group(1)), int(match.group(2)))
            continue
        if t_range is None:
            raise DistributionFormatError(f"{source}:{line_no}: data before the '# {FORMAT_TAG}' header")

        fields = [f.strip() for f in line.split(',')]
        if len(fields) != 2:
            raise DistributionFormatError(f"{source}:{line_no}: expected '<time>,<count>', got {raw!r}")
        try:
            pairs.append((int(fields[0]), int(fields[1])))
        except ValueError:
            raise DistributionFormatError(f"{source}:{line_no}: non-integer field in {raw!r}")

    if t_range is None:
        raise DistributionFormatError(f"{source}: missing '# {FORMAT_TAG} t_start=.. t_end=..' header")

    return build_distribution(pairs, *t_range)


def read_distribution(path: Union[str, Path]) -> FaultDistribution:
    """Load a distribution file."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Distribution file not found: {path}")

    with open(path, 'r', encoding='utf-8') as f:
        d = parse_distribution(f.read(), source=str(path))

    logger.info(f"Loaded {path.name}: {len(d.entries)} entries, F={d.total}, span=[{d.t_start}, {d.t_end})")
    return d


def format_distribution(d: FaultDistribution, extra_header: Optional[Iterable[str]] = None) -> str:
    """Distribution text with ``extra_header`` lines as comments after the tag line."""
    lines = [f"# {FORMAT_TAG} t_start={d.t_start} t_end={d.t_end}"]
    for comment in extra_header or ():
        lines.append(f"# {comment}")
    lines.extend(f"{t},{c}" for t, c in d.entries)
    return "\n".join(lines) + "\n"


def write_distribution(d: FaultDistribution, target: Union[str, Path, TextIO],
                       extra_header: Optional[Iterable[str]] = None):
    """Write a distribution to a path or an open text stream."""
    text = format_distribution(d, extra_header)
    if isinstance(target, (str, Path)):
        path = Path(target)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            f.write(text)
        logger.info(f"Wrote distribution with {len(d.entries)} entries to {path}")
    else:
        target.write(text)


def report_to_csv(report: SavingsReport) -> str:
    """Rectangles as ``left,right,height,area`` rows plus a summary line."""
    frame = pd.DataFrame(
        [(r.left, r.right, r.height, r.area) for r in report.rectangles],
        columns=['left', 'right', 'height', 'area'],
    )
    buffer = io.StringIO()
    frame.to_csv(buffer, index=False, lineterminator='\n')
    buffer.write(
        f"# saved={report.saved},baseline={report.baseline},"
        f"remaining={report.remaining},reduction={float(report.reduction):.6f}\n"
    )
    return buffer.getvalue()


def parse_plan(text: str) -> List[int]:
    """Checkpoint times from a comma or whitespace separated list."""
    tokens = [t for t in re.split(r'[,\s]+', text.strip()) if t]
    try:
        return [int(t) for t in tokens]
    except ValueError:
        raise DistributionFormatError(f"Checkpoint list must hold integers, got {text!r}")
