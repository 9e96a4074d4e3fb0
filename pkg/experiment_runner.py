"""
Experiment runner for method comparisons.

An experiment crosses distributions, placement methods and checkpoint counts.
Every (distribution, method, k) cell runs on a worker thread; rows are always
reported in spec order, independent of completion order.
"""

import io
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Literal, Optional, Tuple, Union

import pandas as pd
from pydantic import BaseModel, Field, field_validator, model_validator

from distribution_core import FaultDistribution
from placement import PlacementMethod, PlacementResult

logger = logging.getLogger(__name__)

class ExperimentFailedError(RuntimeError):
    """Raised when every cell of an experiment failed."""

    def __init__(self, message: str, report: Optional["ExperimentReport"] = None,
                 cause: Optional[BaseException] = None):
        super().__init__(message)
        self.report = report
        self.cause = cause


class FileSource(BaseModel):
    kind: Literal['file'] = 'file'
    path: str

    @field_validator('path')
    @classmethod
    def path_exists(cls, value: str) -> str:
        if not Path(value).is_file():
            raise ValueError(f"distribution file not found: {value}")
        return value


class SynthSource(BaseModel):
    kind: Literal['synth'] = 'synth'
    seeds: List[int] = Field(min_length=1)
    params: Dict[str, Any] = Field(default_factory=dict)


class CacheSimSource(BaseModel):
    """Cache-derived distributions; a size of 0 means no cache at all."""

    kind: Literal['cachesim'] = 'cachesim'
    trace: str
    sizes: List[int] = Field(default_factory=lambda: [8192], min_length=1)
    filter: Literal['instruction', 'data'] = 'data'

    @field_validator('trace')
    @classmethod
    def trace_exists(cls, value: str) -> str:
        if not Path(value).is_file():
            raise ValueError(f"trace file not found: {value}")
        return value


DistributionSource = Annotated[Union[FileSource, SynthSource, CacheSimSource], Field(discriminator='kind')]


class ExperimentSpec(BaseModel):
    sources: List[DistributionSource] = Field(min_length=1)
    methods: List[PlacementMethod]
    k_values: List[int]
    seed: int = 0
    max_generations: Optional[int] = None
    islands: int = 1
    omit_timing: bool = False
    output_csv: Optional[str] = None
    output_json: Optional[str] = None

    @field_validator('methods')
    @classmethod
    def methods_not_empty(cls, value: List[PlacementMethod]) -> List[PlacementMethod]:
        if not value:
            raise ValueError("at least one method is required")
        return value

    @field_validator('k_values')
    @classmethod
    def k_values_valid(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("at least one k value is required")
        if any(k < 0 for k in value):
            raise ValueError(f"k values must be non-negative, got {value}")
        return value

    @model_validator(mode='after')
    def islands_positive(self) -> 'ExperimentSpec':
        if self.islands < 1:
            raise ValueError(f"islands must be at least 1, got {self.islands}")
        return self

    @classmethod
    def from_file(cls, path: Union[str, Path]) -> 'ExperimentSpec':
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Experiment spec not found: {path}")
        return cls.model_validate_json(path.read_text(encoding='utf-8'))


class ResultRow(BaseModel):
    """One compare row. A row carries either a placement result or an error."""

    dist_id: str
    method: PlacementMethod
    k: int = Field(ge=0)
    saved: Optional[int] = Field(default=None, ge=0)
    baseline: Optional[int] = Field(default=None, ge=0)
    reduction: Optional[float] = Field(default=None, ge=0.0, le=1.0)
    wfft: float = Field(ge=0.0)
    elapsed_ms: Optional[float] = Field(default=None, ge=0.0)
    error: Optional[str] = None

    @model_validator(mode='after')
    def result_or_error(self) -> 'ResultRow':
        has_result = self.saved is not None
        if has_result == (self.error is not None):
            raise ValueError("a row holds either a result or an error")
        if has_result and (self.baseline is None or self.reduction is None):
            raise ValueError("a result row needs saved, baseline and reduction")
        if has_result and self.saved > self.baseline:
            raise ValueError(f"saved {self.saved} exceeds the baseline {self.baseline}")
        return self

    def to_record(self) -> Dict[str, Any]:
        """CSV-ready values; missing ones become empty fields."""
        def fixed(value: Optional[float], digits: int) -> str:
            return '' if value is None else f"{value:.{digits}f}"

        return {
            'dist_id': self.dist_id,
            'method': self.method.value,
            'k': self.k,
            'saved': '' if self.saved is None else self.saved,
            'baseline': '' if self.baseline is None else self.baseline,
            'reduction': fixed(self.reduction, 6),
            'wfft': fixed(self.wfft, 6),
            'elapsed_ms': fixed(self.elapsed_ms, 3),
            'error': self.error or '',
        }


ROW_COLUMNS = list(ResultRow.model_fields)


class CellStatus(Enum):
    PENDING = "pending"
    RUNNING = "running"
    COMPLETED = "completed"
    FAILED = "failed"


@dataclass
class ExperimentCell:
    index: int
    dist_id: str
    method: PlacementMethod
    k: int
    status: CellStatus = CellStatus.PENDING
    result: Optional[PlacementResult] = None
    error: Optional[BaseException] = None
    started_at: str = ""
    completed_at: str = ""

    def to_row(self, wfft_score: float, omit_timing: bool) -> ResultRow:
        values: Dict[str, Any] = {'dist_id': self.dist_id, 'method': self.method, 'k': self.k, 'wfft': wfft_score}
        if self.result is not None:
            report = self.result.report
            values.update(saved=report.saved, baseline=report.baseline, reduction=float(report.reduction))
            if not omit_timing:
                values['elapsed_ms'] = self.result.elapsed * 1000.0
        if self.error is not None:
            values['error'] = f"{type(self.error).__name__}: {self.error}"
        return ResultRow(**values)


@dataclass
class ExperimentReport:
    cells: List[ExperimentCell]
    rows: pd.DataFrame
    stats: Dict[str, Any] = field(default_factory=dict)

    @property
    def failed(self) -> int:
        return sum(1 for c in self.cells if c.status is CellStatus.FAILED)

    def to_csv(self) -> str:
        buffer = io.StringIO()
        self.rows.to_csv(buffer, index=False, lineterminator='\n')
        return buffer.getvalue()

    def to_records(self) -> List[Dict[str, Any]]:
        return self.rows.to_dict(orient='records')


Placer = Callable[[FaultDistribution, PlacementMethod, int], PlacementResult]
Scorer = Callable[[FaultDistribution], float]


class ExperimentRunner:
    """Runs the cells of one experiment on a thread pool with per-cell logging."""

    def __init__(self, placer: Placer, scorer: Scorer, max_workers: Optional[int] = None):
        self.placer = placer
        self.scorer = scorer
        self.max_workers = max_workers
        self._lock = threading.Lock()
        self.stats = {
            'total_cells': 0,
            'completed_cells': 0,
            'failed_cells': 0,
            'total_processing_time': 0.0,
            'average_processing_time': 0.0,
        }

    def _run_cell(self, cell: ExperimentCell, d: FaultDistribution) -> ExperimentCell:
        cell.status = CellStatus.RUNNING
        cell.started_at = datetime.now().isoformat()
        started = time.perf_counter()
        try:
            cell.result = self.placer(d, cell.method, cell.k)
            cell.status = CellStatus.COMPLETED
            logger.info(f"✅ {cell.dist_id} {cell.method.value} k={cell.k}: saved {cell.result.saved}")
        except Exception as e:
            cell.error = e
            cell.status = CellStatus.FAILED
            logger.error(f"❌ {cell.dist_id} {cell.method.value} k={cell.k}: {e}")
        cell.completed_at = datetime.now().isoformat()
        with self._lock:
            self.stats['total_processing_time'] += time.perf_counter() - started
        return cell

    def run(self, distributions: List[Tuple[str, FaultDistribution]], methods: List[PlacementMethod],
            k_values: List[int], omit_timing: bool = False) -> ExperimentReport:
        """One row per (distribution, method, k), in that nesting order."""
        cells = []
        for dist_id, _ in distributions:
            for method in methods:
                for k in k_values:
                    cells.append(ExperimentCell(index=len(cells), dist_id=dist_id, method=method, k=k))
        by_id = dict(distributions)
        self.stats['total_cells'] += len(cells)
        logger.info(f"🚀 Running {len(cells)} cells over {len(distributions)} distributions")

        with ThreadPoolExecutor(max_workers=self.max_workers) as executor:
            scores = dict(zip(by_id, executor.map(self.scorer, by_id.values())))
            list(executor.map(lambda c: self._run_cell(c, by_id[c.dist_id]), cells))

        completed = sum(1 for c in cells if c.status is CellStatus.COMPLETED)
        self.stats['completed_cells'] += completed
        self.stats['failed_cells'] += len(cells) - completed
        if self.stats['total_cells']:
            self.stats['average_processing_time'] = (
                self.stats['total_processing_time'] / self.stats['total_cells']
            )

        rows = pd.DataFrame([c.to_row(scores[c.dist_id], omit_timing).to_record() for c in cells],
                            columns=ROW_COLUMNS)
        report = ExperimentReport(cells=cells, rows=rows, stats=dict(self.stats))
        if cells and completed == 0:
            first = cells[0].error
            raise ExperimentFailedError(f"All {len(cells)} cells failed; first error: {first}",
                                        report=report, cause=first)
        logger.info(f"📊 Experiment finished: {completed}/{len(cells)} cells succeeded")
        return report

    def get_statistics(self) -> Dict[str, Any]:
        return dict(self.stats)
