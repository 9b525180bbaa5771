from typing import List, Dict, Any, Optional, Sequence, Tuple
import io
import json
import logging
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd

from agents.mapping_agent import AssignedEvent
from errors import DatasetError

logger = logging.getLogger(__name__)

DEFAULT_SPLIT = (0.70, 0.15, 0.15)
# guards floor(fraction * T) against representation error such as 0.85 * 20 = 16.999...
_FLOOR_EPS = 1e-9


@dataclass
class CountMatrix:
    counts: np.ndarray
    bin_width: int
    t0: int

    def __post_init__(self):
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim != 2 or self.counts.shape[1] < 1:
            raise DatasetError(f"Count matrix must be regions x T with T >= 1, got shape {self.counts.shape}")
        if np.any(self.counts < 0):
            raise DatasetError("Count matrix has negative entries")

    @property
    def n_regions(self) -> int:
        return self.counts.shape[0]

    @property
    def n_bins(self) -> int:
        return self.counts.shape[1]

    def totals(self) -> np.ndarray:
        return self.counts.sum(axis=1)

    def bin_start(self, t: int) -> int:
        return self.t0 + t * self.bin_width

    def to_csv(self) -> str:
        buf = io.StringIO()
        pd.DataFrame(self.counts).to_csv(buf, header=False, index=False, lineterminator='\n')
        return buf.getvalue()

    def sidecar(self) -> Dict[str, int]:
        return {'t0': int(self.t0), 'bin_width': int(self.bin_width), 'n_regions': self.n_regions, 'T': self.n_bins}

    @classmethod
    def from_files(cls, csv_text: str, sidecar_text: str) -> 'CountMatrix':
        meta = json.loads(sidecar_text)
        counts = pd.read_csv(io.StringIO(csv_text), header=None).to_numpy(dtype=np.int64)
        cm = cls(counts=counts, bin_width=int(meta['bin_width']), t0=int(meta['t0']))
        if cm.n_regions != meta['n_regions'] or cm.n_bins != meta['T']:
            raise DatasetError("Count matrix CSV disagrees with its sidecar")
        return cm


@dataclass
class WindowSample:
    input: np.ndarray
    target: np.ndarray
    t: int

    @property
    def window(self) -> int:
        return self.input.shape[1]

    @property
    def last_bin(self) -> int:
        """Index of the target bin."""
        return self.t + self.window


@dataclass
class SplitDataset:
    train: List[WindowSample]
    val: List[WindowSample]
    test: List[WindowSample]
    boundaries: Tuple[int, int]
    n_bins: int
    dropped: int = 0

    def split(self, name: str) -> List[WindowSample]:
        if name not in ('train', 'val', 'test'):
            raise DatasetError(f"Unknown split '{name}'")
        return getattr(self, name)


class DatasetAgent:
    """Agent responsible for turning assigned events into supervised windows"""

    def __init__(self, bin_width: int = 86400, window: int = 12, fractions: Sequence[float] = DEFAULT_SPLIT):
        self.bin_width = int(bin_width)
        self.window = int(window)
        self.fractions = tuple(fractions)
        logger.info(f"DatasetAgent initialized (bin={self.bin_width}s, window={self.window})")

    def bin_events(self, assigned: Sequence[AssignedEvent], n_regions: int,
                   bin_width: Optional[int] = None) -> CountMatrix:
        """Node x time counts; events outside every region are excluded."""
        width = int(bin_width or self.bin_width)
        if width <= 0:
            raise DatasetError("bin_width must be positive")
        inside = [(a.region_id, a.timestamp) for a in assigned if a.region_id is not None]
        if not inside:
            raise DatasetError("No events were assigned to any region; check that the partition bbox covers the events")
        regions = np.fromiter((r for r, _ in inside), dtype=np.int64, count=len(inside))
        stamps = np.fromiter((t for _, t in inside), dtype=np.int64, count=len(inside))
        t0 = (int(stamps.min()) // width) * width
        n_bins = (int(stamps.max()) - t0) // width + 1
        bins = (stamps - t0) // width
        counts = np.zeros((n_regions, n_bins), dtype=np.int64)
        np.add.at(counts, (regions, bins), 1)
        logger.info(f"📊 Binned {len(inside)} events into {n_regions} x {n_bins} bins of {width}s")
        return CountMatrix(counts=counts, bin_width=width, t0=t0)

    def make_windows(self, cm: CountMatrix, window: Optional[int] = None) -> List[WindowSample]:
        w = int(window or self.window)
        if w < 1:
            raise DatasetError("window must be >= 1")
        if w >= cm.n_bins:
            raise DatasetError(f"window W={w} must be smaller than the number of bins T={cm.n_bins}; "
                               f"use a smaller window or bin_width")
        return [
            WindowSample(input=cm.counts[:, t:t + w], target=(cm.counts[:, t + w] > 0).astype(np.int64), t=t)
            for t in range(cm.n_bins - w)
        ]

    def chronological_split(self, samples: Sequence[WindowSample], fractions: Optional[Sequence[float]] = None,
                            n_bins: Optional[int] = None) -> SplitDataset:
        """
        Cut bin indices at floor(f1*T) and floor((f1+f2)*T).

        A sample joins a split only when its whole range [t, t+W] lies inside
        that split's bins; samples straddling a boundary are dropped.
        """
        fr = tuple(fractions or self.fractions)
        if len(fr) != 3 or any(f < 0 for f in fr) or abs(sum(fr) - 1.0) > 1e-9:
            raise DatasetError(f"Split fractions must be three non-negative numbers summing to 1, got {fr}")
        if len(samples) < 3:
            raise DatasetError(f"Need at least 3 samples to split, got {len(samples)}")
        total_bins = n_bins if n_bins is not None else max(s.last_bin for s in samples) + 1
        b1 = int(math.floor(fr[0] * total_bins + _FLOOR_EPS))
        b2 = int(math.floor((fr[0] + fr[1]) * total_bins + _FLOOR_EPS))

        train, val, test = [], [], []
        dropped = 0
        for s in samples:
            lo, hi = s.t, s.last_bin
            if hi < b1:
                train.append(s)
            elif lo >= b1 and hi < b2:
                val.append(s)
            elif lo >= b2 and hi < total_bins:
                test.append(s)
            else:
                dropped += 1
        for name, part in (('train', train), ('val', val), ('test', test)):
            if not part:
                raise DatasetError(f"The {name} split is empty (T={total_bins}, boundaries=({b1}, {b2})); "
                                   f"try a smaller window or bin_width")
        logger.info(f"✅ Split {len(samples)} windows at bins ({b1}, {b2}): "
                    f"train={len(train)} val={len(val)} test={len(test)} dropped={dropped}")
        return SplitDataset(train=train, val=val, test=test, boundaries=(b1, b2), n_bins=total_bins, dropped=dropped)

    def describe(self, dataset: SplitDataset) -> Dict[str, Any]:
        """Positive-label rate per split, for class-imbalance audits"""
        report: Dict[str, Any] = {'boundaries': list(dataset.boundaries), 'dropped': dataset.dropped}
        for name in ('train', 'val', 'test'):
            samples = dataset.split(name)
            labels = np.concatenate([s.target for s in samples]) if samples else np.zeros(0)
            rate = float(labels.mean()) if labels.size else 0.0
            report[name] = {'samples': len(samples), 'positive_rate': round(rate, 6)}
            logger.info(f"   {name}: {len(samples)} windows, positive rate {rate:.3f}")
        return report
