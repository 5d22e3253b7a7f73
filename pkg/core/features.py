"""
Digraph timing features and their standardization.

One sample per consecutive stroke pair (i, i+1):

    hold = R_i - P_i          ud = P_{i+1} - R_i
    dd   = P_{i+1} - P_i      uu = R_{i+1} - R_i
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence, Tuple, Union

import numpy as np

from .errors import InsufficientData, MalformedLine
from .events import KeystrokeLog


logger = logging.getLogger(__name__)

FEATURE_NAMES = ("hold_ms", "ud_ms", "dd_ms", "uu_ms")
N_FEATURES = len(FEATURE_NAMES)
STD_FLOOR = 1e-6


@dataclass(frozen=True)
class DigraphFeatures:
    hold_ms: float
    ud_ms: float
    dd_ms: float
    uu_ms: float

    def as_array(self) -> np.ndarray:
        return np.array([self.hold_ms, self.ud_ms, self.dd_ms, self.uu_ms], dtype=np.float64)


class FeatureMatrix:
    """Ordered digraph samples, stored as an (n, 4) float64 array."""

    __slots__ = ("values",)

    def __init__(self, values: Union[np.ndarray, Sequence[Sequence[float]]]):
        array = np.array(values, dtype=np.float64)
        if array.size == 0:
            array = np.empty((0, N_FEATURES), dtype=np.float64)
        if array.ndim != 2 or array.shape[1] != N_FEATURES:
            raise ValueError(f"feature matrix must have shape (n, {N_FEATURES}), got {array.shape}")
        array.setflags(write=False)
        self.values = array

    @classmethod
    def empty(cls) -> "FeatureMatrix":
        return cls(np.empty((0, N_FEATURES)))

    @classmethod
    def concat(cls, parts: Sequence["FeatureMatrix"]) -> "FeatureMatrix":
        if not parts:
            return cls.empty()
        return cls(np.vstack([part.values for part in parts]))

    def __len__(self) -> int:
        return self.values.shape[0]

    def __iter__(self) -> Iterator[DigraphFeatures]:
        for row in self.values:
            yield DigraphFeatures(*(float(v) for v in row))

    def __getitem__(self, index: int) -> DigraphFeatures:
        return DigraphFeatures(*(float(v) for v in self.values[index]))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FeatureMatrix):
            return NotImplemented
        return np.array_equal(self.values, other.values)

    def __repr__(self) -> str:
        return f"FeatureMatrix(rows={len(self)})"


@dataclass(frozen=True)
class Scaler:
    """Per-column z-score parameters fitted on training features."""

    mean: Tuple[float, float, float, float]
    std: Tuple[float, float, float, float]

    @classmethod
    def identity(cls) -> "Scaler":
        return cls((0.0,) * N_FEATURES, (1.0,) * N_FEATURES)

    def transform(self, values: np.ndarray) -> np.ndarray:
        return (values - np.asarray(self.mean)) / np.asarray(self.std)


def extract_features(log: KeystrokeLog) -> FeatureMatrix:
    """
    Compute (hold, UD, DD, UU) for every consecutive stroke pair.

    Args:
        log: Validated keystroke log

    Returns:
        FeatureMatrix with stroke_count - 1 rows (empty for fewer than 2 strokes)
    """
    press, release = log.stroke_times()
    if len(press) < 2:
        return FeatureMatrix.empty()

    hold = release[:-1] - press[:-1]
    ud = press[1:] - release[:-1]
    dd = press[1:] - press[:-1]
    uu = release[1:] - release[:-1]
    return FeatureMatrix(np.column_stack([hold, ud, dd, uu]))


def fit_scaler(train: FeatureMatrix, std_floor: float = STD_FLOOR) -> Scaler:
    """
    Fit per-column mean and population standard deviation.

    Raises:
        InsufficientData: If train has fewer than 2 rows
    """
    if len(train) < 2:
        raise InsufficientData(f"need at least 2 feature rows to fit a scaler, got {len(train)}")
    mean = train.values.mean(axis=0)
    std = np.maximum(train.values.std(axis=0), std_floor)
    return Scaler(tuple(float(v) for v in mean), tuple(float(v) for v in std))


def apply_scaler(matrix: FeatureMatrix, scaler: Scaler) -> FeatureMatrix:
    return FeatureMatrix(scaler.transform(matrix.values))


def serialize_features_csv(matrix: FeatureMatrix) -> str:
    lines = [",".join(FEATURE_NAMES)]
    lines.extend(",".join(f"{v:.6f}" for v in row) for row in matrix.values)
    return "\n".join(lines) + "\n"


def parse_features_csv(source: str) -> FeatureMatrix:
    lines = [line.strip() for line in source.splitlines() if line.strip()]
    if not lines or lines[0] != ",".join(FEATURE_NAMES):
        raise MalformedLine("line=1 missing feature header " + ",".join(FEATURE_NAMES))
    rows = []
    for line_no, line in enumerate(lines[1:], 2):
        fields = line.split(",")
        if len(fields) != N_FEATURES:
            raise MalformedLine(f"line={line_no} expected {N_FEATURES} fields, got {len(fields)}")
        try:
            rows.append([float(v) for v in fields])
        except ValueError:
            raise MalformedLine(f"line={line_no} non-numeric feature value") from None
    return FeatureMatrix(rows)


def load_features_csv(path: Union[str, Path]) -> FeatureMatrix:
    return parse_features_csv(Path(path).read_text(encoding="utf-8"))
