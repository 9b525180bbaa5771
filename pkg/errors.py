"""Exception hierarchy shared by every stage of the mapper."""
from typing import Optional


class MapperError(Exception):
    """Base class for all errors raised by the pipeline"""


class ConfigError(MapperError):
    """Invalid or inconsistent run configuration"""


class InputFileError(MapperError):
    """A referenced input file is missing or unreadable"""


class GeoJSONParseError(MapperError):
    """Malformed GeoJSON input"""

    def __init__(self, message: str, feature_index: Optional[int] = None, line: Optional[int] = None):
        location = []
        if line is not None:
            location.append(f"line {line}")
        if feature_index is not None:
            location.append(f"feature {feature_index}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.feature_index = feature_index
        self.line = line


class EventParseError(MapperError):
    """Event or POI CSV cannot be ingested"""


class GeometryError(MapperError):
    """Invalid polygon or geometric input"""


class SeedSelectionError(MapperError):
    """Voronoi seeds cannot be derived from the road network"""


class PartitionError(MapperError):
    """A partition cannot be built from the given inputs"""


class GraphError(MapperError):
    """Region graph is inconsistent"""


class DatasetError(MapperError):
    """Temporal dataset cannot be built or split"""


class MetricError(MapperError):
    """A metric is undefined for the given inputs"""


class ModelShapeError(MapperError):
    """Model parameters and inputs disagree on shape"""


class TrainingDivergedError(MapperError):
    """Training produced a non-finite loss"""

    def __init__(self, epoch: int, loss: float):
        super().__init__(f"Training diverged at epoch {epoch} (loss={loss})")
        self.epoch = epoch
        self.loss = loss
