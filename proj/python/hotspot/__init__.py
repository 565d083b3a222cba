"""Neural signed distance fields via a screened-Poisson heat loss."""

from hotspot._core import (
    LevelSet,
    NumericalError,
    ParseError,
    PointCloud,
    ScalarGrid,
    TrainingDivergence,
    eval,
    field,
    geometry,
    losses,
    oracles,
    trainer,
)

__all__ = [
    "LevelSet",
    "NumericalError",
    "ParseError",
    "PointCloud",
    "ScalarGrid",
    "TrainingDivergence",
    "eval",
    "field",
    "geometry",
    "losses",
    "oracles",
    "trainer",
]
