from __future__ import annotations

import sys
from typing import Any, TypeAlias

import numpy as np
import numpy.typing as npt


NodeId = str
LinkId = str
SensorPair = tuple[NodeId, NodeId]
Bounds = tuple[float, float]

FloatArray: TypeAlias = npt.NDArray[np.float64]
IntArray: TypeAlias = npt.NDArray[np.int_]
JSONDict = dict[str, Any]

if sys.version_info >= (3, 11):
    from enum import StrEnum
else:
    from enum import Enum

    class StrEnum(str, Enum):
        """Backport of enum.StrEnum for Python 3.10."""

        def __str__(self) -> str:
            return str(self.value)

        def __format__(self, format_spec: str) -> str:
            return str(self.value).__format__(format_spec)


class HeadLossFormula(StrEnum):
    HAZEN_WILLIAMS = "H-W"
    DARCY_WEISBACH = "D-W"
    CHEZY_MANNING = "C-M"


class ObjectiveKind(StrEnum):
    WEIGHTED_LEAST_SQUARES = "wls"
    WEIGHTED_ABSOLUTE = "wabs"


class SolveStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration-limit"
    UNBOUNDED = "unbounded"


class EstimateStatus(StrEnum):
    CONVERGED = "converged"
    ITERATION_LIMIT = "iteration-limit"
