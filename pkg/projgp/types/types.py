from __future__ import annotations

from typing import Literal, TypeAlias

import numpy as np
import numpy.typing as npt

__all__ = (
    "FloatArray",
    "IntArray",
    "Seed",
    "Family",
    "Method",
    "Inference",
)


FloatArray: TypeAlias = npt.NDArray[np.float64]
IntArray: TypeAlias = npt.NDArray[np.int64]
Seed: TypeAlias = int | np.random.SeedSequence | None

Family: TypeAlias = Literal["rbf", "imq", "cosine"]
Method: TypeAlias = Literal["gaussian", "diverse", "axis", "identity"]
Inference: TypeAlias = Literal["exact", "ski"]
