"""
Shared base model and array field type for the schema package.

Every state object in the toolkit is an immutable value: operations return new
instances (``model_copy(update=...)``) instead of mutating, so states can be
handed to concurrent callers without locking.
"""

from typing import Annotated, Any

import numpy as np
from pydantic import BaseModel, ConfigDict, PlainSerializer, PlainValidator


def _to_float_array(value: Any) -> np.ndarray:
    array = np.asarray(value, dtype=float)
    if not np.all(np.isfinite(array)):
        raise ValueError("array contains non-finite values")
    return array


FloatArray = Annotated[
    np.ndarray,
    PlainValidator(_to_float_array),
    PlainSerializer(lambda array: np.asarray(array, dtype=float).tolist(), return_type=list),
]
"""A float numpy array that validates from any sequence and serializes to nested lists."""


class ValueModel(BaseModel):
    """
    Base class for immutable value types.

    :param ConfigDict model_config: Frozen, arbitrary types allowed, extra fields rejected.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True, extra="forbid")
