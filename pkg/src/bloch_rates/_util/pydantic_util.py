from typing import Any

import numpy as np
from pydantic import BaseModel


def _serialize_fallback(obj: Any) -> Any:
    """Convert numpy scalars and arrays left in a model to plain JSON values."""
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return repr(obj)


MODEL_DUMP_ARGS = {
    "mode": "json",
    "fallback": _serialize_fallback,
}


def model_dump(obj: BaseModel, **kwargs: Any) -> dict[str, Any]:
    """Dump a Pydantic model to a dictionary using standard settings."""
    return obj.model_dump(**(MODEL_DUMP_ARGS | kwargs))
