import json
import logging
from pathlib import PurePath

import numpy as np

_MAX_ATTR_LEN = 32_000

logger = logging.getLogger(__name__)


def _default_serializer(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, PurePath):
        return str(obj)
    if isinstance(obj, (set, frozenset)):
        return sorted(obj, key=repr)
    if hasattr(obj, "model_dump"):
        try:
            return obj.model_dump(mode="json")
        except Exception:
            logger.exception("Error serializing object")
    if hasattr(obj, "_asdict"):
        return obj._asdict()
    return str(obj)


def to_json(obj) -> str:
    """Compact JSON for frame traces; numpy arrays become nested lists, complex values [re, im]."""
    return json.dumps(obj, default=_default_serializer, ensure_ascii=False, separators=(",", ":"))


def serialize(obj) -> str:
    """JSON for span attributes, truncated to a bounded length."""
    try:
        raw = to_json(obj)
    except (TypeError, ValueError, OverflowError):
        raw = repr(obj)

    if len(raw) > _MAX_ATTR_LEN:
        return raw[:_MAX_ATTR_LEN] + "…[truncated]"
    return raw
