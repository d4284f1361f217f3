"""
latticenc tracing.

Optional OpenTelemetry spans for experiment runs, coefficient searches and information sweeps.
Until :func:`init` is called every span goes to the global (no-op by default) tracer provider.
"""

import importlib.metadata
import inspect
import logging
from collections.abc import Callable
from contextlib import contextmanager
from enum import Enum
from functools import wraps
from typing import Any

from opentelemetry import trace
from opentelemetry.exporter.otlp.proto.http.trace_exporter import OTLPSpanExporter
from opentelemetry.sdk.resources import Resource
from opentelemetry.sdk.trace import SpanProcessor, TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor
from opentelemetry.trace import Status, StatusCode

from latticenc.utils.serializers import serialize
from latticenc.utils.settings import get_tracing_settings

logger = logging.getLogger(__name__)

try:
    _VERSION = importlib.metadata.version("latticenc")
except importlib.metadata.PackageNotFoundError:
    _VERSION = "unknown"

_initialized = False
_tracer: trace.Tracer | None = None


# ---------------------------------------------------------------------------
# Initialization
# ---------------------------------------------------------------------------


def init(
    endpoint: str | None = None,
    *,
    service_name: str | None = None,
    environment: str | None = None,
    processor: SpanProcessor | None = None,
) -> None:
    """
    Install a tracer provider for latticenc spans.

    Spans are exported over OTLP/HTTP when an endpoint is given or LATTICENC_OTLP_ENDPOINT is set;
    ``processor`` adds any other span processor (tests use an in-memory exporter).
    """
    global _initialized, _tracer

    if _initialized:
        logger.debug("tracing already initialized")
        return

    endpoint, service_name, environment = get_tracing_settings(endpoint, service_name, environment)
    resource = Resource.create({
        "service.name": service_name,
        "service.version": _VERSION,
        "deployment.environment": environment,
    })
    provider = TracerProvider(resource=resource)
    if endpoint is not None:
        provider.add_span_processor(BatchSpanProcessor(OTLPSpanExporter(endpoint=f"{endpoint}/v1/traces")))
    if processor is not None:
        provider.add_span_processor(processor)

    trace.set_tracer_provider(provider)
    _tracer = provider.get_tracer("latticenc", _VERSION)
    _initialized = True
    logger.info("tracing initialized: service=%s, environment=%s, export=%s", service_name, environment, endpoint)


def get_tracer() -> trace.Tracer:
    """The latticenc tracer, or a tracer from the global provider before :func:`init`."""
    if _tracer is not None:
        return _tracer
    return trace.get_tracer("latticenc", _VERSION)


# ---------------------------------------------------------------------------
# Span attribute helpers
# ---------------------------------------------------------------------------


def set_tag(key: str, value) -> None:
    """Add a custom tag to the current span; non-primitive values are serialized."""
    span = trace.get_current_span()
    if not span.is_recording():
        return
    _safe_set_attribute(span, key, value)


def capture_exception(exception: Exception) -> None:
    span = trace.get_current_span()
    if span.is_recording():
        span.record_exception(exception)
        span.set_status(Status(StatusCode.ERROR, str(exception)))


# ---------------------------------------------------------------------------
# Span types and decorators
# ---------------------------------------------------------------------------


class SpanType(str, Enum):
    FUNCTION = "function"
    EXPERIMENT = "experiment"
    SNR_POINT = "snr_point"
    SWEEP = "sweep"


_SKIP_INPUT_TYPES = ("Console", "Progress", "tqdm", "Generator", "TracerProvider", "Tracer", "Span")


def _should_skip_value(value: Any) -> bool:
    return type(value).__name__ in _SKIP_INPUT_TYPES


def _safe_set_attribute(otel_span, key: str, value: Any) -> None:
    """Set a span attribute, coercing the value to an OTel-compatible type."""
    if isinstance(value, (str, bool, int, float)):
        otel_span.set_attribute(key, value)
    elif value is None:
        otel_span.set_attribute(key, "")
    elif isinstance(value, (list, tuple)) and all(isinstance(v, str) for v in value):
        otel_span.set_attribute(key, list(value))
    else:
        otel_span.set_attribute(key, serialize(value))


def observe(span_name: str | None = None, type: SpanType = SpanType.FUNCTION):
    """
    Decorator that traces a function call, recording serialized inputs and outputs.
    """

    def decorator(func: Callable) -> Callable:
        name = span_name or func.__name__
        sig = inspect.signature(func)
        param_names = list(sig.parameters.keys())
        start_idx = 1 if param_names and param_names[0] in ("self", "cls") else 0

        @wraps(func)
        def wrapper(*args, **kwargs):
            with get_tracer().start_as_current_span(name) as otel_span:
                try:
                    otel_span.set_attribute("name", name)
                    otel_span.set_attribute("type", type.value)
                    if otel_span.is_recording():
                        inputs = {}
                        for i, arg in enumerate(args[start_idx:], start=start_idx):
                            if _should_skip_value(arg):
                                continue
                            inputs[param_names[i] if i < len(param_names) else f"arg_{i}"] = arg
                        inputs.update({k: v for k, v in kwargs.items() if not _should_skip_value(v)})
                        otel_span.set_attribute("inputs", serialize(inputs))

                    result = func(*args, **kwargs)

                    if otel_span.is_recording():
                        otel_span.set_attribute("outputs", serialize(result))
                    otel_span.set_status(Status(StatusCode.OK))
                    return result
                except Exception as e:
                    otel_span.record_exception(e)
                    otel_span.set_status(Status(StatusCode.ERROR, str(e)))
                    raise

        return wrapper

    return decorator


@contextmanager
def start_span(name: str, span_type: SpanType = SpanType.FUNCTION, attributes: dict[str, Any] | None = None):
    """Context manager that creates a child span under the current trace.

    Example::

        for snr_db in grid:
            with start_span("snr_point", SpanType.SNR_POINT, {"snr_db": snr_db}):
                ...
                set_tag("frames", frames)
    """
    with get_tracer().start_as_current_span(name) as otel_span:
        otel_span.set_attribute("name", name)
        otel_span.set_attribute("type", span_type.value)
        if attributes:
            for key, value in attributes.items():
                _safe_set_attribute(otel_span, key, value)
        try:
            yield otel_span
        except Exception as e:
            otel_span.record_exception(e)
            otel_span.set_status(Status(StatusCode.ERROR, str(e)))
            raise
        else:
            otel_span.set_status(Status(StatusCode.OK))


def reset() -> None:
    """Forget the installed tracer so :func:`init` can run again (tests only)."""
    global _initialized, _tracer
    _initialized = False
    _tracer = None
