import os

DEFAULT_SERVICE_NAME = "latticenc"
DEFAULT_ENVIRONMENT = "development"
DEFAULT_BIT_WIDTH = 64


def get_tracing_settings(
    endpoint: str | None = None,
    service_name: str | None = None,
    environment: str | None = None,
) -> tuple[str | None, str, str]:
    endpoint = endpoint or os.getenv("LATTICENC_OTLP_ENDPOINT") or None
    if endpoint is not None:
        endpoint = endpoint.rstrip("/")

    service_name = service_name or os.getenv("LATTICENC_SERVICE_NAME") or DEFAULT_SERVICE_NAME
    environment = environment or os.getenv("LATTICENC_ENVIRONMENT") or DEFAULT_ENVIRONMENT

    return endpoint, service_name, environment


def get_worker_count(workers: int | None = None) -> int:
    if workers is None:
        raw = os.getenv("LATTICENC_WORKERS")
        workers = int(raw) if raw else 1
    return max(1, workers)


def get_bit_width() -> int:
    raw = os.getenv("LATTICENC_BIT_WIDTH")
    if not raw:
        return DEFAULT_BIT_WIDTH
    width = int(raw)
    if width < 8:
        raise ValueError(f"LATTICENC_BIT_WIDTH must be at least 8, got {width}")
    return width
