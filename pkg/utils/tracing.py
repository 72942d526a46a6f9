from __future__ import annotations
from contextlib import contextmanager
from typing import Iterator, Optional
from opentelemetry import trace
from opentelemetry.sdk.resources import SERVICE_NAME, Resource
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor
import logging
from .config import settings


logger = logging.getLogger(__name__)
# Глобальный флаг повторной инициализации
_TRACING_INITIALIZED = False


def setup_tracing(service_name: Optional[str] = None) -> bool:
    """
    Инициализация трассировки (однократно):
      - TracerProvider с ресурсом SERVICE_NAME
      - BatchSpanProcessor + JaegerExporter
    Если tracing_enabled=false: ничего не делаем, API остаётся no-op.
    """
    global _TRACING_INITIALIZED
    if _TRACING_INITIALIZED or not settings.tracing_enabled:
        return _TRACING_INITIALIZED

    # экспортёр импортируем лениво: он нужен только при включённой трассировке
    from opentelemetry.exporter.jaeger.thrift import JaegerExporter

    provider = TracerProvider(
        resource=Resource.create(
            {SERVICE_NAME: service_name or settings.tracing_service_name}
        )
    )
    trace.set_tracer_provider(provider)

    jaeger_exporter = JaegerExporter(
        agent_host_name=settings.jaeger_agent_host,
        agent_port=settings.jaeger_agent_port,
    )
    provider.add_span_processor(BatchSpanProcessor(jaeger_exporter))

    _TRACING_INITIALIZED = True
    return True


def shutdown_tracing() -> None:
    """Корректное завершение: shutdown() у текущего TracerProvider."""
    global _TRACING_INITIALIZED
    try:
        provider = trace.get_tracer_provider()
        if isinstance(provider, TracerProvider):
            provider.shutdown()
    except Exception as e:
        logger.error(f"[tracing] shutdown failed: {e}")
    _TRACING_INITIALIZED = False


@contextmanager
def span(name: str, **attributes) -> Iterator[None]:
    tracer = trace.get_tracer("collapse_lab")
    with tracer.start_as_current_span(name) as sp:
        for key, value in attributes.items():
            sp.set_attribute(key, value)
        yield
