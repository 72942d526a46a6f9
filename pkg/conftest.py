# Среда для всех тестов, до импортов пакетов лаборатории!
import os

# Журнал запусков и Jaeger в тестах не нужны
os.environ["LEDGER_ENABLED"] = "false"
os.environ["TRACING_ENABLED"] = "false"
os.environ["OTEL_SDK_DISABLED"] = "true"

import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
