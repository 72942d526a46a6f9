from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent  # .../collapse_lab/
ENV_FILE = BASE_DIR / ".env"


class Settings(BaseSettings):
    output_root: Path = Field(
        default=Path("runs"),
        description="Корень для output_dir, если в конфиге путь относительный",
    )
    data_dir: Path = Field(
        default=BASE_DIR / "data", description="Где лежит журнал запусков"
    )
    ledger_enabled: bool = True

    log_level: str = "INFO"
    default_workers: int = Field(default=1, ge=1)

    # Трассировка выключена по умолчанию
    tracing_enabled: bool = False
    tracing_service_name: str = "collapse_lab"
    jaeger_agent_host: str = "localhost"
    jaeger_agent_port: int = 6831

    model_config = SettingsConfigDict(
        env_file=str(ENV_FILE),
        extra="ignore",
    )


settings = Settings()


def get_settings() -> Settings:
    """Перечитать окружение (нужно тестам, которые меняют env)."""
    global settings
    settings = Settings()
    return settings
