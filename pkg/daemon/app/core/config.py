from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict
from pathlib import Path

# Get project root (3 levels up from this file)
PROJECT_ROOT = Path(__file__).parent.parent.parent.parent
DAEMON_ROOT = PROJECT_ROOT / "daemon"

SOCIAL_CHANNELS = (6, 44, 149)


class Settings(BaseSettings):
    """Daemon settings.

    Every field can be overridden from the environment (``AWDL_`` prefix) or
    from the ``.env`` file at the repository root.
    """

    model_config = SettingsConfigDict(
        env_file=str(PROJECT_ROOT / ".env"),
        env_prefix="AWDL_",
        case_sensitive=True,
        extra="ignore",
    )

    PROJECT_NAME: str = "awdl-engine"
    VERSION: str = "1.0.0"

    # Node defaults
    DEFAULT_CHANNEL: int = 6
    DEFAULT_HOSTNAME: str = "linux-awdl"
    DEFAULT_SEED: int = 0
    AF_PERIOD_TU: int = 110
    PEER_TIMEOUT_MS: int = 3000

    # Election
    ELECTION_FRESH_MS: int = 2000
    MAX_DISTANCE: int = 10

    # Advertised in the version TLV
    AWDL_VERSION: int = 0x10
    DEVICE_CLASS: int = 2

    # Simulator
    SIM_CHUNK_SIZE: int = 1024  # Default chunk size for byte-exchange directives

    # Logging
    LOG_LEVEL: str = "INFO"
    STATS_FLUSH_EVERY: int = 1  # Flush the stats file every N records

    @field_validator("DEFAULT_CHANNEL")
    @classmethod
    def _social_channel(cls, value: int) -> int:
        if value not in SOCIAL_CHANNELS:
            raise ValueError(f"DEFAULT_CHANNEL must be one of {SOCIAL_CHANNELS}, got {value}")
        return value

    @field_validator("AF_PERIOD_TU", "PEER_TIMEOUT_MS", "ELECTION_FRESH_MS", "MAX_DISTANCE", "SIM_CHUNK_SIZE")
    @classmethod
    def _positive(cls, value: int) -> int:
        if value <= 0:
            raise ValueError("must be positive")
        return value


# Create singleton instance
settings = Settings()
