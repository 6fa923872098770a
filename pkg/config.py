"""
Configuration management for DataLair.

Environment-specific settings with defaults and validation. Every field can
be overridden through a ``DLR_``-prefixed environment variable or a ``.env``
file.
"""

from enum import Enum
from typing import Optional

from pydantic import Field, SecretStr, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from models.device import ModeConfig, PhiPolicy, KdfParams


class Environment(str, Enum):
    """Supported runtime environments"""

    DEVELOPMENT = "development"
    TESTING = "testing"
    STAGING = "staging"
    PRODUCTION = "production"


class LogLevel(str, Enum):
    """Supported logging levels"""

    DEBUG = "DEBUG"
    INFO = "INFO"
    WARNING = "WARNING"
    ERROR = "ERROR"
    CRITICAL = "CRITICAL"


class Settings(BaseSettings):
    """
    Application settings with environment variable support.

    Variables use the ``DLR_`` prefix, e.g. ``DLR_SELECTION_ROUNDS=5`` or
    ``DLR_PUB_PW``.
    """

    model_config = SettingsConfigDict(
        env_prefix="DLR_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # --- Environment Configuration ---
    environment: Environment = Field(
        default=Environment.DEVELOPMENT, description="Runtime environment"
    )
    debug: bool = Field(default=False, description="Enable debug mode")

    # --- Application Configuration ---
    app_name: str = Field(default="DataLair", description="Application name")
    app_version: str = Field(default="1.0.0", description="Application version")

    # --- Device Configuration ---
    block_size: int = Field(default=4096, description="Block size in bytes")
    default_blocks: int = Field(
        default=16384, description="Block count used when init omits --blocks"
    )
    stash_capacity: int = Field(
        default=50, description="Maximum stash entries before overflow"
    )
    stash_region_blocks: int = Field(
        default=64, description="Blocks reserved for the persisted stash"
    )

    # --- Selection Protocol Configuration ---
    selection_rounds: int = Field(
        default=5, description="Rounds (k) per free-block selection run"
    )
    legacy_selection: bool = Field(
        default=False,
        description="Use the random-set selection with duplicate discard",
    )
    bitmap_on_disk: bool = Field(
        default=True, description="Persist the N-FBM bitmap with per-round relocation"
    )

    # --- Hidden Coupling Configuration ---
    phi: int = Field(
        default=1, description="Hidden steps performed per eligible public write"
    )
    phi_policy: PhiPolicy = Field(
        default=PhiPolicy.EVERY_WRITE, description="Which public writes carry hidden steps"
    )
    phi_every: int = Field(
        default=1, description="Public writes per hidden step for every_n/updates_only"
    )
    hidden_queue_capacity: int = Field(
        default=256, description="Maximum queued hidden writes"
    )

    # --- Key Derivation Configuration ---
    kdf_time_cost: int = Field(default=3, description="argon2id iterations")
    kdf_memory_cost: int = Field(default=65536, description="argon2id memory in KiB")
    kdf_parallelism: int = Field(default=4, description="argon2id lanes")

    # --- Credentials ---
    pub_pw: Optional[SecretStr] = Field(default=None, description="Public password")
    hid_pw: Optional[SecretStr] = Field(default=None, description="Hidden password")

    # --- Randomness Configuration ---
    seed: Optional[int] = Field(
        default=None, description="Seed for deterministic randomness (tests only)"
    )

    # --- Harness Configuration ---
    alpha: float = Field(default=0.01, description="Family-wise significance level")
    game_rounds: int = Field(default=2000, description="Default PD-CPA game rounds")
    zipf_exponent: float = Field(default=1.0, description="Zipfian workload exponent")

    # --- Logging Configuration ---
    log_level: LogLevel = Field(default=LogLevel.INFO, description="Logging level")
    log_file: Optional[str] = Field(
        default=None, description="Log file path (if None, logs to stderr only)"
    )
    log_max_size: int = Field(
        default=10 * 1024 * 1024,  # 10MB
        description="Maximum log file size in bytes",
    )
    log_backup_count: int = Field(
        default=5, description="Number of log backup files to keep"
    )

    @field_validator("environment", mode="before")
    @classmethod
    def validate_environment(cls, v):
        """Validate and normalize environment value"""
        if isinstance(v, str):
            return v.lower()
        return v

    @field_validator("log_level", mode="before")
    @classmethod
    def validate_log_level(cls, v):
        """Validate and normalize log level"""
        if isinstance(v, str):
            return v.upper()
        return v

    @field_validator("phi_policy", mode="before")
    @classmethod
    def validate_phi_policy(cls, v):
        """Accept policy names in any case"""
        if isinstance(v, str):
            return v.lower()
        return v

    @field_validator("block_size")
    @classmethod
    def validate_block_size(cls, v):
        """Block size must be a power of two of at least 512 bytes"""
        if v < 512 or v & (v - 1):
            raise ValueError("Block size must be a power of two >= 512")
        return v

    @field_validator("selection_rounds", "phi_every", "stash_capacity", "hidden_queue_capacity")
    @classmethod
    def validate_positive(cls, v):
        """Counts that must be at least 1"""
        if v < 1:
            raise ValueError("Value must be at least 1")
        return v

    @field_validator("phi")
    @classmethod
    def validate_phi(cls, v):
        """Validate hidden step multiplier"""
        if v < 0:
            raise ValueError("phi must be non-negative")
        return v

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, v):
        """Validate significance level"""
        if not 0.0 < v < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        return v

    @property
    def is_development(self) -> bool:
        """Check if running in development environment"""
        return self.environment == Environment.DEVELOPMENT

    @property
    def is_production(self) -> bool:
        """Check if running in production environment"""
        return self.environment == Environment.PRODUCTION

    @property
    def kdf_params(self) -> KdfParams:
        """argon2id parameters written into newly formatted superblocks"""
        return KdfParams(
            time_cost=self.kdf_time_cost,
            memory_cost=self.kdf_memory_cost,
            parallelism=self.kdf_parallelism,
        )

    def mode_config(self) -> ModeConfig:
        """Protocol knobs shared by the device and the harness"""
        return ModeConfig(
            selection_rounds=self.selection_rounds,
            phi=self.phi,
            phi_policy=self.phi_policy,
            phi_every=self.phi_every,
            legacy_selection=self.legacy_selection,
            bitmap_on_disk=self.bitmap_on_disk,
            hidden_queue_capacity=self.hidden_queue_capacity,
        )


# Global settings instance
settings = Settings()


def get_settings() -> Settings:
    """Get application settings instance"""
    return settings


def reload_settings() -> Settings:
    """Reload settings from environment (useful for testing)"""
    global settings
    settings = Settings()
    return settings
