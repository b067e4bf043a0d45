"""Environment-driven defaults for the simulator CLI."""

import os
from functools import lru_cache
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field


class Settings(BaseModel):
    """Process-level settings read from the environment (.env supported)"""
    log_level: str = "INFO"
    log_dir: Optional[str] = None
    default_seed: int = Field(default=0, ge=0)
    default_out: str = "out"


@lru_cache()
def get_settings() -> Settings:
    """Get or create the settings instance"""
    load_dotenv()
    return Settings(
        log_level=os.getenv("BEAT_LOG_LEVEL", "INFO").upper(),
        log_dir=os.getenv("BEAT_LOG_DIR") or None,
        default_seed=int(os.getenv("BEAT_DEFAULT_SEED", "0")),
        default_out=os.getenv("BEAT_DEFAULT_OUT", "out"),
    )
