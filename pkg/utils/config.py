import os
from contextlib import contextmanager
from typing import Iterator, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field

load_dotenv()


class Settings(BaseModel):
    """Tunables shared by the algebra, elimination and sampling services."""

    pair_budget: int = Field(200000, gt=0)
    threads: int = Field(1, ge=1)
    reduce_fractions: bool = True
    pole_threshold: float = Field(1e-12, gt=0)
    simplify_degree_bound: int = Field(4, ge=0)
    simplify_max_unknowns: int = Field(240, gt=0)

    @classmethod
    def from_env(cls) -> "Settings":
        """Build settings, honouring the pair budget and thread count overrides."""
        values = {}
        budget = os.getenv("HYBRIDTRIG_PAIR_BUDGET")
        if budget:
            values["pair_budget"] = int(budget)
        threads = os.getenv("HYBRIDTRIG_THREADS")
        if threads:
            values["threads"] = int(threads)
        return cls(**values)


_active: Optional[Settings] = None


def get_settings() -> Settings:
    """Return the active settings, reading the environment on first use."""
    global _active
    if _active is None:
        _active = Settings.from_env()
    return _active


@contextmanager
def override_settings(**changes) -> Iterator[Settings]:
    """Temporarily replace selected settings."""
    global _active
    previous = get_settings()
    _active = previous.model_copy(update=changes)
    try:
        yield _active
    finally:
        _active = previous
