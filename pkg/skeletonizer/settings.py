"""Typed, validated configuration using Pydantic Settings v2.

Every tunable of a coarse-graining run is declared here with its type,
default and range. ``config.py`` imports a singleton ``_settings`` and
re-exports module-level aliases; the CLI layers a JSON config file and
command-line flags on top through :func:`get_settings`.
"""

from __future__ import annotations

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings

VARIANTS = ("standard", "modified")


class TnsSettings(BaseSettings):
    """Skeletonizer configuration: every field maps to a ``TNS_`` env var."""

    model_config = {
        "env_prefix": "TNS_",
        "env_file": ".env",
        "env_file_encoding": "utf-8",
        "extra": "ignore",
    }

    # ── Coarse-graining ──
    chi: int = Field(default=4, ge=1, le=64)
    variant: str = "modified"
    rel_cutoff: float = Field(default=1e-14, ge=0.0, lt=1.0)
    mid_bond: int = Field(default=0, ge=0)  # 0 = chi^2 (2D) / min(chi^2, chi+2) (3D)
    ur_bond: int = Field(default=0, ge=0)  # 0 = uncapped (2D) / chi^3 (3D)
    boundary_bond: int = Field(default=0, ge=0)  # 0 = exact half-cell environment
    bootstrap: bool = True

    # ── Skeletonization (ALS) ──
    als_alpha_rel: float = Field(default=1e-12, gt=0.0)
    als_max_iters: int = Field(default=100, ge=1)
    als_rel_obj_tol: float = Field(default=1e-11, ge=0.0)
    als_restarts: int = Field(default=2, ge=1, le=64)
    als_seed: int = Field(default=0, ge=0)

    # ── Resources ──
    max_intermediate: int = Field(default=2**25, ge=1)  # entries, not bytes
    threads: int = Field(default=1, ge=1, le=256)

    # ── Observables ──
    field_m: float = Field(default=1e-5, gt=0.0)

    # ── Output ──
    output_dir: str = "results"

    # ── Logging ──
    debug: str = ""
    json_logging: str = "0"

    @field_validator("variant")
    @classmethod
    def _check_variant(cls, v: str) -> str:
        v = v.strip().lower()
        if v not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {v!r}")
        return v


def get_settings(**overrides) -> TnsSettings:
    """Create a TnsSettings instance, optionally with overrides."""
    return TnsSettings(**overrides)
