"""Configuration: settings singleton, logger and module-level aliases.

All values are sourced from ``TnsSettings`` (pydantic-settings) for type
safety and validation. Library modules read their defaults from the
aliases below and log through ``log``.
"""

from __future__ import annotations

from .logging_setup import configure_logging
from .settings import TnsSettings

# ── Settings singleton ──
_settings = TnsSettings()

# ── Logging (structlog bridge with JSON toggle) ──
log = configure_logging()

# ── Coarse-graining ──
DEFAULT_CHI = _settings.chi
DEFAULT_VARIANT = _settings.variant
REL_CUTOFF = _settings.rel_cutoff
MID_BOND = _settings.mid_bond
UR_BOND = _settings.ur_bond
BOUNDARY_BOND = _settings.boundary_bond
BOOTSTRAP = _settings.bootstrap

# ── ALS ──
ALS_ALPHA_REL = _settings.als_alpha_rel
ALS_MAX_ITERS = _settings.als_max_iters
ALS_REL_OBJ_TOL = _settings.als_rel_obj_tol
ALS_RESTARTS = _settings.als_restarts
ALS_SEED = _settings.als_seed

# ── Resources ──
MAX_INTERMEDIATE = _settings.max_intermediate
THREADS = _settings.threads

# ── Observables ──
FIELD_M = _settings.field_m


def validate_config(settings: TnsSettings | None = None) -> None:
    """Raise ``RuntimeError`` listing every inconsistent setting."""
    s = settings or _settings
    problems = []
    if s.mid_bond and s.mid_bond < s.chi:
        problems.append(f"TNS_MID_BOND={s.mid_bond} is below TNS_CHI={s.chi}")
    if s.ur_bond and s.ur_bond < s.chi:
        problems.append(f"TNS_UR_BOND={s.ur_bond} is below TNS_CHI={s.chi}")
    if s.boundary_bond and s.boundary_bond < s.chi:
        problems.append(f"TNS_BOUNDARY_BOND={s.boundary_bond} is below TNS_CHI={s.chi}")
    if s.max_intermediate < s.chi**4:
        problems.append(f"TNS_MAX_INTERMEDIATE={s.max_intermediate} cannot hold a chi^4 tensor")
    if problems:
        raise RuntimeError("Invalid configuration: " + "; ".join(problems))
