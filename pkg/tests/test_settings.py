"""Tests for skeletonizer.settings and skeletonizer.config."""

import pytest


class TestTnsSettingsDefaults:
    """Default values."""

    def test_default_coarse_graining(self):
        from skeletonizer.settings import TnsSettings

        s = TnsSettings()
        assert s.chi == 4
        assert s.variant == "modified"
        assert s.rel_cutoff == 1e-14
        assert s.mid_bond == 0
        assert s.ur_bond == 0
        assert s.boundary_bond == 0
        assert s.bootstrap is True

    def test_default_als(self):
        from skeletonizer.settings import TnsSettings

        s = TnsSettings()
        assert s.als_max_iters == 100
        assert s.als_restarts == 2
        assert s.als_seed == 0

    def test_default_resources_and_observables(self):
        from skeletonizer.settings import TnsSettings

        s = TnsSettings()
        assert s.threads == 1
        assert s.max_intermediate == 2**25
        assert s.field_m == 1e-5
        assert s.output_dir == "results"


class TestTnsSettingsEnvOverride:
    """Env vars override defaults."""

    def test_env_overrides_chi(self, monkeypatch):
        monkeypatch.setenv("TNS_CHI", "8")
        from skeletonizer.settings import TnsSettings

        assert TnsSettings().chi == 8

    def test_env_overrides_variant(self, monkeypatch):
        monkeypatch.setenv("TNS_VARIANT", "standard")
        from skeletonizer.settings import TnsSettings

        assert TnsSettings().variant == "standard"

    def test_get_settings_overrides_env(self, monkeypatch):
        monkeypatch.setenv("TNS_CHI", "8")
        from skeletonizer.settings import get_settings

        assert get_settings(chi=6).chi == 6

    def test_unknown_keys_ignored(self):
        from skeletonizer.settings import get_settings

        s = get_settings(chi=5, not_a_setting=1)
        assert s.chi == 5
        assert not hasattr(s, "not_a_setting")


class TestTnsSettingsValidation:
    """Type validation and constraints."""

    def test_chi_rejects_zero(self):
        from skeletonizer.settings import TnsSettings

        with pytest.raises(ValueError):
            TnsSettings(chi=0)

    def test_variant_rejects_unknown(self):
        from skeletonizer.settings import TnsSettings

        with pytest.raises(ValueError):
            TnsSettings(variant="sideways")

    def test_variant_normalized(self):
        from skeletonizer.settings import TnsSettings

        assert TnsSettings(variant=" Standard ").variant == "standard"

    def test_field_m_must_be_positive(self):
        from skeletonizer.settings import TnsSettings

        with pytest.raises(ValueError):
            TnsSettings(field_m=0.0)

    def test_threads_rejects_zero(self):
        from skeletonizer.settings import TnsSettings

        with pytest.raises(ValueError):
            TnsSettings(threads=0)


class TestConfigAliases:
    """Module-level aliases in config.py stay intact."""

    def test_config_module_attrs_exist(self):
        from skeletonizer import config

        for attr in (
            "DEFAULT_CHI",
            "DEFAULT_VARIANT",
            "REL_CUTOFF",
            "MID_BOND",
            "UR_BOND",
            "BOUNDARY_BOND",
            "BOOTSTRAP",
            "ALS_ALPHA_REL",
            "ALS_MAX_ITERS",
            "ALS_REL_OBJ_TOL",
            "ALS_RESTARTS",
            "ALS_SEED",
            "MAX_INTERMEDIATE",
            "THREADS",
            "FIELD_M",
            "log",
        ):
            assert hasattr(config, attr), attr

    def test_validate_config_accepts_defaults(self):
        from skeletonizer.config import validate_config
        from skeletonizer.settings import TnsSettings

        validate_config(TnsSettings())

    def test_validate_config_lists_every_problem(self):
        from skeletonizer.config import validate_config
        from skeletonizer.settings import TnsSettings

        s = TnsSettings(chi=8, mid_bond=4, ur_bond=2)
        with pytest.raises(RuntimeError) as exc:
            validate_config(s)
        assert "TNS_MID_BOND" in str(exc.value)
        assert "TNS_UR_BOND" in str(exc.value)

    def test_validate_config_intermediate_cap(self):
        from skeletonizer.config import validate_config
        from skeletonizer.settings import TnsSettings

        with pytest.raises(RuntimeError, match="TNS_MAX_INTERMEDIATE"):
            validate_config(TnsSettings(chi=4, max_intermediate=100))

    def test_validate_config_boundary_bond(self):
        from skeletonizer.config import validate_config
        from skeletonizer.settings import TnsSettings

        validate_config(TnsSettings(chi=4, boundary_bond=16))
        with pytest.raises(RuntimeError, match="TNS_BOUNDARY_BOND"):
            validate_config(TnsSettings(chi=4, boundary_bond=2))

    def test_no_unused_aliases(self):
        from skeletonizer import config

        for attr in ("OUTPUT_DIR", "DEBUG", "JSON_LOGGING", "TNS_VERSION"):
            assert not hasattr(config, attr), attr
