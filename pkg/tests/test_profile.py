import json
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rowsim.profile import (
    CLASS_BOTH,
    CLASS_HAMMER_ONLY,
    CLASS_PRESS_ONLY,
    CLASS_RETENTION,
    DIR_ONE_TO_ZERO,
    DIR_ZERO_TO_ONE,
    AcminCurve,
    ProfileError,
    builtin_profiles,
    get_profile,
    load_profile,
    materialize_rows,
    profile_from_dict,
    profile_to_dict,
    save_profile,
)

T_RAS = 36.0
T_REFI = 7800.0
T_9REFI = 70200.0
T_30MS = 30e6


def log_log_oracle(anchors, t):
    """Independent geometric interpolation: straight line through the two
    bracketing anchors in (log t, log acmin) space."""
    for (t0, a0), (t1, a1) in zip(anchors, anchors[1:]):
        if t0 <= t <= t1:
            frac = math.log(t / t0) / math.log(t1 / t0)
            return a0 * (a1 / a0) ** frac
    return anchors[-1][1]


class TestAcminCurve:
    def test_exact_at_anchors(self):
        curve = get_profile("paper-mean-80C").curve("single")
        assert curve.acmin_at(T_RAS) == 32000.0
        assert curve.acmin_at(T_REFI) == pytest.approx(32000.0 / 17.6)
        assert curve.acmin_at(T_9REFI) == pytest.approx(32000.0 / 159.4)
        assert curve.acmin_at(T_30MS) == 1.0

    def test_clamps_past_last_anchor(self):
        curve = get_profile("paper-mean-80C").curve("single")
        assert curve.acmin_at(2 * T_30MS) == 1.0

    def test_below_minimum_is_error(self):
        curve = get_profile("paper-mean-80C").curve("single")
        with pytest.raises(ProfileError):
            curve.acmin_at(10.0)

    @given(st.floats(min_value=36.0, max_value=30e6))
    def test_interpolation_matches_log_log_oracle(self, t):
        curve = get_profile("paper-mean-80C").curve("single")
        assert curve.acmin_at(t) == pytest.approx(
            log_log_oracle(curve.anchors, t), rel=1e-9)

    @given(st.floats(min_value=36.0, max_value=60e6),
           st.floats(min_value=1.0, max_value=1e6))
    def test_monotone_non_increasing(self, t, dt):
        curve = get_profile("paper-mean-50C").curve("single")
        assert curve.acmin_at(t + dt) <= curve.acmin_at(t) + 1e-9

    def test_rejects_increasing_acmin(self):
        with pytest.raises(ProfileError):
            AcminCurve(((36.0, 100.0), (100.0, 200.0)))

    def test_rejects_acmin_below_one(self):
        with pytest.raises(ProfileError):
            AcminCurve(((36.0, 0.5),))


class TestWeight:
    def test_normalized_at_t_ras(self):
        for name, profile in builtin_profiles().items():
            for sidedness, temp in profile.curves:
                assert profile.weight(T_RAS, sidedness, temp) == pytest.approx(1.0), name

    def test_reduction_factors(self):
        p80 = get_profile("paper-mean-80C")
        assert p80.weight(T_REFI) == pytest.approx(17.6)
        assert p80.weight(T_9REFI) == pytest.approx(159.4)
        p50 = get_profile("paper-mean-50C")
        assert p50.weight(T_REFI) == pytest.approx(21.0)
        assert p50.weight(T_9REFI) == pytest.approx(190.0)

    @given(st.floats(min_value=36.0, max_value=60e6),
           st.floats(min_value=0.0, max_value=1e6))
    def test_weight_monotone_in_t_on(self, t, dt):
        p = get_profile("paper-mean-80C")
        assert p.weight(t + dt) >= p.weight(t) - 1e-9


class TestTemperatureScaling:
    @pytest.mark.parametrize("mfr,factor", [("S", 0.55), ("H", 0.32), ("M", 0.59)])
    def test_mfr_factors_at_t_refi(self, mfr, factor):
        profile = get_profile(f"paper-mfr{mfr}-50C")
        a50 = profile.acmin_at(T_REFI, "single", 50)
        a80 = profile.acmin_at(T_REFI, "single", 80)
        assert a80 / a50 == pytest.approx(factor, rel=1e-9)

    def test_unknown_temperature_is_error(self):
        with pytest.raises(ProfileError):
            get_profile("paper-mean-80C").acmin_at(T_REFI, "single", 25)


class TestMaterialization:
    def test_deterministic(self):
        p = get_profile("paper-mean-80C")
        a = materialize_rows(p, 32, 128, seed=7)
        b = materialize_rows(p, 32, 128, seed=7)
        assert np.array_equal(a.vuln_class, b.vuln_class)
        assert np.array_equal(a.row_factor, b.row_factor)
        assert np.array_equal(a.flip_direction, b.flip_direction)
        c = materialize_rows(p, 32, 128, seed=8)
        assert not np.array_equal(a.vuln_class, c.vuln_class)

    def test_row_factors_within_bounds(self):
        p = get_profile("paper-mean-80C")
        mat = materialize_rows(p, 256, 64, seed=0)
        rv = p.row_variation
        assert (mat.row_factor >= rv.min_factor).all()
        assert (mat.row_factor <= rv.max_factor).all()

    def test_class_fractions_plausible(self):
        p = get_profile("paper-mean-80C")
        mat = materialize_rows(p, 512, 1024, seed=3)
        n = mat.vuln_class.size
        press_like = np.isin(mat.vuln_class, (CLASS_PRESS_ONLY, CLASS_BOTH)).sum()
        hammer = (mat.vuln_class == CLASS_HAMMER_ONLY).sum()
        assert press_like / n == pytest.approx(p.press_fraction, rel=0.15)
        assert hammer / n == pytest.approx(p.hammer_fraction, rel=0.15)

    def test_overlap_bound_is_hard(self):
        # fraction(Both) / fraction(PressOnly u Both) <= overlap_rh, always.
        p = get_profile("paper-mean-80C")
        for seed in range(5):
            mat = materialize_rows(p, 512, 1024, seed=seed)
            both = (mat.vuln_class == CLASS_BOTH).sum()
            press_like = both + (mat.vuln_class == CLASS_PRESS_ONLY).sum()
            assert both <= p.overlap_rh * press_like

    def test_default_directions(self):
        # Paper-faithful default: press-like cells flip 1->0, hammer-only 0->1.
        p = get_profile("paper-mean-80C")
        mat = materialize_rows(p, 128, 1024, seed=1)
        press_like = np.isin(mat.vuln_class, (CLASS_PRESS_ONLY, CLASS_BOTH))
        assert (mat.flip_direction[press_like] == DIR_ONE_TO_ZERO).all()
        hammer = mat.vuln_class == CLASS_HAMMER_ONLY
        assert (mat.flip_direction[hammer] == DIR_ZERO_TO_ONE).all()

    def test_retention_times_finite_only_for_tail(self):
        p = get_profile("paper-mean-80C")
        mat = materialize_rows(p, 128, 1024, seed=2)
        ret = mat.vuln_class == CLASS_RETENTION
        assert np.isfinite(mat.retention_ns[ret]).all()
        assert np.isinf(mat.retention_ns[~ret]).all()
        tail = p.retention_tail
        assert (mat.retention_ns[ret] >= tail.min_retention_ns).all()
        assert (mat.retention_ns[ret] <= tail.max_retention_ns).all()


class TestSerialization:
    def test_round_trip(self, tmp_path):
        for name, profile in builtin_profiles().items():
            path = tmp_path / f"{name}.json"
            save_profile(profile, path)
            loaded = load_profile(path)
            assert profile_to_dict(loaded) == profile_to_dict(profile), name

    def test_schema_version_present(self):
        d = profile_to_dict(get_profile("desk-16"))
        assert d["schema"] == 1
        # and it survives a JSON round trip
        assert profile_from_dict(json.loads(json.dumps(d))).name == "desk-16"

    def test_unknown_builtin(self):
        with pytest.raises(ProfileError):
            get_profile("no-such-profile")


def test_zero_variation_helper():
    p = get_profile("paper-mean-80C").without_variation()
    mat = materialize_rows(p, 16, 16, seed=0)
    assert (mat.row_factor == 1.0).all()
    assert (mat.threshold_mult == 1.0).all()
