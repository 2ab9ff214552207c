import math

import numpy as np
import pytest

from resetloop.controllers import (
    CONTROLLER_NAMES,
    ControllerSpec,
    build,
    build_reset_part,
    design_cglp,
    phase_margin,
    tune_gain_for_bandwidth,
)
from resetloop.errors import (
    ControllerSpecError,
    DesignInfeasibleError,
    MarginUndefinedError,
    TuningError,
)
from resetloop.harmonic_analysis import df, open_loop_harmonic
from resetloop.lti import RationalTF, freq_response
from resetloop.plant import PlantModel, default_stage

W_C = 2 * math.pi * 150.0
PI2D_PHASE_LOSS = math.degrees(math.atan(0.2))  # extra integrator at w_i2 = w_c/5


def pid_reference_tf(spec: ControllerSpec) -> RationalTF:
    num = spec.k_p * np.polymul(
        [1.0, spec.omega_i], [1.0 / spec.omega_d, 1.0]
    )
    den = np.polymul(
        [1.0, 0.0],
        np.polymul([1.0 / spec.omega_t, 1.0], [1.0 / spec.omega_f, 1.0]),
    )
    return RationalTF(tuple(num), tuple(den))


class TestSpecValidation:
    def test_unknown_name(self):
        with pytest.raises(ControllerSpecError, match="valid"):
            ControllerSpec(name="PIDD")

    def test_custom_requires_structure(self):
        with pytest.raises(ControllerSpecError, match="structure"):
            ControllerSpec(name="custom")

    def test_custom_with_structure(self):
        spec = ControllerSpec(name="custom", structure="PICID", omega_i2=100.0)
        ctrl = build(spec)
        assert any(ctrl.reset_flags)

    def test_corner_ordering(self):
        with pytest.raises(ControllerSpecError, match="omega_d"):
            ControllerSpec(omega_d=5000.0, omega_t=4714.0)

    def test_conflicting_structure(self):
        with pytest.raises(ControllerSpecError, match="conflicts"):
            ControllerSpec(name="PID", structure="PI2D")

    def test_nonpositive_corner(self):
        with pytest.raises(ControllerSpecError):
            ControllerSpec(omega_i=-1.0)


class TestBuild:
    def test_pid_matches_polynomial(self):
        spec = ControllerSpec(name="PID")
        ctrl = build(spec)
        ref = pid_reference_tf(spec)
        for w in np.logspace(0, 4, 60):
            got = freq_response(ctrl.base, w)
            assert got == pytest.approx(ref(1j * w), rel=1e-9)

    def test_pi2d_phase_loss(self):
        pid = build(ControllerSpec(name="PID"))
        pi2d = build(ControllerSpec(name="PI2D"))
        dphi = np.degrees(
            np.angle(freq_response(pid.base, W_C))
            - np.angle(freq_response(pi2d.base, W_C))
        )
        assert dphi == pytest.approx(PI2D_PHASE_LOSS, abs=1e-9)

    @pytest.mark.parametrize("name", ["C_LPF", "C_HPF", "C_IbLPF", "C_IbHPF"])
    def test_bandpass_reset_disabled_equals_pi2d(self, name):
        bp = build(ControllerSpec(name=name)).with_flags_cleared()
        pi2d = build(ControllerSpec(name="PI2D"))
        for w in np.logspace(-2, 4, 40):
            ref = freq_response(pi2d.base, w)
            assert abs(freq_response(bp.base, w) - ref) <= 1e-9 * abs(ref)

    def test_exactly_one_resetting_state_per_bandpass_variant(self):
        for name in ("C_IbLPF", "C_IbHPF", "C_LPF", "C_HPF"):
            ctrl = build(ControllerSpec(name=name))
            assert sum(ctrl.reset_flags) == 1

    def test_linear_controllers_have_no_flags(self):
        for name in ("PID", "PI2D"):
            assert build(ControllerSpec(name=name)).is_linear


class TestDesignCglp:
    def test_zero_target_is_pass_through(self):
        w_r, w_ra = design_cglp(0.0, W_C)
        assert math.isinf(w_r) and math.isinf(w_ra)
        elem = build_reset_part(ControllerSpec(name="CGLP_PI2D", omega_r=w_r,
                                               omega_ralpha=w_ra))
        assert abs(np.degrees(np.angle(df(elem, W_C)))) <= 0.1

    def test_meets_phase_target(self):
        for target in (5.0, 11.0, 20.0):
            w_r, w_ra = design_cglp(target, W_C)
            elem = build_reset_part(
                ControllerSpec(name="CGLP_PI2D", omega_r=w_r, omega_ralpha=w_ra)
            )
            assert np.degrees(np.angle(df(elem, W_C))) == pytest.approx(target, abs=0.1)

    def test_more_lead_needs_lower_corner(self):
        w_r_11, _ = design_cglp(11.0, W_C)
        w_r_20, _ = design_cglp(20.0, W_C)
        assert w_r_20 < w_r_11

    def test_infeasible_target(self):
        with pytest.raises(DesignInfeasibleError):
            design_cglp(55.0, W_C)

    def test_gain_check_failure_reported(self):
        # a large gain-correction factor dents the element's flatness
        with pytest.raises(DesignInfeasibleError, match="constant-gain"):
            design_cglp(11.0, W_C, alpha=2.5)


class TestGainTuning:
    def test_closed_form_for_pure_mass(self):
        plant = PlantModel(form="pure_mass", m=1.0)
        ctrl = build(ControllerSpec(name="PID"))
        k = tune_gain_for_bandwidth(ctrl, plant, W_C)
        expected = W_C**2 / abs(freq_response(ctrl.base, W_C))
        assert k == pytest.approx(expected, rel=1e-6)

    def test_plant_gain_homogeneity(self):
        ctrl = build(ControllerSpec(name="PID"))
        k1 = tune_gain_for_bandwidth(ctrl, PlantModel(form="pure_mass", m=1.0), W_C)
        k2 = tune_gain_for_bandwidth(
            ctrl, PlantModel(form="pure_mass", m=1.0, gain=2.0), W_C
        )
        assert k2 == pytest.approx(k1 / 2.0, rel=1e-12)

    def test_all_eight_reach_unit_crossover(self):
        plant = default_stage()
        pss = plant.to_state_space()
        for name in CONTROLLER_NAMES:
            ctrl = build(ControllerSpec(name=name))
            k = tune_gain_for_bandwidth(ctrl, plant, W_C)
            mag = abs(open_loop_harmonic(ctrl.scaled(k), pss, W_C, 1))
            assert mag == pytest.approx(1.0, abs=1e-6)

    def test_non_monotone_rejected(self):
        # an undamped notch right at the tuning frequency
        plant = default_stage()
        ctrl = build(ControllerSpec(name="PID"))
        with pytest.raises(TuningError):
            tune_gain_for_bandwidth(ctrl, plant, 2 * math.pi * 8.0)


class TestPhaseMargin:
    def setup_method(self):
        self.plant = default_stage()

    def tuned(self, name):
        ctrl = build(ControllerSpec(name=name))
        return ctrl.scaled(tune_gain_for_bandwidth(ctrl, self.plant, W_C))

    def test_pid_thirty_degrees(self):
        assert phase_margin(self.tuned("PID"), self.plant) == pytest.approx(30.0, abs=0.5)

    def test_pi2d_loses_exactly_the_integrator_phase(self):
        pm_pid = phase_margin(self.tuned("PID"), self.plant)
        pm_pi2d = phase_margin(self.tuned("PI2D"), self.plant)
        assert pm_pid - pm_pi2d == pytest.approx(PI2D_PHASE_LOSS, abs=0.02)

    def test_cglp_recovers_margin(self):
        assert phase_margin(self.tuned("CGLP_PI2D"), self.plant) == pytest.approx(
            30.0, abs=2.0
        )

    def test_picid_margin_increases_over_pi2d(self):
        assert phase_margin(self.tuned("PICID"), self.plant) > phase_margin(
            self.tuned("PI2D"), self.plant
        )

    def test_no_crossover_raises(self):
        ctrl = build(ControllerSpec(name="PID")).scaled(1e-12)
        with pytest.raises(MarginUndefinedError):
            phase_margin(ctrl, self.plant)


class TestHarmonicShapes:
    """Frequency-domain structure of the tuned controller family."""

    def setup_method(self):
        self.plant = default_stage()
        self.pss = self.plant.to_state_space()
        self.tuned = {}
        for name in CONTROLLER_NAMES:
            ctrl = build(ControllerSpec(name=name))
            self.tuned[name] = ctrl.scaled(
                tune_gain_for_bandwidth(ctrl, self.plant, W_C)
            )

    def test_first_harmonic_gain_match(self):
        # all reset designs share PI2D's first-harmonic gain over the
        # vibration band (PID differs below its extra-integrator corner and
        # is excluded).  Variants whose Clegg integrator sees the full error
        # (PICID, C_IbHPF) sit *above* PI2D by up to the CI/linear-integrator
        # gain ratio (1.62x = +4.26 dB); the band-confined and lead-based
        # variants track PI2D within 1 dB.
        ci_boost_db = 20 * np.log10(abs(4.0 / np.pi - 1.0j))
        band = np.logspace(np.log10(2 * np.pi * 0.5), np.log10(2 * np.pi * 30.0), 20)
        ref = np.array(
            [abs(open_loop_harmonic(self.tuned["PI2D"], self.pss, w, 1)) for w in band]
        )
        for name in CONTROLLER_NAMES:
            if name in ("PID", "PI2D"):
                continue
            mags = np.array(
                [abs(open_loop_harmonic(self.tuned[name], self.pss, w, 1)) for w in band]
            )
            dev_db = 20 * np.log10(mags / ref)
            if name in ("PICID", "C_IbHPF"):
                assert np.all(dev_db > -0.5)
                assert np.max(dev_db) < ci_boost_db + 0.25
            else:
                assert np.max(np.abs(dev_db)) < 1.0

    def test_iblpf_third_harmonic_attenuation(self):
        # confined reset: >= 20 dB per decade above the band-pass corner
        w_bp = 2 * np.pi * 0.01
        for w in (2 * np.pi * 0.1, 2 * np.pi * 1.0, 2 * np.pi * 10.0):
            h_ib = abs(open_loop_harmonic(self.tuned["C_IbLPF"], self.pss, w, 3))
            h_ci = abs(open_loop_harmonic(self.tuned["PICID"], self.pss, w, 3))
            attenuation_db = 20 * np.log10(h_ci / h_ib)
            decades = np.log10(w / w_bp)
            assert attenuation_db >= 20.0 * decades

    def test_ibhpf_matches_picid_above_one_hz(self):
        for w in (2 * np.pi * 1.0, 2 * np.pi * 5.0, 2 * np.pi * 20.0):
            h_ib = abs(open_loop_harmonic(self.tuned["C_IbHPF"], self.pss, w, 3))
            h_ci = abs(open_loop_harmonic(self.tuned["PICID"], self.pss, w, 3))
            assert abs(20 * np.log10(h_ib / h_ci)) < 1.0

    def test_cglp_unit_gain_band(self):
        elem = build_reset_part(ControllerSpec(name="CGLP_PI2D"))
        for w in np.logspace(np.log10(W_C / 10), np.log10(W_C), 30):
            gain_db = 20 * np.log10(abs(df(elem, w)))
            assert -1.0 <= gain_db <= 1.0
