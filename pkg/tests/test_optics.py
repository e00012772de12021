"""Unit tests for the optical components and the event-filter circuit.

Core claims:
    - components act as their stated Jones/splitting matrices and conserve
      power when lossless
    - the filter reproduces the three canonical intermediate states
      componentwise
    - port powers: 0.625 at the output for ideal parameters, substrate
      scaling by eta_s^2, unit total across all ports when lossless
    - the experiment's block configurations isolate the right branch powers
    - the output is a single harmonic in the glass-plate phase, peaked at
      zero, with unit visibility on the interfering branch
    - 2 x (P_E/P_I) / eta_s^2 equals the hopper-model measure of {00,01,11}
"""

from __future__ import annotations

import cmath
import math

import numpy as np
import pytest

from qmeasure.errors import ConfigurationError, WiringError
from qmeasure.histories import BeamsplitterParams, Event, dsi_role_table, measure
from qmeasure.optics import (
    BeamSplitter,
    FilterParams,
    HalfWavePlate,
    MirrorParams,
    Mirror,
    ModeState,
    OpticalCircuit,
    PhasePlate,
    PolarizingBS,
    Polarizer,
    apply_component,
    build_dsi_filter,
    dsi_equivalent_model,
    dsi_history_fields,
    dsi_monitor_powers,
    port_powers,
    run_circuit,
    single_pass_powers,
)

INV_SQRT2 = 1.0 / math.sqrt(2.0)
EVENT = Event.from_strings(["00", "01", "11"])


def apply_one(component, amps):
    return apply_component(ModeState(dict(amps)), component).amplitudes


def random_filter_params(rng: np.random.Generator) -> FilterParams:
    t = float(rng.uniform(0.2, 0.98))
    return FilterParams(
        bs1=BeamsplitterParams(t=t, r=math.sqrt(1 - t * t), phi=float(rng.uniform(0, 2 * math.pi))),
        eta_s=float(rng.uniform(0.5, 1.0)),
        phi_g=0.0,
    )


class TestComponents:
    def test_beamsplitter_single_input(self):
        bs = BeamSplitter("bs", in_a="in", in_b=None, out_a="T", out_b="R",
                          t=INV_SQRT2, r=INV_SQRT2, phi=math.pi / 2)
        out = apply_one(bs, {("in", "H"): 1.0 + 0j})
        assert out[("T", "H")] == pytest.approx(INV_SQRT2, abs=1e-12)
        assert out[("R", "H")] == pytest.approx(1j * INV_SQRT2, abs=1e-12)

    def test_beamsplitter_substrate_loss(self):
        bs = BeamSplitter("bs", in_a="in", in_b=None, out_a="T", out_b="R",
                          t=INV_SQRT2, r=INV_SQRT2, phi=math.pi / 2, eta_s=0.9)
        out = apply_one(bs, {("in", "H"): 1.0 + 0j})
        total = sum(abs(a) ** 2 for a in out.values())
        assert total == pytest.approx(0.9, abs=1e-12)

    def test_beamsplitter_two_inputs_unitary(self):
        bs = BeamSplitter("bs", in_a="a", in_b="b", out_a="c", out_b="d",
                          t=0.6, r=0.8, phi=math.pi / 2)
        rng = np.random.default_rng(3)
        for _ in range(20):
            a, b = (complex(*rng.normal(size=2)) for _ in range(2))
            out = apply_one(bs, {("a", "H"): a, ("b", "H"): b})
            before = abs(a) ** 2 + abs(b) ** 2
            after = sum(abs(z) ** 2 for z in out.values())
            assert after == pytest.approx(before, rel=1e-12)

    def test_hwp_quarter_turn_swaps(self):
        hwp = HalfWavePlate("hwp", "p", math.pi / 4)
        out = apply_one(hwp, {("p", "H"): 1.0 + 0j})
        assert out[("p", "V")] == pytest.approx(1.0, abs=1e-12)
        assert out[("p", "H")] == pytest.approx(0.0, abs=1e-12)

    def test_hwp_eighth_turn_is_hadamard(self):
        hwp = HalfWavePlate("hwp", "p", math.pi / 8)
        out = apply_one(hwp, {("p", "H"): 1.0 + 0j})
        assert out[("p", "H")] == pytest.approx(INV_SQRT2, abs=1e-12)
        assert out[("p", "V")] == pytest.approx(INV_SQRT2, abs=1e-12)
        out = apply_one(hwp, {("p", "V"): 1.0 + 0j})
        assert out[("p", "H")] == pytest.approx(INV_SQRT2, abs=1e-12)
        assert out[("p", "V")] == pytest.approx(-INV_SQRT2, abs=1e-12)

    def test_hwp_power_conserving_any_angle(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            hwp = HalfWavePlate("hwp", "p", float(rng.uniform(0, math.pi)))
            a_h, a_v = (complex(*rng.normal(size=2)) for _ in range(2))
            out = apply_one(hwp, {("p", "H"): a_h, ("p", "V"): a_v})
            assert sum(abs(z) ** 2 for z in out.values()) == pytest.approx(
                abs(a_h) ** 2 + abs(a_v) ** 2, rel=1e-12)

    def test_pbs_routes_and_conserves(self):
        pbs = PolarizingBS("pbs", "p", out_transmit="t", out_reflect="r",
                           extinction_t=0.01, extinction_r=0.02)
        out = apply_one(pbs, {("p", "H"): 0.6 + 0j, ("p", "V"): 0.8j})
        assert abs(out[("t", "H")]) ** 2 == pytest.approx(0.36 * 0.98, abs=1e-12)
        assert abs(out[("r", "H")]) ** 2 == pytest.approx(0.36 * 0.02, abs=1e-12)
        assert abs(out[("r", "V")]) ** 2 == pytest.approx(0.64 * 0.99, abs=1e-12)
        assert abs(out[("t", "V")]) ** 2 == pytest.approx(0.64 * 0.01, abs=1e-12)

    def test_ideal_pbs_has_clean_ports(self):
        pbs = PolarizingBS("pbs", "p", out_transmit="t", out_reflect="r")
        out = apply_one(pbs, {("p", "H"): 0.6 + 0j, ("p", "V"): 0.8j})
        assert ("t", "V") not in out
        assert ("r", "H") not in out

    def test_mirror_polarization_dependence(self):
        mirror = Mirror("m", "p", r_s=0.81, r_p=0.64, phase_s=0.2, phase_p=-0.1)
        out = apply_one(mirror, {("p", "H"): 1.0 + 0j, ("p", "V"): 1.0 + 0j})
        assert out[("p", "H")] == pytest.approx(0.8 * cmath.exp(-0.1j), abs=1e-12)
        assert out[("p", "V")] == pytest.approx(0.9 * cmath.exp(0.2j), abs=1e-12)

    def test_polarizer_extinction(self):
        gt = Polarizer("gt", "p", axis="H", extinction=0.04)
        out = apply_one(gt, {("p", "H"): 1.0 + 0j, ("p", "V"): 1.0 + 0j})
        assert out[("p", "H")] == pytest.approx(1.0)
        assert out[("p", "V")] == pytest.approx(0.2, abs=1e-12)

    def test_phase_plate(self):
        gp = PhasePlate("gp", "p", 0.7)
        out = apply_one(gp, {("p", "H"): 1.0 + 0j})
        assert out[("p", "H")] == pytest.approx(cmath.exp(0.7j), abs=1e-12)

    def test_component_parameter_validation(self):
        with pytest.raises(ConfigurationError):
            BeamSplitter("bs", "a", None, "b", "c", t=0.9, r=0.9, phi=0.0)
        with pytest.raises(ConfigurationError):
            Mirror("m", "p", r_s=1.2)
        with pytest.raises(ConfigurationError):
            Polarizer("gt", "p", axis="X")


class TestWiring:
    def test_unfed_input_rejected(self):
        with pytest.raises(WiringError, match="not fed"):
            OpticalCircuit(
                components=(HalfWavePlate("hwp", "nowhere", 0.1),),
                input_port="in",
                monitored_ports={},
            )

    def test_reused_output_label_rejected(self):
        with pytest.raises(WiringError, match="already used"):
            OpticalCircuit(
                components=(
                    BeamSplitter("bs", "in", None, "a", "b", t=INV_SQRT2, r=INV_SQRT2, phi=math.pi / 2),
                    BeamSplitter("bs2", "a", "b", "in", "c", t=INV_SQRT2, r=INV_SQRT2, phi=math.pi / 2),
                ),
                input_port="in",
                monitored_ports={},
            )

    def test_unknown_monitored_path_rejected(self):
        with pytest.raises(WiringError, match="unknown path"):
            OpticalCircuit(components=(), input_port="in", monitored_ports={"PM": ("ghost",)})

    def test_blocking_unknown_label_rejected(self):
        circuit = build_dsi_filter(FilterParams())
        with pytest.raises(WiringError, match="ghost"):
            run_circuit(circuit, blocked_paths=("ghost",))


class TestCheckpointStates:
    @pytest.mark.parametrize("phi_g", [0.0, 0.4, -1.3])
    def test_state_after_first_pass(self, phi_g):
        result = run_circuit(build_dsi_filter(FilterParams(phi_g=phi_g)), record=True)
        state = result.after("bs1_pass1")
        assert state.get("A", "H") == pytest.approx(INV_SQRT2, abs=1e-12)
        assert state.get("C", "H") == pytest.approx(1j * INV_SQRT2, abs=1e-12)
        assert state.get("A", "V") == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("phi_g", [0.0, 0.4, -1.3])
    def test_state_before_second_pass(self, phi_g):
        result = run_circuit(build_dsi_filter(FilterParams(phi_g=phi_g)), record=True)
        state = result.after("mirrors_c")
        g = cmath.exp(1j * phi_g)
        assert state.get("A", "H") == pytest.approx(g * INV_SQRT2, abs=1e-12)
        assert state.get("C", "V") == pytest.approx(1j * INV_SQRT2, abs=1e-12)
        assert state.get("C", "H") == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("phi_g", [0.0, 0.4, -1.3])
    def test_state_after_second_pass(self, phi_g):
        result = run_circuit(build_dsi_filter(FilterParams(phi_g=phi_g)), record=True)
        state = result.after("bs1_pass2")
        g = cmath.exp(1j * phi_g)
        assert state.get("U", "H") == pytest.approx(0.5 * g, abs=1e-12)
        assert state.get("U", "V") == pytest.approx(0.5 * 1j * 1j, abs=1e-12)
        assert state.get("L", "H") == pytest.approx(0.5j * g, abs=1e-12)
        assert state.get("L", "V") == pytest.approx(0.5j, abs=1e-12)

    def test_substrate_scales_each_pass(self):
        eta = 0.9356
        result = run_circuit(build_dsi_filter(FilterParams(eta_s=eta)), record=True)
        after_one = result.after("bs1_pass1")
        assert abs(after_one.get("A", "H")) ** 2 == pytest.approx(eta / 2, abs=1e-12)
        after_two = result.after("bs1_pass2")
        assert abs(after_two.get("U", "H")) ** 2 == pytest.approx(eta**2 / 4, abs=1e-12)


class TestPortPowers:
    def test_ideal_output_ratio(self):
        powers = port_powers(build_dsi_filter(FilterParams()))
        assert powers["PM"] == pytest.approx(0.625, abs=1e-12)

    def test_substrate_scaling(self):
        powers = port_powers(build_dsi_filter(FilterParams(eta_s=0.9356)))
        assert powers["PM"] == pytest.approx(0.9356**2 * 0.625, abs=1e-12)

    @pytest.mark.parametrize("phi_g", np.linspace(0, 2 * math.pi, 7))
    def test_lossless_total_power_is_unity(self, phi_g):
        powers = port_powers(build_dsi_filter(FilterParams(phi_g=float(phi_g))))
        assert sum(powers.values()) == pytest.approx(1.0, abs=1e-12)

    def test_monitor_block_configurations(self):
        eta = 0.9
        monitors = dsi_monitor_powers(FilterParams(eta_s=eta))
        scale = eta * eta
        assert monitors["P_E"] == pytest.approx(scale * 0.625, abs=1e-12)
        assert monitors["P_int"] == pytest.approx(scale * 0.5, abs=1e-12)
        assert monitors["P_01"] == pytest.approx(scale * 0.125, abs=1e-12)
        assert monitors["P_11"] == pytest.approx(scale * 0.125, abs=1e-12)
        assert monitors["P_00"] == pytest.approx(scale * 0.125, abs=1e-12)
        assert monitors["P_T"] == pytest.approx(eta * 0.5, abs=1e-12)
        assert monitors["P_R"] == pytest.approx(eta * 0.5, abs=1e-12)

    def test_blocking_everything_darkens_output(self):
        circuit = build_dsi_filter(FilterParams())
        powers = port_powers(circuit, blocked_paths=("A", "C"))
        assert all(v == 0 for v in powers.values())

    def test_single_pass_calibration(self):
        single = single_pass_powers(FilterParams(eta_s=0.95))
        assert single["T"] + single["R"] == pytest.approx(0.95, abs=1e-12)


class TestPhaseSweep:
    def test_single_harmonic_peaked_at_zero(self):
        phis = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
        p_e = np.array([
            port_powers(build_dsi_filter(FilterParams(phi_g=float(p))))["PM"] for p in phis
        ])
        assert np.argmax(p_e) == 0
        # a + b cos(phi) fit must reproduce the curve exactly
        a = 0.5 * (p_e[0] + p_e[32])
        b = p_e[0] - a
        assert p_e == pytest.approx(a + b * np.cos(phis), abs=1e-12)

    def test_interfering_branch_visibility_is_unity(self):
        params_max = FilterParams(phi_g=0.0)
        params_min = FilterParams(phi_g=math.pi)
        top = port_powers(build_dsi_filter(params_max), blocked_paths=("U",))["PM"]
        bottom = port_powers(build_dsi_filter(params_min), blocked_paths=("U",))["PM"]
        assert (top - bottom) / (top + bottom) == pytest.approx(1.0, abs=1e-12)


class TestHistoryFields:
    def test_ideal_isolated_fields(self):
        fields = dsi_history_fields(FilterParams())
        quarter = 1.0 / (2.0 * math.sqrt(2.0))
        assert fields["00"]["V"] == pytest.approx(quarter, abs=1e-12)
        assert fields["00"]["H"] == pytest.approx(0.0, abs=1e-12)
        assert fields["01"]["H"] == pytest.approx(1j * quarter, abs=1e-12)
        assert fields["11"]["H"] == pytest.approx(1j * quarter, abs=1e-12)

    def test_sqrt2_normalization_recovers_design_amplitudes(self):
        fields = dsi_history_fields(FilterParams(phi_g=0.3))
        g = cmath.exp(0.3j)
        assert math.sqrt(2) * fields["00"]["V"] == pytest.approx(0.5 * g, abs=1e-12)
        assert math.sqrt(2) * fields["01"]["H"] == pytest.approx(0.5j * g, abs=1e-12)
        assert math.sqrt(2) * fields["11"]["H"] == pytest.approx(0.5j, abs=1e-12)

    def test_discarded_history_leaks_only_through_extinction(self):
        ideal = dsi_history_fields(FilterParams(), histories=("10",))
        assert all(a == pytest.approx(0.0, abs=1e-12) for a in ideal["10"].values())
        leaky = dsi_history_fields(FilterParams(pbs1_extinction_t=0.01), histories=("10",))
        assert sum(abs(a) ** 2 for a in leaky["10"].values()) > 0


class TestFilterMeasureConsistency:
    def test_ideal_consistency(self):
        params = FilterParams()
        p_e = port_powers(build_dsi_filter(params))["PM"]
        mu = measure(dsi_equivalent_model(params), EVENT)
        assert 2.0 * p_e == pytest.approx(mu, abs=1e-12)

    def test_random_parameter_consistency(self):
        rng = np.random.default_rng(2025)
        for _ in range(30):
            params = random_filter_params(rng)
            p_e = port_powers(build_dsi_filter(params))["PM"]
            mu = measure(dsi_equivalent_model(params), EVENT)
            assert 2.0 * p_e / params.eta_s**2 == pytest.approx(mu, abs=1e-9)

    def test_equivalent_model_matches_hand_formula(self):
        # Sagnac labeling, same splitter twice, zero plate phase:
        # mu = t^4 + |2 t r e^{i phi}|^2 = t^4 + 4 t^2 r^2
        rng = np.random.default_rng(8)
        for _ in range(25):
            params = random_filter_params(rng)
            t, r = params.bs1.t, params.bs1.r
            mu = measure(dsi_equivalent_model(params), EVENT)
            assert mu == pytest.approx(t**4 + 4 * t**2 * r**2, abs=1e-12)

    def test_equivalent_model_uses_sagnac_roles(self):
        model = dsi_equivalent_model(FilterParams())
        assert model.role_table == dsi_role_table(2)


class TestNetlistJson:
    def test_round_trip(self):
        circuit = build_dsi_filter(FilterParams(phi_g=0.2, eta_s=0.93))
        doc = circuit.to_json()
        assert OpticalCircuit.from_json(doc) == circuit

    def test_missing_parameter_names_component_and_field(self):
        doc = build_dsi_filter(FilterParams()).to_json()
        del doc["components"][1]["t"]
        with pytest.raises(ConfigurationError, match=r"component 1 .*missing parameter.*t"):
            OpticalCircuit.from_json(doc)

    def test_unknown_kind_rejected(self):
        doc = build_dsi_filter(FilterParams()).to_json()
        doc["components"][0]["kind"] = "teleporter"
        with pytest.raises(ConfigurationError, match="unknown kind"):
            OpticalCircuit.from_json(doc)

    def test_filter_params_round_trip(self):
        params = FilterParams(
            bs1=BeamsplitterParams(t=0.7, r=math.sqrt(1 - 0.49), phi=1.2),
            eta_s=0.93,
            phi_g=0.1,
            mirror_a=MirrorParams(r_s=0.95, r_p=0.97, phase_s=0.01, phase_p=-0.02),
        )
        assert FilterParams.from_json(params.to_json()) == params

    def test_filter_params_missing_field_named(self):
        doc = FilterParams().to_json()
        del doc["bs1"]["t"]
        with pytest.raises(ConfigurationError, match="bs1.*t"):
            FilterParams.from_json(doc)


class TestModeState:
    def test_power_restriction(self):
        state = ModeState({("a", "H"): 0.6 + 0j, ("b", "V"): 0.8j})
        assert state.power() == pytest.approx(1.0)
        assert state.power(["a"]) == pytest.approx(0.36)

    def test_lossy_components_only_remove_power(self):
        rng = np.random.default_rng(77)
        for _ in range(20):
            params = FilterParams(
                bs1=BeamsplitterParams.ideal(),
                eta_s=float(rng.uniform(0.5, 1.0)),
                pbs1_extinction_t=float(rng.uniform(0, 0.05)),
                mirror_a=MirrorParams(r_s=float(rng.uniform(0.9, 1.0)), r_p=float(rng.uniform(0.9, 1.0))),
                phi_g=float(rng.uniform(0, 2 * math.pi)),
            )
            total = run_circuit(build_dsi_filter(params)).final.power()
            assert total <= 1.0 + 1e-12
