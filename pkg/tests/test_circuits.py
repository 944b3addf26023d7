import itertools

import numpy as np
import pytest

from ditgate.circuits import (GATES, CircuitError, CircuitScript, CircuitStep, FusedBlock, PROBE,
                              apply_step, branch_maps, build_cascaded_cnot_pair,
                              build_hyper_cnot, build_hyper_toffoli, build_toffoli_pair,
                              compile_script, get_gate, ideal_cnot_pair_oracle,
                              ideal_hyper_cnot_oracle, ideal_hyper_toffoli_oracle,
                              ideal_toffoli_pair_oracle, run_circuit)
from ditgate.elements import ElementKind as K, PhotonOp
from ditgate.scattering import WorkingPoint, resonant_coefficients
from ditgate.statespace import (SQRT1_2, StateVector, SystemLayout, apply_local,
                                make_product_state, overlap_up_to_phase, with_spins)

from conftest import random_product, random_state

R, L = 0, 1
PHYSICAL = resonant_coefficients(WorkingPoint(3.0, 0.2))


def basis(*photons):
    """``basis((pol, rail), ...)`` with rails numbered 1 and 2."""
    return StateVector.basis(SystemLayout(len(photons)), [(p, r - 1) for p, r in photons])


def all_basis(photons, rails=(1, 2)):
    for combo in itertools.product(itertools.product((R, L), rails), repeat=photons):
        yield basis(*combo)


def assert_every_branch_matches(script, state, oracle, tol=1e-10):
    result = run_circuit(script, state)
    ideal = oracle(state)
    assert result.total_probability == pytest.approx(1, abs=1e-9)
    for b in result.branches:
        assert overlap_up_to_phase(b.state, ideal) >= 1 - tol


# ---------------------------------------------------------------- oracles

@pytest.mark.parametrize("src, dst", [
    (((R, 1), (R, 1)), ((R, 1), (R, 1))),
    (((L, 1), (L, 1)), ((L, 2), (L, 2))),
    (((L, 1), (R, 1)), ((L, 1), (R, 2))),
])
def test_hyper_cnot_oracle_examples(src, dst):
    assert np.array_equal(ideal_hyper_cnot_oracle(basis(*src)).amplitudes, basis(*dst).amplitudes)


@pytest.mark.parametrize("src, dst", [
    (((L, 1), (L, 1), (R, 1)), ((L, 1), (L, 1), (R, 2))),
    (((R, 1), (L, 1), (R, 1)), ((R, 1), (L, 1), (R, 1))),
    (((R, 2), (R, 1), (L, 1)), ((R, 2), (R, 2), (L, 1))),
    # both flips read input values
    (((L, 2), (L, 1), (L, 1)), ((L, 2), (L, 2), (L, 2))),
])
def test_hyper_toffoli_oracle_examples(src, dst):
    assert np.array_equal(ideal_hyper_toffoli_oracle(basis(*src)).amplitudes,
                          basis(*dst).amplitudes)


@pytest.mark.parametrize("oracle, photons", [
    (ideal_hyper_cnot_oracle, 2), (ideal_hyper_toffoli_oracle, 3),
    (ideal_cnot_pair_oracle, 4), (ideal_toffoli_pair_oracle, 6)])
def test_oracles_are_involutions(rng, oracle, photons):
    s = random_state(rng, SystemLayout(photons))
    assert np.allclose(oracle(oracle(s)).amplitudes, s.amplitudes)


def test_oracle_layout_mismatch():
    with pytest.raises(ValueError):
        ideal_hyper_cnot_oracle(basis((R, 1)))


# ---------------------------------------------------------------- ideal equivalence

@pytest.mark.parametrize("state", list(all_basis(2)), ids=lambda s: s.layout.label(
    int(np.argmax(abs(s.amplitudes)))))
def test_hyper_cnot_basis(state):
    assert_every_branch_matches(build_hyper_cnot(), state, ideal_hyper_cnot_oracle)


def test_hyper_cnot_random(rng):
    for _ in range(30):
        assert_every_branch_matches(build_hyper_cnot(), random_product(rng, 2),
                                    ideal_hyper_cnot_oracle)


def test_hyper_cnot_run_example():
    result = run_circuit(build_hyper_cnot(), basis((L, 1), (R, 1)))
    for b in result.branches:
        assert overlap_up_to_phase(b.state, basis((L, 1), (R, 2))) == pytest.approx(1)


def test_hyper_toffoli_basis():
    script = build_hyper_toffoli()
    for state in all_basis(3):
        assert_every_branch_matches(script, state, ideal_hyper_toffoli_oracle)


def test_hyper_toffoli_run_example():
    result = run_circuit(build_hyper_toffoli(), basis((L, 1), (L, 1), (R, 1)))
    for b in result.branches:
        assert overlap_up_to_phase(b.state, basis((L, 1), (L, 1), (R, 2))) == pytest.approx(1)


def test_hyper_toffoli_random(rng):
    for _ in range(20):
        assert_every_branch_matches(build_hyper_toffoli(), random_product(rng, 3),
                                    ideal_hyper_toffoli_oracle)


def test_branches_agree_pairwise_at_ideal(rng):
    result = run_circuit(build_hyper_cnot(), random_product(rng, 2))
    assert len(result.branches) == 4
    for a, b in itertools.combinations(result.branches, 2):
        assert overlap_up_to_phase(a.state, b.state) == pytest.approx(1, abs=1e-12)


# ---------------------------------------------------------------- probe checkpoints

def _h(x, y):
    return SQRT1_2 * (x + y), SQRT1_2 * (x - y)


def test_control_stage_probe(rng):
    # each photon's polarization is entangled with its own NV, rails untouched
    a1, a2, g1, g2 = rng.uniform(0.1, 1, 4)
    b1, b2, d1, d2 = rng.uniform(0.1, 1, 4)
    state = make_product_state([(a1, a2, g1, g2), (b1, b2, d1, d2)])
    a1, a2 = np.array([a1, a2]) / np.hypot(a1, a2)
    g1, g2 = np.array([g1, g2]) / np.hypot(g1, g2)
    b1, b2 = np.array([b1, b2]) / np.hypot(b1, b2)
    d1, d2 = np.array([d1, d2]) / np.hypot(d1, d2)

    def factor(p1, p2, r1, r2):
        p1, p2 = _h(p1, p2)
        f = np.zeros((2, 2, 2))  # rail, pol, spin
        f[0, :, 0] = r1 * np.array([p1, p2])
        f[0, :, 1] = -r1 * np.array([p2, p1])
        f[1, :, 0] = r2 * np.array([p2, p1])
        f[1, :, 1] = -r2 * np.array([p1, p2])
        return f * SQRT1_2

    fa, fb = factor(a1, a2, g1, g2), factor(b1, b2, d1, d2)
    expected = np.einsum("ape,bqf->apbqef", fa, fb).reshape(-1)
    probe = run_circuit(build_hyper_cnot(), state).probes["after_control"]
    got = StateVector(probe.layout, probe.amplitudes)
    assert overlap_up_to_phase(got, StateVector(probe.layout, expected)) == pytest.approx(1, abs=1e-12)


def test_target_stage_probe(rng):
    a1, a2, g1, g2, b1, b2, d1, d2 = rng.uniform(0.1, 1, 8)
    state = make_product_state([(a1, a2, g1, g2), (b1, b2, d1, d2)])
    a1, a2 = np.array([a1, a2]) / np.hypot(a1, a2)
    g1, g2 = np.array([g1, g2]) / np.hypot(g1, g2)
    b1, b2 = np.array([b1, b2]) / np.hypot(b1, b2)
    d1, d2 = np.array([d1, d2]) / np.hypot(d1, d2)
    # e1 factor over (pol a, rail b, e1); e2 factor over (pol b, rail a, e2)
    f1 = np.zeros((2, 2, 2))
    f1[:, :, 0] = a2 * np.outer([-1, 1], [d2, d1])
    f1[:, :, 1] = -a1 * np.outer([1, 1], [d1, d2])
    f2 = np.zeros((2, 2, 2))
    f2[:, :, 0] = b2 * np.outer([-1, 1], [g2, g1])
    f2[:, :, 1] = -b1 * np.outer([1, 1], [g1, g2])
    expected = 0.5 * np.einsum("pre,qsf->sprqef", f1, f2).reshape(-1)
    probe = run_circuit(build_hyper_cnot(), state).probes["after_target"]
    assert overlap_up_to_phase(probe, StateVector(probe.layout, expected)) == pytest.approx(1, abs=1e-12)


def test_toffoli_first_stage_probe(rng):
    coeffs = [tuple(rng.uniform(0.1, 1, 4)) for _ in range(3)]
    state = make_product_state(coeffs)
    al, be, ga, de = coeffs[0]
    al, be = np.array([al, be]) / np.hypot(al, be)
    ga, de = np.array([ga, de]) / np.hypot(ga, de)
    plus, minus = np.array([1, 1]) * SQRT1_2, np.array([1, -1]) * SQRT1_2
    pol_e1 = al * np.kron([1, 0], plus) + be * np.kron([0, 1], minus)  # (pol, e1)
    rail_e2 = ga * np.kron([1, 0], plus) + de * np.kron([0, 1], minus)  # (rail, e2)
    a_part = np.einsum("pe,rf->rpef", pol_e1.reshape(2, 2), rail_e2.reshape(2, 2))
    bc = make_product_state(coeffs[1:]).amplitudes.reshape(16)
    expected = np.einsum("rpef,x->rpxef", a_part, bc).reshape(-1)
    probe = run_circuit(build_hyper_toffoli(), state).probes["after_first_stage"]
    assert overlap_up_to_phase(probe, StateVector(probe.layout, expected)) == pytest.approx(1, abs=1e-12)


# ---------------------------------------------------------------- baselines

def test_cascaded_cnot_pair_truth_table():
    script = build_cascaded_cnot_pair()
    for state in all_basis(4, rails=(1,)):
        assert_every_branch_matches(script, state, ideal_cnot_pair_oracle)


def test_cascaded_cnot_pair_rails_are_spectators(rng):
    state = random_product(rng, 4, rails=False)
    for b in run_circuit(build_cascaded_cnot_pair(), state).branches:
        t = b.state.tensor()
        assert np.allclose(t[1], 0) and np.allclose(t[:, :, 1], 0)
        assert overlap_up_to_phase(b.state, ideal_cnot_pair_oracle(state)) == pytest.approx(1)


def test_interaction_counts():
    assert build_cascaded_cnot_pair().cavity_entries() == 8
    assert build_hyper_cnot().cavity_entries() == 8
    assert build_hyper_toffoli().nv_interactions() == build_toffoli_pair().nv_interactions() == 24


def test_toffoli_pair_truth_table():
    script = build_toffoli_pair()
    for state in all_basis(6, rails=(1,)):
        assert_every_branch_matches(script, state, ideal_toffoli_pair_oracle)


# ---------------------------------------------------------------- runner

def test_empty_script_returns_input(rng):
    script = CircuitScript(SystemLayout(2), ())
    state = random_state(rng, SystemLayout(2))
    result = run_circuit(script, state)
    assert len(result.branches) == 1
    assert result.branches[0].probability == pytest.approx(1)
    assert np.allclose(result.branches[0].state.amplitudes, state.amplitudes)


def test_layout_mismatch_and_zero_norm():
    with pytest.raises(ValueError):
        run_circuit(build_hyper_cnot(), basis((R, 1)))
    with pytest.raises(ValueError):
        run_circuit(build_hyper_cnot(), basis((R, 1), (R, 1)).scaled(0))


def test_physical_probability_equals_premeasurement_norm(rng):
    for name in GATES:
        script = get_gate(name).build(PHYSICAL)
        state = random_product(rng, script.layout.photons, rails=not name.endswith("pair"))
        result = run_circuit(script, state)
        pre = result.probes.get("before_measurement")
        total = result.total_probability
        assert total <= 1 + 1e-12
        if pre is not None:
            assert total == pytest.approx(pre.norm() ** 2, abs=1e-9)


def test_fused_runner_matches_step_by_step(rng):
    for name in GATES:
        script = get_gate(name).build(None)
        joint = with_spins(random_product(rng, script.layout.photons), ["plus"] * script.layout.spins)
        ref = joint
        for step in script.steps:
            if step.kind is K.MEASURE_SPIN:
                break
            ref = apply_step(ref, step, PHYSICAL)
        fused = joint
        for item in compile_script(script, PHYSICAL):
            if not isinstance(item, FusedBlock):
                if item.kind is K.MEASURE_SPIN:
                    break
                continue
            fused = apply_local(fused, item.matrix, item.axes)
        assert np.allclose(ref.amplitudes, fused.amplitudes, atol=1e-13)


def test_branch_maps_match_run_circuit(rng):
    for name in GATES:
        script = get_gate(name).build(PHYSICAL)
        states = [random_product(rng, script.layout.photons) for _ in range(2)]
        maps = branch_maps(script, np.stack([s.amplitudes for s in states], 1))
        for j, s in enumerate(states):
            for b in run_circuit(script, s).branches:
                assert np.allclose(maps[b.outcomes][:, j], b.state.amplitudes, atol=1e-13)


def test_branch_maps_need_measured_spins():
    script = CircuitScript(SystemLayout(1, 1), (CircuitStep(K.SPIN_H, spin=0),))
    with pytest.raises(ValueError):
        branch_maps(script, np.eye(4))


# ---------------------------------------------------------------- validation

def test_measurements_are_terminal():
    steps = (CircuitStep(K.MEASURE_SPIN, spin=0), CircuitStep(K.SPIN_H, spin=0))
    with pytest.raises(CircuitError):
        CircuitScript(SystemLayout(1, 1), steps)


@pytest.mark.parametrize("step", [
    CircuitStep(K.HP, photon=2),
    CircuitStep(K.NV, photon=0, spin=0, rails=(1, 1)),
    CircuitStep(K.NV, photon=0, spin=3, rails=(1, 2)),
    CircuitStep(K.SWITCH, photon=0, rails=(1,)),
    CircuitStep(K.CPBS, photon=0, rails=(1,)),
    CircuitStep(K.POL_FLIP_RAIL_COND, photon=0),
    CircuitStep(PROBE),
    CircuitStep(K.MEASURE_SPIN, spin=0, on_plus=(PhotonOp(K.NV, 0),)),
])
def test_invalid_steps(step):
    with pytest.raises(CircuitError):
        CircuitScript(SystemLayout(1, 1), (step,))


def test_get_gate_unknown():
    with pytest.raises(ValueError):
        get_gate("fredkin")
