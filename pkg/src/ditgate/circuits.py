"""Circuit scripts: element sequences, the runner, built-in gates and ideal oracles."""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import elements as el
from .elements import ElementKind, NvBinding, PhotonOp
from .scattering import DitCoefficients, ideal_coefficients
from .statespace import (StateVector, SystemLayout, apply_local, photon_part, spin_ket,
                         with_spins)

K = ElementKind

PHOTON_KINDS = {K.CPBS, K.X, K.Z, K.U, K.HP, K.BS, K.DL, K.SWITCH, K.COND_POL_SIGN,
                K.COND_RAIL_SIGN, K.RAIL_FLIP, K.POL_FLIP_RAIL_COND}
RAIL_QUALIFIED = {K.X, K.Z, K.U, K.HP, K.POL_FLIP_RAIL_COND}


class CircuitError(ValueError):
    """Static validation failure of a circuit script."""


@dataclass(frozen=True)
class CircuitStep:
    kind: ElementKind
    photon: Optional[int] = None
    spin: Optional[int] = None
    rails: tuple[int, ...] = ()
    on_plus: tuple[PhotonOp, ...] = ()
    on_minus: tuple[PhotonOp, ...] = ()
    label: str = ""

    def corrections(self) -> dict[int, tuple[PhotonOp, ...]]:
        return {1: self.on_plus, -1: self.on_minus}


@dataclass(frozen=True)
class CircuitScript:
    layout: SystemLayout
    steps: tuple[CircuitStep, ...]
    name: str = ""
    coefficients: Optional[DitCoefficients] = None  # bound to every NV step; None = ideal

    def __post_init__(self) -> None:
        validate(self)

    @property
    def measured_spins(self) -> list[int]:
        return [s.spin for s in self.steps if s.kind is K.MEASURE_SPIN]

    def nv_interactions(self) -> int:
        return sum(1 for s in self.steps if s.kind is K.NV)

    def cavity_entries(self) -> int:
        """Photon-cavity entries: each NV step routes two rails into the two sides."""
        return 2 * self.nv_interactions()

    def probes(self) -> list[str]:
        return [s.label for s in self.steps if s.kind is None]

    def with_coefficients(self, coefficients: Optional[DitCoefficients]) -> CircuitScript:
        return CircuitScript(self.layout, self.steps, self.name, coefficients)

    def same_structure(self, other: CircuitScript) -> bool:
        return self.layout == other.layout and self.steps == other.steps


PROBE = None  # step kind used for named checkpoints


def _check_photon_op(op: PhotonOp, layout: SystemLayout) -> None:
    layout.check_photon(op.photon)
    if op.kind not in PHOTON_KINDS or op.kind in (K.SWITCH,):
        raise CircuitError(f"{op.kind.value} is not allowed as a correction")
    if op.rail is not None and op.rail not in (1, 2):
        raise CircuitError(f"invalid rail {op.rail}")
    if op.kind is K.POL_FLIP_RAIL_COND and op.rail is None:
        raise CircuitError("XR needs a rail")


def validate(script: CircuitScript) -> None:
    """Check targets against the layout and that measurements are terminal per spin."""
    measured: set[int] = set()
    for i, step in enumerate(script.steps):
        validate_step(step, script.layout, measured, i)


def validate_step(step: CircuitStep, layout: SystemLayout, measured: set[int], i: int = 0) -> None:
    """Check one step; ``measured`` collects the spins measured so far and is updated."""
    k = step.kind
    try:
        if k is PROBE:
            if not step.label:
                raise CircuitError("probe needs a name")
            return
        if k in PHOTON_KINDS:
            layout.check_photon(step.photon)
            if k is K.SWITCH and len(step.rails) != 2:
                raise CircuitError("SWITCH needs two rails")
            if k in RAIL_QUALIFIED and len(step.rails) > 1:
                raise CircuitError(f"{k.value} takes at most one rail")
            if k not in RAIL_QUALIFIED and k is not K.SWITCH and step.rails:
                raise CircuitError(f"{k.value} takes no rail")
            if k is K.POL_FLIP_RAIL_COND and len(step.rails) != 1:
                raise CircuitError("XR needs a rail")
            if any(r not in (1, 2) for r in step.rails):
                raise CircuitError(f"invalid rail in {step.rails}")
            return
        layout.check_spin(step.spin)
        if step.spin in measured:
            raise CircuitError(f"step {i}: spin s{step.spin} used after its measurement")
        if k is K.NV:
            layout.check_photon(step.photon)
            if len(step.rails) != 2 or step.rails[0] == step.rails[1] or \
                    any(r not in (1, 2) for r in step.rails):
                raise CircuitError(f"NV needs two distinct rails, got {step.rails}")
        elif k is K.MEASURE_SPIN:
            for op in step.on_plus + step.on_minus:
                _check_photon_op(op, layout)
            measured.add(step.spin)
        elif k is not K.SPIN_H:
            raise CircuitError(f"unsupported step kind {k}")
    except IndexError as exc:
        raise CircuitError(str(exc)) from None


def apply_step(state: StateVector, step: CircuitStep,
               coefficients: DitCoefficients) -> StateVector:
    """Apply a non-measurement step."""
    k = step.kind
    if k is PROBE:
        return state
    if k is K.NV:
        return el.apply_nv(state, NvBinding(step.spin, step.photon, tuple(step.rails), coefficients))
    if k is K.SPIN_H:
        return el.apply_spin_hadamard(state, step.spin)
    if k is K.SWITCH:
        return el.apply_switch(state, step.photon, *step.rails)
    rail = step.rails[0] if step.rails else None
    return PhotonOp(k, step.photon, rail).apply(state)


@dataclass(frozen=True)
class Branch:
    outcomes: tuple[tuple[int, int], ...]  # (spin, outcome) in measurement order
    probability: float
    state: StateVector  # photon-only, unnormalized

    def outcome_of(self, spin: int) -> int:
        return dict(self.outcomes)[spin]


@dataclass(frozen=True)
class GateRunResult:
    branches: tuple[Branch, ...]
    input_state: StateVector
    coefficients: DitCoefficients
    probes: dict = field(default_factory=dict)

    @property
    def total_probability(self) -> float:
        return float(sum(b.probability for b in self.branches))


def step_axes(step: CircuitStep, layout: SystemLayout) -> tuple[int, ...]:
    """Tensor axes touched by a unitary step, in the order of :func:`step_matrix`."""
    k = step.kind
    if k is K.SPIN_H:
        return (layout.spin_axis(step.spin),)
    axes = (layout.rail_axis(step.photon), layout.pol_axis(step.photon))
    if k is K.NV:
        return axes + (layout.spin_axis(step.spin),)
    return axes


def step_matrix(step: CircuitStep, coefficients: DitCoefficients) -> np.ndarray:
    k = step.kind
    if k is K.SPIN_H:
        return el.HADAMARD
    if k is K.NV:
        return el.nv_matrix(coefficients, tuple(step.rails))
    if k is K.SWITCH and step.rails[0] == step.rails[1]:
        return np.eye(4, dtype=complex)
    return el.photon_matrix(k, step.rails[0] if step.rails and k is not K.SWITCH else None)


@dataclass(frozen=True)
class FusedBlock:
    """Product of consecutive unitary steps acting on at most three tensor axes."""

    axes: tuple[int, ...]
    matrix: np.ndarray = field(compare=False)


def _embed(matrix: np.ndarray, block_axes: Sequence[int], op: np.ndarray,
           op_axes: Sequence[int]) -> np.ndarray:
    """Left-multiply the block ``matrix`` by ``op`` acting on ``op_axes``."""
    k = len(block_axes)
    pos = [list(block_axes).index(a) for a in op_axes]
    m = len(op_axes)
    t = matrix.reshape((2,) * k + (2 ** k,))
    o = op.reshape((2,) * (2 * m))
    out = np.tensordot(o, t, axes=(list(range(m, 2 * m)), pos))
    out = np.moveaxis(out, list(range(m)), pos)
    return out.reshape(2 ** k, 2 ** k)


def _widen(matrix: np.ndarray, axes: tuple[int, ...], new_axes: tuple[int, ...]) -> np.ndarray:
    wide = np.eye(2 ** len(new_axes), dtype=complex)
    return _embed(wide, new_axes, matrix, axes)


MAX_FUSED_AXES = 3


@functools.lru_cache(maxsize=32)
def compile_script(script: CircuitScript, coefficients: DitCoefficients) -> tuple:
    """Fuse runs of unitary steps into :class:`FusedBlock` items.

    Probes and measurements are kept as steps and end the current block.
    """
    layout = script.layout
    items: list = []
    axes: tuple[int, ...] = ()
    matrix = None
    for step in script.steps:
        if step.kind is PROBE or step.kind is K.MEASURE_SPIN:
            if matrix is not None:
                items.append(FusedBlock(axes, matrix))
                axes, matrix = (), None
            items.append(step)
            continue
        s_axes = step_axes(step, layout)
        s_mat = step_matrix(step, coefficients)
        union = axes + tuple(a for a in s_axes if a not in axes)
        if matrix is not None and len(union) > MAX_FUSED_AXES:
            items.append(FusedBlock(axes, matrix))
            axes, matrix, union = (), None, s_axes
        if matrix is None:
            axes, matrix = s_axes, np.array(s_mat, dtype=complex)
            continue
        if union != axes:
            matrix = _widen(matrix, axes, union)
            axes = union
        matrix = _embed(matrix, axes, s_mat, s_axes)
    if matrix is not None:
        items.append(FusedBlock(axes, matrix))
    return tuple(items)


def run_circuit(script: CircuitScript, state: StateVector,
                coefficients: Optional[DitCoefficients] = None,
                spin_init: Sequence = ()) -> GateRunResult:
    """Run ``script`` on ``state``.

    ``state`` may carry the script's spins already, or be photon-only with
    the spin initial states given in ``spin_init`` (default ``|+>`` each).
    Branch probabilities are relative to the norm of the input.
    Measured spins are traced out of the branch states by projection; any
    unmeasured spins must end in a product basis state to be dropped.
    """
    coefficients = coefficients or script.coefficients or ideal_coefficients()
    layout = script.layout
    if state.layout.photons != layout.photons:
        raise ValueError(f"input has {state.layout.photons} photons, script needs {layout.photons}")
    if state.layout.spins == 0 and layout.spins:
        state = with_spins(state, list(spin_init) or ["plus"] * layout.spins)
    if state.layout != layout:
        raise ValueError(f"input layout {state.layout} does not match {layout}")
    norm0 = state.norm()
    if norm0 == 0:
        raise ValueError("input state has zero norm")

    probes: dict[str, StateVector] = {}
    # each live branch: (outcome record, unnormalized joint state)
    live: list[tuple[tuple, StateVector]] = [((), state)]
    for step in compile_script(script, coefficients):
        if isinstance(step, FusedBlock):
            live = [(record, apply_local(joint, step.matrix, step.axes)) for record, joint in live]
            continue
        if step.kind is PROBE:
            if len(live) == 1:
                probes[step.label] = live[0][1]
            continue
        if step.kind is K.MEASURE_SPIN:
            forked = []
            for record, joint in live:
                if joint.norm() == 0:
                    continue
                for b in el.measure_and_correct(joint, step.spin, step.corrections()):
                    forked.append((record + ((step.spin, b.outcome),), b.state))
            live = forked
            continue

    if all(joint.norm() == 0 for _, joint in live):
        raise ValueError("every path was lost: zero-norm final state")

    branches = []
    for record, joint in live:
        spins = _spin_values(joint, dict(record))
        photons = photon_part(joint, spins) if layout.spins else joint
        p = (joint.norm() / norm0) ** 2
        branches.append(Branch(record, p, photons))
    return GateRunResult(tuple(branches), state, coefficients, probes)


def _spin_values(joint: StateVector, measured: dict[int, int]) -> list[int]:
    layout = joint.layout
    values = []
    for j in range(layout.spins):
        if j in measured:
            values.append(measured[j])
            continue
        t = np.moveaxis(joint.tensor(), layout.spin_axis(j), 0)
        weight = [float(np.linalg.norm(t[i])) for i in (0, 1)]
        if min(weight) > 1e-12 * max(weight):
            raise ValueError(f"unmeasured spin s{j} is entangled or in superposition at the end")
        values.append(-1 if weight[0] >= weight[1] else 1)
    return values


def _batch_apply(t: np.ndarray, matrix: np.ndarray, axes: Sequence[int]) -> np.ndarray:
    k = len(axes)
    op = np.asarray(matrix).reshape((2,) * (2 * k))
    out = np.tensordot(op, t, axes=(list(range(k, 2 * k)), list(axes)))
    return np.moveaxis(out, list(range(k)), list(axes))


def branch_maps(script: CircuitScript, columns: np.ndarray,
                coefficients: Optional[DitCoefficients] = None,
                spin_init: Sequence = ()) -> dict[tuple, np.ndarray]:
    """Per-branch photon output for each photon input column, in one batched pass.

    ``columns`` has shape ``(photon_dim, n)``. Returns ``{outcome record: outputs}`` with
    unnormalized outputs of the same shape; by linearity column ``j`` of each entry is the
    branch state :func:`run_circuit` gives for input column ``j``. Every spin must be measured.
    """
    coefficients = coefficients or script.coefficients or ideal_coefficients()
    layout = script.layout
    if sorted(script.measured_spins) != list(range(layout.spins)):
        raise ValueError("batched evaluation needs every spin to be measured")
    columns = np.asarray(columns, dtype=complex)
    photon_dim = 4 ** layout.photons
    if columns.ndim != 2 or columns.shape[0] != photon_dim:
        raise ValueError(f"columns must have shape ({photon_dim}, n)")
    n = columns.shape[1]
    joint = columns
    for s in list(spin_init) or ["plus"] * layout.spins:
        joint = np.einsum("in,s->isn", joint, spin_ket(s)).reshape(-1, n)
    live = [((), joint.reshape(layout.shape + (n,)))]
    for step in compile_script(script, coefficients):
        if isinstance(step, FusedBlock):
            live = [(rec, _batch_apply(t, step.matrix, step.axes)) for rec, t in live]
        elif step.kind is K.MEASURE_SPIN:
            axis = layout.spin_axis(step.spin)
            forked = []
            for rec, t in live:
                for outcome in (-1, 1):
                    part = t.copy()
                    index = [slice(None)] * part.ndim
                    index[axis] = 1 if outcome == -1 else 0
                    part[tuple(index)] = 0
                    for op in step.corrections()[outcome]:
                        part = _batch_apply(part, el.photon_matrix(op.kind, op.rail),
                                            (layout.rail_axis(op.photon), layout.pol_axis(op.photon)))
                    forked.append((rec + ((step.spin, outcome),), part))
            live = forked
    out = {}
    for rec, t in live:
        spins = dict(rec)
        index = (Ellipsis,) + tuple(0 if spins[j] == -1 else 1 for j in range(layout.spins)) + (slice(None),)
        out[rec] = t[index].reshape(photon_dim, n)
    return out


# ---------------------------------------------------------------- builders

def _step(kind, photon=None, spin=None, rails=(), **kw) -> CircuitStep:
    return CircuitStep(kind, photon=photon, spin=spin, rails=tuple(rails), **kw)


def probe(name: str) -> CircuitStep:
    return CircuitStep(PROBE, label=name)


def control_pass(photon: int, spin: int) -> list[CircuitStep]:
    """Both rails of ``photon`` through the cavity of ``spin``; flips polarization on spin +1.

    Realizes, for spin -1: identity on rail 1, X on rail 2; for spin +1:
    -X on rail 1, -1 on rail 2.
    """
    return [
        _step(K.CPBS, photon),
        _step(K.NV, photon, spin, (2, 1)),
        _step(K.CPBS, photon),
        _step(K.SWITCH, photon, rails=(1, 2)),
        _step(K.U, photon, rails=(2,)),
    ]


def target_pass(photon: int, spin: int) -> list[CircuitStep]:
    """Rail bit-flip of ``photon`` conditioned on spin -1, after an X on rail 2."""
    return [
        _step(K.Z, photon),
        _step(K.NV, photon, spin, (2, 1)),
        _step(K.Z, photon),
        _step(K.POL_FLIP_RAIL_COND, photon, rails=(1,)),
        _step(K.CPBS, photon),
    ]


def _local(photon: int, token: str) -> CircuitStep:
    """``"HP@2"`` -> HP on rail 2 of ``photon``; ``"SWITCH"`` swaps rails 1 and 2."""
    name, _, rail = token.partition("@")
    kind = ElementKind(name)
    if kind is K.SWITCH:
        return _step(K.SWITCH, photon, rails=(1, 2))
    return _step(kind, photon, rails=(int(rail),) if rail else ())


# Spin-controlled involutions C_e(V): the photon map is the identity for spin
# -1 and V for spin +1 (exactly, no residual phase). Each recipe is
# (elements before the cavity, cavity rails, elements after).
PASS_RECIPES: dict[str, tuple[tuple[str, ...], tuple[int, int], tuple[str, ...]]] = {
    # V = Z on polarization
    "zpol": (("X", "HP", "CPBS"), (1, 2), ("X", "CPBS", "Z", "HP", "Z@2")),
    # V = Z on the rail
    "zrail": (("SWITCH", "BS", "X@2"), (1, 2), ("X@1", "BS", "SWITCH", "Z@2")),
    # V = X_pol on the rail state (1+2)/sqrt2, Z_pol on (1-2)/sqrt2
    "w": (("BS", "HP@2", "CPBS", "Z"), (1, 2), ("CPBS", "Z", "HP@1", "X@2", "BS", "U@1")),
}


def controlled_pass(photon: int, spin: int, recipe: str) -> list[CircuitStep]:
    pre, rails, post = PASS_RECIPES[recipe]
    return ([_local(photon, t) for t in pre] + [_step(K.NV, photon, spin, rails)]
            + [_local(photon, t) for t in post])


def _spin_h(spin: int) -> CircuitStep:
    return _step(K.SPIN_H, spin=spin)


def toffoli_half(control: tuple[int, str], second: int, target: int,
                 spin: int) -> list[CircuitStep]:
    """Flip the rail of ``target`` iff both controls read 1, using one spin as a bus.

    ``control`` is ``(photon, recipe)``: ``"zpol"`` to control on L, ``"zrail"``
    on rail 2; ``second`` controls through its polarization. The target's
    polarization is borrowed as scratch space and restored. The sequence is
    the group commutator A B A B, with A the first control's pass and
    B = G C_b G^-1 the second control's pass dressed by target passes, so
    that (A B)^2 reduces to the doubly controlled flip; the spin ends where
    it started.
    """
    a_pass = controlled_pass(control[0], spin, control[1])
    h = _spin_h(spin)
    g_inv = [h, *controlled_pass(target, spin, "w"), h, *controlled_pass(target, spin, "zpol"), h]
    g = [h, *controlled_pass(target, spin, "zpol"), h, *controlled_pass(target, spin, "w"), h]
    b_pass = g_inv + controlled_pass(second, spin, "zpol") + g
    return a_pass + b_pass + a_pass + b_pass


def build_hyper_cnot(coefficients: Optional[DitCoefficients] = None) -> CircuitScript:
    """Polarization of each photon controls the rail of the other (photons a=p0, b=p1)."""
    a, b, e1, e2 = 0, 1, 0, 1
    steps = [_step(K.HP, a), _step(K.HP, b)]
    steps += control_pass(a, e1) + control_pass(b, e2)
    steps.append(probe("after_control"))
    steps += [_spin_h(e1), _spin_h(e2)]
    steps += target_pass(a, e2) + target_pass(b, e1)
    steps.append(probe("after_target"))
    steps += [_spin_h(e1), _spin_h(e2), _step(K.HP, a), _step(K.HP, b)]
    steps += [
        _step(K.MEASURE_SPIN, spin=e1, on_plus=(PhotonOp(K.COND_POL_SIGN, a),)),
        _step(K.MEASURE_SPIN, spin=e2, on_plus=(PhotonOp(K.COND_POL_SIGN, b),)),
    ]
    return CircuitScript(SystemLayout(2, 2), tuple(steps), "hyper-cnot", coefficients)


def build_hyper_toffoli(coefficients: Optional[DitCoefficients] = None) -> CircuitScript:
    """a-pol & b-pol flip c's rail; a-rail(2) & c-pol flip b's rail (photons a, b, c)."""
    a, b, c, e1, e2 = 0, 1, 2, 0, 1
    # first stage: a's polarization is written onto NV1, a's rail onto NV2
    steps = controlled_pass(a, e1, "zpol") + controlled_pass(a, e2, "zrail")
    steps.append(probe("after_first_stage"))
    half1 = toffoli_half((a, "zpol"), b, c, e1)
    half2 = toffoli_half((a, "zrail"), c, b, e2)
    # the leading a-passes of each half are the first stage above
    n1 = len(controlled_pass(a, e1, "zpol"))
    n2 = len(controlled_pass(a, e2, "zrail"))
    steps += half1[n1:]
    steps.append(probe("after_first_toffoli"))
    steps += half2[n2:]
    steps.append(probe("before_measurement"))
    steps += [_spin_h(e1), _spin_h(e2)]
    steps += [
        _step(K.MEASURE_SPIN, spin=e1, on_plus=(PhotonOp(K.COND_POL_SIGN, a),)),
        _step(K.MEASURE_SPIN, spin=e2, on_plus=(PhotonOp(K.COND_RAIL_SIGN, a),)),
    ]
    return CircuitScript(SystemLayout(3, 2), tuple(steps), "hyper-toffoli", coefficients)


def _measure(spin: int, on_plus: Sequence[PhotonOp] = (), on_minus: Sequence[PhotonOp] = ()) -> CircuitStep:
    return _step(K.MEASURE_SPIN, spin=spin, on_plus=tuple(on_plus), on_minus=tuple(on_minus))


def pol_to_rail(photon: int) -> list[CircuitStep]:
    """Move a polarization qubit of a photon sitting in rail 1 onto its rail; pol ends R."""
    return [_step(K.CPBS, photon), _step(K.X, photon, rails=(2,))]


def rail_to_pol(photon: int) -> list[CircuitStep]:
    return [_step(K.X, photon, rails=(2,)), _step(K.CPBS, photon)]


def polarization_cnot(control: int, target: int, spin: int) -> list[CircuitStep]:
    """One-DOF CNOT between polarizations, reusing the hyper-CNOT passes.

    Both photons occupy rail 1 only (the control pass is rail dependent by
    design, since in the hyper-CNOT the rail is the other gate's target).
    The target's polarization is spread onto the rails by a CPBS around the
    target pass and recombined afterwards.
    """
    return ([_step(K.HP, control)] + control_pass(control, spin) + [_spin_h(spin)]
            + [_step(K.CPBS, target)] + target_pass(target, spin) + rail_to_pol(target)
            + [_spin_h(spin), _step(K.HP, control),
               _measure(spin, on_plus=(PhotonOp(K.COND_POL_SIGN, control),))])


def build_cascaded_cnot_pair(coefficients: Optional[DitCoefficients] = None) -> CircuitScript:
    """Two independent polarization CNOTs: p0 -> p1 on NV s0 and p2 -> p3 on NV s1.

    Defined for inputs with every photon in rail 1.
    """
    steps = polarization_cnot(0, 1, 0) + polarization_cnot(2, 3, 1)
    return CircuitScript(SystemLayout(4, 2), tuple(steps), "cnot-pair", coefficients)


def polarization_toffoli(first: int, second: int, target: int, spin: int) -> list[CircuitStep]:
    """One-DOF Toffoli between polarizations using the same passes as the hyper-Toffoli."""
    return (pol_to_rail(target) + toffoli_half((first, "zpol"), second, target, spin)
            + rail_to_pol(target)
            + [_spin_h(spin), _measure(spin, on_plus=(PhotonOp(K.COND_POL_SIGN, first),))])


def build_toffoli_pair(coefficients: Optional[DitCoefficients] = None) -> CircuitScript:
    """Two independent polarization Toffolis: (p0, p1 -> p2) on s0 and (p3, p4 -> p5) on s1.

    Driven with every photon in rail 1, like the CNOT pair.
    """
    steps = polarization_toffoli(0, 1, 2, 0) + polarization_toffoli(3, 4, 5, 1)
    return CircuitScript(SystemLayout(6, 2), tuple(steps), "toffoli-pair", coefficients)


# ---------------------------------------------------------------- oracles

Bits = tuple[tuple[int, int], ...]  # (pol, rail) per photon, 0/1 each


@functools.lru_cache(maxsize=16)
def permutation_indices(photons: int, mapping: Callable[[Bits], Bits]) -> np.ndarray:
    """``dest[i]``: flat photon-basis index that basis state ``i`` is sent to."""
    layout = SystemLayout(photons)
    dest = np.empty(layout.dimension, dtype=np.intp)
    for i, idx in enumerate(np.ndindex(*layout.shape)):
        bits = tuple((idx[2 * k + 1], idx[2 * k]) for k in range(photons))
        flat = []
        for pol, rail in mapping(bits):
            flat += [rail, pol]
        dest[i] = np.ravel_multi_index(tuple(flat), layout.shape)
    if len(set(dest.tolist())) != dest.size:
        raise ValueError("mapping is not a permutation")
    return dest


def permutation_oracle(state: StateVector, photons: int,
                       mapping: Callable[[Bits], Bits]) -> StateVector:
    """Apply a basis permutation given as a map on per-photon ``(pol, rail)`` bits."""
    layout = state.layout
    if layout != SystemLayout(photons):
        raise ValueError(f"oracle needs a photon-only {photons}-photon layout, got {layout}")
    out = np.zeros_like(state.amplitudes)
    out[permutation_indices(photons, mapping)] = state.amplitudes
    return StateVector(layout, out)


def _hyper_cnot_map(bits: Bits) -> Bits:
    (pa, ra), (pb, rb) = bits
    return ((pa, ra ^ pb), (pb, rb ^ pa))


def _hyper_toffoli_map(bits: Bits) -> Bits:
    (pa, ra), (pb, rb), (pc, rc) = bits
    # both flips read the input values
    return ((pa, ra), (pb, rb ^ (ra & pc)), (pc, rc ^ (pa & pb)))


def _cnot_pair_map(bits: Bits) -> Bits:
    (p0, r0), (p1, r1), (p2, r2), (p3, r3) = bits
    return ((p0, r0), (p1 ^ p0, r1), (p2, r2), (p3 ^ p2, r3))


def _toffoli_pair_map(bits: Bits) -> Bits:
    b = list(bits)
    for c1, c2, t in ((0, 1, 2), (3, 4, 5)):
        b[t] = (b[t][0] ^ (bits[c1][0] & bits[c2][0]), b[t][1])
    return tuple(b)


def ideal_hyper_cnot_oracle(state: StateVector) -> StateVector:
    """a's polarization (L) flips b's rail and b's polarization flips a's rail."""
    return permutation_oracle(state, 2, _hyper_cnot_map)


def ideal_hyper_toffoli_oracle(state: StateVector) -> StateVector:
    """Flip c's rail iff a and b are both L; flip b's rail iff a is in rail 2 and c is L."""
    return permutation_oracle(state, 3, _hyper_toffoli_map)


def ideal_cnot_pair_oracle(state: StateVector) -> StateVector:
    return permutation_oracle(state, 4, _cnot_pair_map)


def ideal_toffoli_pair_oracle(state: StateVector) -> StateVector:
    return permutation_oracle(state, 6, _toffoli_pair_map)


@dataclass(frozen=True)
class GateSpec:
    name: str
    build: Callable[[Optional[DitCoefficients]], CircuitScript]
    mapping: Callable[[Bits], Bits]
    photons: int

    def oracle(self, state: StateVector) -> StateVector:
        return permutation_oracle(state, self.photons, self.mapping)

    def permutation(self) -> np.ndarray:
        return permutation_indices(self.photons, self.mapping)


GATES: dict[str, GateSpec] = {
    "hyper-cnot": GateSpec("hyper-cnot", build_hyper_cnot, _hyper_cnot_map, 2),
    "hyper-toffoli": GateSpec("hyper-toffoli", build_hyper_toffoli, _hyper_toffoli_map, 3),
    "cnot-pair": GateSpec("cnot-pair", build_cascaded_cnot_pair, _cnot_pair_map, 4),
    "toffoli-pair": GateSpec("toffoli-pair", build_toffoli_pair, _toffoli_pair_map, 6),
}


def get_gate(name: str) -> GateSpec:
    try:
        return GATES[name]
    except KeyError:
        raise ValueError(f"unknown gate {name!r}; choose from {', '.join(GATES)}") from None


# ---------------------------------------------------------------- text format

class ScriptParseError(CircuitError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


_SINGLE_PHOTON = {k.value: k for k in PHOTON_KINDS if k is not K.SWITCH}


def _index(token: str, prefix: str, line: int) -> int:
    digits = token[1:]
    if len(token) < 2 or token[0] != prefix or not (digits.isascii() and digits.isdigit()):
        raise ScriptParseError(line, f"expected {prefix}<k>, got {token!r}")
    return int(token[1:])


def _rail(token: str, line: int) -> int:
    if token not in ("1", "2"):
        raise ScriptParseError(line, f"rail must be 1 or 2, got {token!r}")
    return int(token)


def _parse_op(text: str, line: int) -> PhotonOp:
    parts = text.split()
    if not parts or parts[0] not in _SINGLE_PHOTON or len(parts) not in (2, 3):
        raise ScriptParseError(line, f"bad correction {text.strip()!r}")
    kind = _SINGLE_PHOTON[parts[0]]
    photon = _index(parts[1], "p", line)
    rail = None
    if len(parts) == 3:
        if not parts[2].startswith("@"):
            raise ScriptParseError(line, f"expected @<rail>, got {parts[2]!r}")
        rail = _rail(parts[2][1:], line)
    return PhotonOp(kind, photon, rail)


def _parse_ops(text: str, line: int) -> tuple[PhotonOp, ...]:
    text = text.strip()
    if text in ("", "none"):
        return ()
    return tuple(_parse_op(part, line) for part in text.split(","))


def _parse_measure(tokens: list[str], rest: str, line: int) -> CircuitStep:
    spin = _index(tokens[1], "s", line)
    body = rest.split(None, 2)[2] if len(tokens) > 2 else ""
    plus_at = body.find("on+1:")
    minus_at = body.find("on-1:")
    if plus_at != 0 or minus_at < 0:
        raise ScriptParseError(line, "MEASURE needs 'on+1: <ops> on-1: <ops>'")
    plus = _parse_ops(body[len("on+1:"):minus_at], line)
    minus = _parse_ops(body[minus_at + len("on-1:"):], line)
    return _measure(spin, plus, minus)


def _parse_step(tokens: list[str], rest: str, line: int) -> CircuitStep:
    name = tokens[0]
    if name == "PROBE":
        if len(tokens) != 2:
            raise ScriptParseError(line, "PROBE takes one name")
        return probe(tokens[1])
    if name == "SPINH":
        if len(tokens) != 2:
            raise ScriptParseError(line, "SPINH takes one spin")
        return _spin_h(_index(tokens[1], "s", line))
    if name == "NV":
        if len(tokens) != 6 or tokens[3] != "rails":
            raise ScriptParseError(line, "expected NV s<k> p<j> rails <r1> <r2>")
        return _step(K.NV, _index(tokens[2], "p", line), _index(tokens[1], "s", line),
                     (_rail(tokens[4], line), _rail(tokens[5], line)))
    if name == "SWITCH":
        if len(tokens) != 4:
            raise ScriptParseError(line, "expected SWITCH p<k> <r1> <r2>")
        return _step(K.SWITCH, _index(tokens[1], "p", line),
                     rails=(_rail(tokens[2], line), _rail(tokens[3], line)))
    if name == "MEASURE":
        if len(tokens) < 2:
            raise ScriptParseError(line, "MEASURE needs a spin")
        return _parse_measure(tokens, rest, line)
    if name in _SINGLE_PHOTON:
        kind = _SINGLE_PHOTON[name]
        if len(tokens) not in (2, 3):
            raise ScriptParseError(line, f"{name} takes p<k> and an optional @<rail>")
        rails: tuple[int, ...] = ()
        if len(tokens) == 3:
            if kind not in RAIL_QUALIFIED or not tokens[2].startswith("@"):
                raise ScriptParseError(line, f"{name} does not take {tokens[2]!r}")
            rails = (_rail(tokens[2][1:], line),)
        return _step(kind, _index(tokens[1], "p", line), rails=rails)
    raise ScriptParseError(line, f"unknown element {name!r}")


def parse_circuit_script(text: str, name: str = "") -> CircuitScript:
    """Parse the line-oriented circuit format (see :func:`serialize`)."""
    layout: Optional[SystemLayout] = None
    steps: list[CircuitStep] = []
    measured: set[int] = set()
    for number, raw in enumerate(text.splitlines(), start=1):
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        tokens = body.split()
        if tokens[0] == "LAYOUT":
            if layout is not None:
                raise ScriptParseError(number, "LAYOUT declared twice")
            fields = dict(t.split("=", 1) for t in tokens[1:] if "=" in t)
            if len(tokens) != 3 or set(fields) != {"photons", "spins"} or \
                    not all(v.isdigit() for v in fields.values()):
                raise ScriptParseError(number, "expected LAYOUT photons=<n> spins=<m>")
            try:
                layout = SystemLayout(int(fields["photons"]), int(fields["spins"]))
            except ValueError as exc:
                raise ScriptParseError(number, str(exc)) from None
            continue
        if layout is None:
            raise ScriptParseError(number, "step before LAYOUT")
        step = _parse_step(tokens, body, number)
        try:
            validate_step(step, layout, measured, len(steps))
        except CircuitError as exc:
            raise ScriptParseError(number, str(exc)) from None
        steps.append(step)
    if layout is None:
        raise ScriptParseError(1, "missing LAYOUT line")
    return CircuitScript(layout, tuple(steps), name)


def _format_op(op: PhotonOp) -> str:
    text = f"{op.kind.value} p{op.photon}"
    return text + (f" @{op.rail}" if op.rail is not None else "")


def format_step(step: CircuitStep) -> str:
    k = step.kind
    if k is PROBE:
        return f"PROBE {step.label}"
    if k is K.SPIN_H:
        return f"SPINH s{step.spin}"
    if k is K.NV:
        return f"NV s{step.spin} p{step.photon} rails {step.rails[0]} {step.rails[1]}"
    if k is K.SWITCH:
        return f"SWITCH p{step.photon} {step.rails[0]} {step.rails[1]}"
    if k is K.MEASURE_SPIN:
        plus = ", ".join(_format_op(op) for op in step.on_plus) or "none"
        minus = ", ".join(_format_op(op) for op in step.on_minus) or "none"
        return f"MEASURE s{step.spin} on+1: {plus} on-1: {minus}"
    text = f"{k.value} p{step.photon}"
    return text + (f" @{step.rails[0]}" if step.rails else "")


def serialize(script: CircuitScript) -> str:
    lines = [f"LAYOUT photons={script.layout.photons} spins={script.layout.spins}"]
    if script.name:
        lines.insert(0, f"# {script.name}")
    lines += [format_step(s) for s in script.steps]
    return "\n".join(lines) + "\n"


def load_builtin_script(filename: str) -> str:
    """Text of a circuit file shipped in the package data directory."""
    from importlib import resources
    return resources.files("ditgate").joinpath("data", filename).read_text()
