"""Optical elements and the cavity-NV scattering map as operators on states.

Photon-local operators are 4x4 matrices over the ``(rail, pol)`` pair with
the polarization index varying fastest, matching :mod:`ditgate.statespace`.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .scattering import DitCoefficients, ideal_coefficients
from .statespace import SQRT1_2, StateVector, apply_local, project_spin

R, L = 0, 1

PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
MINUS_I = -np.eye(2, dtype=complex)
HADAMARD = SQRT1_2 * np.array([[1, 1], [1, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)


class ElementKind(enum.Enum):
    CPBS = "CPBS"
    X = "X"
    Z = "Z"
    U = "U"
    HP = "HP"
    BS = "BS"
    DL = "DL"
    SWITCH = "SWITCH"
    NV = "NV"
    SPIN_H = "SPINH"
    MEASURE_SPIN = "MEASURE"
    COND_POL_SIGN = "PSIGN"
    COND_RAIL_SIGN = "RSIGN"
    RAIL_FLIP = "RFLIP"
    POL_FLIP_RAIL_COND = "XR"


WAVEPLATES = {
    ElementKind.X: PAULI_X,
    ElementKind.Z: PAULI_Z,
    ElementKind.U: MINUS_I,
    ElementKind.HP: HADAMARD,
}


def _check_rail(rail: int) -> None:
    if rail not in (1, 2):
        raise IndexError(f"rail must be 1 or 2, got {rail}")


def pol_matrix(op: np.ndarray, rail: Optional[int] = None) -> np.ndarray:
    """4x4 photon matrix applying ``op`` to polarization, optionally on one rail only."""
    if rail is None:
        return np.kron(IDENTITY, op)
    _check_rail(rail)
    sel = np.zeros((2, 2), dtype=complex)
    sel[rail - 1, rail - 1] = 1
    return np.kron(sel, op) + np.kron(IDENTITY - sel, IDENTITY)


def rail_matrix(op: np.ndarray) -> np.ndarray:
    return np.kron(op, IDENTITY)


CPBS_MATRIX = np.zeros((4, 4), dtype=complex)
for _rail in (0, 1):
    CPBS_MATRIX[2 * _rail + R, 2 * _rail + R] = 1
    CPBS_MATRIX[2 * (1 - _rail) + L, 2 * _rail + L] = 1


def _apply_photon(state: StateVector, photon: int, matrix: np.ndarray) -> StateVector:
    layout = state.layout
    return apply_local(state, matrix, [layout.rail_axis(photon), layout.pol_axis(photon)])


def apply_cpbs(state: StateVector, photon: int) -> StateVector:
    """R keeps its rail, L is routed to the other rail; no phases."""
    return _apply_photon(state, photon, CPBS_MATRIX)


def apply_waveplate(state: StateVector, photon: int, kind: ElementKind,
                    rail: Optional[int] = None) -> StateVector:
    if kind is ElementKind.POL_FLIP_RAIL_COND:
        kind = ElementKind.X
        if rail is None:
            raise ValueError("XR needs a rail")
    try:
        op = WAVEPLATES[kind]
    except KeyError:
        raise ValueError(f"{kind} is not a wave plate") from None
    return _apply_photon(state, photon, pol_matrix(op, rail))


def apply_bs(state: StateVector, photon: int) -> StateVector:
    """50:50 beam splitter: rail1 -> (rail1 + rail2)/sqrt2, rail2 -> (rail1 - rail2)/sqrt2."""
    return _apply_photon(state, photon, rail_matrix(HADAMARD))


def apply_switch(state: StateVector, photon: int, rail_a: int = 1, rail_b: int = 2) -> StateVector:
    """Exact relabeling of two rails (identity when they coincide)."""
    _check_rail(rail_a)
    _check_rail(rail_b)
    if rail_a == rail_b:
        state.layout.check_photon(photon)
        return state
    return _apply_photon(state, photon, rail_matrix(PAULI_X))


def apply_rail_flip(state: StateVector, photon: int) -> StateVector:
    return _apply_photon(state, photon, rail_matrix(PAULI_X))


def apply_pol_sign(state: StateVector, photon: int) -> StateVector:
    """|L> -> -|L>."""
    return _apply_photon(state, photon, pol_matrix(PAULI_Z))


def apply_rail_sign(state: StateVector, photon: int) -> StateVector:
    """|rail2> -> -|rail2>."""
    return _apply_photon(state, photon, rail_matrix(PAULI_Z))


def apply_spin_hadamard(state: StateVector, spin: int) -> StateVector:
    return apply_local(state, HADAMARD, [state.layout.spin_axis(spin)])


@dataclass(frozen=True)
class NvBinding:
    """Routing of one photon through one cavity.

    ``rails[0]`` enters the side on which an incoming R photon drives the
    sigma+ transition; ``rails[1]`` enters the opposite side.
    """

    spin: int
    photon: int
    rails: tuple[int, int] = (1, 2)
    coefficients: DitCoefficients = field(default_factory=ideal_coefficients)

    def __post_init__(self) -> None:
        a, b = self.rails
        _check_rail(a)
        _check_rail(b)
        if a == b:
            raise ValueError("an NV binding needs two distinct rails")


def is_coupled(pol: int, entry_side: int, spin: int) -> bool:
    """Whether a photon entering ``entry_side`` (0 or 1) drives the spin's transition.

    sigma+ = R on side 0 or L on side 1 and drives |-1>; sigma- drives |+1>.
    """
    sigma_plus = (pol == R) == (entry_side == 0)
    return sigma_plus == (spin == -1)


def nv_photon_matrix(coefficients: DitCoefficients, spin: int,
                     rails: tuple[int, int] = (1, 2)) -> np.ndarray:
    """4x4 photon map of one cavity pass conditioned on the spin value."""
    c = coefficients
    m = np.zeros((4, 4), dtype=complex)
    for side, rail in enumerate(rails):
        ri = rail - 1
        other = 1 - ri
        for pol in (R, L):
            src = 2 * ri + pol
            refl = 2 * ri + (1 - pol)
            trans = 2 * other + pol
            if is_coupled(pol, side, spin):
                m[refl, src] += c.r
                m[trans, src] += c.t
            else:
                m[trans, src] += c.t0
                m[refl, src] += c.r0
    return m


def nv_matrix(coefficients: DitCoefficients, rails: tuple[int, int] = (1, 2)) -> np.ndarray:
    """8x8 map on ``(rail, pol, spin)``; spin is left untouched."""
    m = np.zeros((8, 8), dtype=complex)
    for s_index, spin in enumerate((-1, 1)):
        block = nv_photon_matrix(coefficients, spin, rails)
        m[s_index::2, s_index::2] = block
    return m


def apply_nv(state: StateVector, binding: NvBinding) -> StateVector:
    layout = state.layout
    axes = [layout.rail_axis(binding.photon), layout.pol_axis(binding.photon),
            layout.spin_axis(binding.spin)]
    return apply_local(state, nv_matrix(binding.coefficients, binding.rails), axes)


def photon_matrix(kind: ElementKind, rail: Optional[int] = None) -> np.ndarray:
    """4x4 ``(rail, pol)`` matrix of a photon-local element."""
    if kind is ElementKind.POL_FLIP_RAIL_COND:
        if rail is None:
            raise ValueError("XR needs a rail")
        return pol_matrix(PAULI_X, rail)
    if kind in WAVEPLATES:
        return pol_matrix(WAVEPLATES[kind], rail)
    if kind is ElementKind.CPBS:
        return CPBS_MATRIX
    if kind is ElementKind.BS:
        return rail_matrix(HADAMARD)
    if kind in (ElementKind.RAIL_FLIP, ElementKind.SWITCH):
        return rail_matrix(PAULI_X)
    if kind is ElementKind.COND_POL_SIGN:
        return pol_matrix(PAULI_Z)
    if kind is ElementKind.COND_RAIL_SIGN:
        return rail_matrix(PAULI_Z)
    if kind is ElementKind.DL:
        return np.eye(4, dtype=complex)
    raise ValueError(f"{kind.value} is not a photon-local element")


@dataclass(frozen=True)
class PhotonOp:
    """A photon-local correction applied after a spin measurement."""

    kind: ElementKind
    photon: int
    rail: Optional[int] = None

    def apply(self, state: StateVector) -> StateVector:
        k = self.kind
        if k in WAVEPLATES or k is ElementKind.POL_FLIP_RAIL_COND:
            return apply_waveplate(state, self.photon, k, self.rail)
        if k is ElementKind.COND_POL_SIGN:
            return apply_pol_sign(state, self.photon)
        if k is ElementKind.COND_RAIL_SIGN:
            return apply_rail_sign(state, self.photon)
        if k is ElementKind.RAIL_FLIP:
            return apply_rail_flip(state, self.photon)
        if k is ElementKind.CPBS:
            return apply_cpbs(state, self.photon)
        if k is ElementKind.BS:
            return apply_bs(state, self.photon)
        if k is ElementKind.DL:
            state.layout.check_photon(self.photon)
            return state
        raise ValueError(f"{k.value} cannot be used as a photon correction")


# branches below this probability are round-off, not physics
EMPTY_BRANCH = 1e-20


@dataclass(frozen=True)
class BranchOutcome:
    outcome: int
    probability: float
    state: StateVector


def measure_and_correct(state: StateVector, spin: int,
                        corrections: dict[int, Sequence[PhotonOp]]) -> list[BranchOutcome]:
    """Project ``spin`` onto both outcomes and apply the per-outcome corrections.

    Branches with probability at or below ``EMPTY_BRANCH`` are dropped. Returned states stay
    unnormalized; probabilities are relative to the input norm.
    """
    if state.norm() == 0:
        raise ValueError("cannot measure a zero-norm state")
    branches = []
    for outcome in (-1, 1):
        projected, p = project_spin(state, spin, outcome)
        if p <= EMPTY_BRANCH:
            continue
        for op in corrections.get(outcome, ()):
            projected = op.apply(projected)
        branches.append(BranchOutcome(outcome, p, projected))
    return branches
