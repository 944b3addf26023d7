"""Dense state vectors over photons (polarization x rail) and NV spins.

Basis ordering: photons first, then spins. Within photon ``k`` the rail index
is the slower axis and the polarization index the faster one, so the tensor
view has axes ``(rail_0, pol_0, rail_1, pol_1, ..., spin_0, spin_1, ...)``.
Index conventions: pol 0 = R, 1 = L; rail 0 = rail 1, 1 = rail 2;
spin 0 = |-1>, 1 = |+1>.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

MAX_DIMENSION = 2 ** 20
POL_LABELS = ("R", "L")
SPIN_LABELS = ("-1", "+1")
SQRT1_2 = 1 / math.sqrt(2)


@dataclass(frozen=True)
class SystemLayout:
    photons: int
    spins: int = 0

    def __post_init__(self) -> None:
        if self.photons < 1:
            raise ValueError(f"need at least one photon, got {self.photons}")
        if self.spins < 0:
            raise ValueError(f"spin count must be >= 0, got {self.spins}")
        if 2 * self.photons + self.spins > MAX_DIMENSION.bit_length() - 1 or \
                self.dimension > MAX_DIMENSION:
            raise ValueError(f"dimension {self.dimension} exceeds guard {MAX_DIMENSION}")

    @property
    def dimension(self) -> int:
        return 4 ** self.photons * 2 ** self.spins

    @property
    def shape(self) -> tuple[int, ...]:
        return (2,) * (2 * self.photons + self.spins)

    def rail_axis(self, photon: int) -> int:
        self.check_photon(photon)
        return 2 * photon

    def pol_axis(self, photon: int) -> int:
        self.check_photon(photon)
        return 2 * photon + 1

    def spin_axis(self, spin: int) -> int:
        self.check_spin(spin)
        return 2 * self.photons + spin

    def check_photon(self, photon: int) -> None:
        if not 0 <= photon < self.photons:
            raise IndexError(f"photon index {photon} out of range for {self.photons} photons")

    def check_spin(self, spin: int) -> None:
        if not 0 <= spin < self.spins:
            raise IndexError(f"spin index {spin} out of range for {self.spins} spins")

    def photon_only(self) -> SystemLayout:
        return SystemLayout(self.photons, 0)

    def label(self, index: int) -> str:
        """Ket label ``|pol,rail;...;spin,...>`` for a flat basis index."""
        bits = np.unravel_index(index, self.shape)
        photons = [f"{POL_LABELS[bits[2 * k + 1]]},{bits[2 * k] + 1}" for k in range(self.photons)]
        spins = [SPIN_LABELS[bits[2 * self.photons + j]] for j in range(self.spins)]
        body = ";".join(photons)
        if spins:
            body += ";" + ",".join(spins)
        return f"|{body}>"


def basis_index(layout: SystemLayout, photons: Sequence[tuple[int, int]],
                spins: Sequence[int] = ()) -> int:
    """Flat index of a basis state given ``(pol, rail)`` per photon and spin bits."""
    if len(photons) != layout.photons or len(spins) != layout.spins:
        raise ValueError("basis specification does not match the layout")
    bits = []
    for pol, rail in photons:
        bits += [rail, pol]
    bits += list(spins)
    return int(np.ravel_multi_index(tuple(bits), layout.shape))


class StateVector:
    """Immutable amplitude vector tied to a :class:`SystemLayout`."""

    __slots__ = ("layout", "amplitudes")

    def __init__(self, layout: SystemLayout, amplitudes: Iterable[complex]):
        amps = np.array(amplitudes, dtype=complex).reshape(-1)
        if amps.size != layout.dimension:
            raise ValueError(f"expected {layout.dimension} amplitudes, got {amps.size}")
        if not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite")
        amps.flags.writeable = False
        object.__setattr__(self, "layout", layout)
        object.__setattr__(self, "amplitudes", amps)

    def __setattr__(self, name, value):
        raise AttributeError("StateVector is immutable")

    def __repr__(self) -> str:
        return f"StateVector({self.layout}, norm={self.norm():.6g})"

    @classmethod
    def basis(cls, layout: SystemLayout, photons: Sequence[tuple[int, int]],
              spins: Sequence[int] = ()) -> StateVector:
        amps = np.zeros(layout.dimension, dtype=complex)
        amps[basis_index(layout, photons, spins)] = 1
        return cls(layout, amps)

    def tensor(self) -> np.ndarray:
        return self.amplitudes.reshape(self.layout.shape)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> StateVector:
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize a zero vector")
        return StateVector(self.layout, self.amplitudes / n)

    def scaled(self, factor: complex) -> StateVector:
        return StateVector(self.layout, self.amplitudes * factor)

    def __add__(self, other: StateVector) -> StateVector:
        _same_layout(self, other)
        return StateVector(self.layout, self.amplitudes + other.amplitudes)

    def dump(self, cutoff: float = 1e-12) -> str:
        """One line per amplitude above ``cutoff``: ``|pol,rail;...;spin,...> re im``."""
        lines = []
        for i in np.flatnonzero(np.abs(self.amplitudes) > cutoff):
            a = self.amplitudes[i]
            lines.append(f"{self.layout.label(int(i))} {a.real:.12g} {a.imag:.12g}")
        return "\n".join(lines)


def _same_layout(a: StateVector, b: StateVector) -> None:
    if a.layout != b.layout:
        raise ValueError(f"layout mismatch: {a.layout} vs {b.layout}")


def _normalized_pair(x: complex, y: complex, what: str) -> np.ndarray:
    pair = np.array([x, y], dtype=complex)
    n = np.linalg.norm(pair)
    if not np.isfinite(n) or n == 0:
        raise ValueError(f"{what} coefficients must have nonzero finite norm")
    return pair / n


_SPIN_KETS = {
    -1: np.array([1, 0], dtype=complex),
    +1: np.array([0, 1], dtype=complex),
    "plus": np.array([SQRT1_2, SQRT1_2], dtype=complex),
    "minus": np.array([SQRT1_2, -SQRT1_2], dtype=complex),
}


def spin_ket(label) -> np.ndarray:
    """Length-2 spin ket for ``-1``, ``+1``, ``"plus"`` or ``"minus"``."""
    try:
        return _SPIN_KETS[label]
    except (KeyError, TypeError):
        raise ValueError(f"unknown spin state {label!r}") from None


def photon_ket(alpha: complex, beta: complex, gamma: complex, delta: complex) -> np.ndarray:
    """Length-4 ket (alpha R + beta L) x (gamma rail1 + delta rail2), each pair normalized."""
    pol = _normalized_pair(alpha, beta, "polarization")
    rail = _normalized_pair(gamma, delta, "rail")
    return np.kron(rail, pol)


def make_product_state(photon_coeffs: Sequence[Sequence[complex]],
                       spin_states: Sequence = ()) -> StateVector:
    """Product state from per-photon ``(alpha, beta, gamma, delta)`` and spin labels.

    Spin labels are ``-1``, ``+1``, ``"plus"`` or ``"minus"``.
    """
    layout = SystemLayout(len(photon_coeffs), len(spin_states))
    amps = np.ones(1, dtype=complex)
    for coeffs in photon_coeffs:
        amps = np.kron(amps, photon_ket(*coeffs))
    for s in spin_states:
        amps = np.kron(amps, spin_ket(s))
    return StateVector(layout, amps)


def with_spins(photons: StateVector, spin_states: Sequence) -> StateVector:
    """Append spins in the given states to a photon-only state."""
    if photons.layout.spins:
        raise ValueError("state already carries spins")
    amps = photons.amplitudes
    for s in spin_states:
        amps = np.kron(amps, spin_ket(s))
    return StateVector(SystemLayout(photons.layout.photons, len(spin_states)), amps)


def apply_local(state: StateVector, matrix: np.ndarray, axes: Sequence[int]) -> StateVector:
    """Apply ``matrix`` to the tensor factors at ``axes`` (first axis slowest)."""
    k = len(axes)
    op = np.asarray(matrix, dtype=complex).reshape((2,) * (2 * k))
    t = state.tensor()
    out = np.tensordot(op, t, axes=(list(range(k, 2 * k)), list(axes)))
    out = np.moveaxis(out, list(range(k)), list(axes))
    return StateVector(state.layout, out.reshape(-1))


@dataclass(frozen=True)
class SingleQubitOp:
    """2x2 matrix acting on one tensor factor: ``("pol"|"rail"|"spin", index)``."""

    matrix: np.ndarray
    target: tuple[str, int]

    def axis(self, layout: SystemLayout) -> int:
        kind, index = self.target
        if kind == "pol":
            return layout.pol_axis(index)
        if kind == "rail":
            return layout.rail_axis(index)
        if kind == "spin":
            return layout.spin_axis(index)
        raise ValueError(f"unknown target kind {kind!r}")


def apply_single(op: SingleQubitOp, state: StateVector) -> StateVector:
    m = np.asarray(op.matrix, dtype=complex)
    if m.shape != (2, 2) or not np.all(np.isfinite(m)):
        raise ValueError("single-qubit operator must be a finite 2x2 matrix")
    return apply_local(state, m, [op.axis(state.layout)])


def inner_product(a: StateVector, b: StateVector) -> complex:
    """<a|b>, conjugate-linear in ``a``."""
    _same_layout(a, b)
    return complex(np.vdot(a.amplitudes, b.amplitudes))


def overlap_up_to_phase(a: StateVector, b: StateVector) -> float:
    na, nb = a.norm(), b.norm()
    if na == 0 or nb == 0:
        raise ValueError("overlap of a zero-norm state is undefined")
    return min(1.0, abs(inner_product(a, b)) / (na * nb))


def project_spin(state: StateVector, spin: int, outcome: int) -> tuple[StateVector, float]:
    """Unnormalized projection onto spin ``outcome`` and its probability."""
    if outcome not in (-1, 1):
        raise ValueError(f"spin outcome must be -1 or +1, got {outcome}")
    axis = state.layout.spin_axis(spin)
    total = state.norm()
    if total == 0:
        raise ValueError("cannot measure a zero-norm state")
    t = state.tensor().copy()
    keep = 0 if outcome == -1 else 1
    index = [slice(None)] * t.ndim
    index[axis] = 1 - keep
    t[tuple(index)] = 0
    projected = StateVector(state.layout, t.reshape(-1))
    return projected, (projected.norm() / total) ** 2


def photon_part(state: StateVector, spin_values: Sequence[int]) -> StateVector:
    """Photon-only slice of ``state`` at fixed spin values (+1/-1 per spin)."""
    layout = state.layout
    if len(spin_values) != layout.spins:
        raise ValueError("need one value per spin")
    t = state.tensor()
    index = (Ellipsis,) + tuple(0 if s == -1 else 1 for s in spin_values)
    return StateVector(layout.photon_only(), t[index].reshape(-1))
