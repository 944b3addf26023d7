"""Dipole-induced transparency of a double-sided cavity coupled to an NV center.

All rates are dimensionless multiples of the waveguide decay rate ``eta``
unless stated otherwise; the CLI converts physical inputs before calling in.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _check_finite(**values: float) -> None:
    for name, value in values.items():
        if not np.isfinite(value):
            raise ValueError(f"{name} must be finite, got {value!r}")


@dataclass(frozen=True)
class CavityParams:
    """Rates and frequencies of one cavity-NV system.

    ``gamma`` is the emitter decay rate and ``kappa`` the intrinsic cavity
    loss, entering the amplitude equations as ``gamma/2`` and ``kappa/2``.
    """

    g: float
    gamma: float
    eta: float
    kappa: float = 0.0
    omega_c: float = 0.0
    omega_k: float = 0.0

    def __post_init__(self) -> None:
        _check_finite(g=self.g, gamma=self.gamma, eta=self.eta, kappa=self.kappa,
                      omega_c=self.omega_c, omega_k=self.omega_k)
        for name in ("g", "gamma", "kappa"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0, got {getattr(self, name)}")
        if self.eta <= 0:
            raise ValueError(f"eta must be > 0, got {self.eta}")

    @property
    def loss_ratio(self) -> float:
        return self.kappa / self.eta

    def working_point(self) -> WorkingPoint:
        """Resonant (F_p, lambda) summary of these parameters."""
        return WorkingPoint(purcell_factor(self.g, self.eta, self.gamma), self.loss_ratio)

    def normalized(self) -> CavityParams:
        """Same system expressed in units of ``eta``."""
        e = self.eta
        return CavityParams(self.g / e, self.gamma / e, 1.0, self.kappa / e,
                            self.omega_c / e, self.omega_k / e)


@dataclass(frozen=True)
class WorkingPoint:
    purcell_factor: float
    loss_ratio: float

    def __post_init__(self) -> None:
        _check_finite(purcell_factor=self.purcell_factor, loss_ratio=self.loss_ratio)
        if self.purcell_factor < 0:
            raise ValueError(f"purcell_factor must be >= 0, got {self.purcell_factor}")
        if self.loss_ratio < 0:
            raise ValueError(f"loss_ratio must be >= 0, got {self.loss_ratio}")

    def cavity_params(self, gamma: float = 1e-3) -> CavityParams:
        """A resonant parameter set (eta = 1) realizing this working point."""
        g = math.sqrt(self.purcell_factor * gamma)
        return CavityParams(g=g, gamma=gamma, eta=1.0, kappa=self.loss_ratio)


@dataclass(frozen=True)
class DitCoefficients:
    """Scattering amplitudes of the spin-coupled (r, t) and bare (r0, t0) cavity."""

    r: complex
    t: complex
    r0: complex
    t0: complex

    def __post_init__(self) -> None:
        for name in ("r", "t", "r0", "t0"):
            value = complex(getattr(self, name))
            if not (np.isfinite(value.real) and np.isfinite(value.imag)):
                raise ValueError(f"{name} must be finite, got {value!r}")
            object.__setattr__(self, name, value)

    def as_tuple(self) -> tuple[complex, complex, complex, complex]:
        return (self.r, self.t, self.r0, self.t0)

    def is_passive(self, tol: float = 1e-12) -> bool:
        """True when the symmetric two-ports [[r, t], [t, r]] and [[r0, t0], [t0, r0]] do not amplify."""
        return all(abs(v) <= 1 + tol for v in
                   (self.r + self.t, self.r - self.t, self.r0 + self.t0, self.r0 - self.t0))

    def is_ideal(self, tol: float = 0.0) -> bool:
        ideal = ideal_coefficients()
        return all(abs(a - b) <= tol for a, b in zip(self.as_tuple(), ideal.as_tuple()))


def scattering_amplitudes(params: CavityParams, omega: float) -> tuple[complex, complex]:
    """Transmission and reflection ``(t, r)`` of the spin-coupled cavity at frequency ``omega``."""
    _check_finite(omega=omega)
    if params.g == 0:  # decoupled emitter; also avoids 0/0 when gamma = 0 on resonance
        return bare_amplitudes(params, omega)
    dipole = 1j * (params.omega_k - omega) + params.gamma / 2
    cavity = 1j * (params.omega_c - omega) + params.eta + params.kappa / 2
    denom = dipole * cavity + params.g ** 2
    # denom vanishes only for a lossless resonant dipole (then g**2 underflowed): full reflection
    t = -params.eta * dipole / denom if denom != 0 else 0j
    return complex(t), complex(1 + t)


def bare_amplitudes(params: CavityParams, omega: float) -> tuple[complex, complex]:
    """``(t0, r0)``: the same cavity with the emitter decoupled (g = 0)."""
    _check_finite(omega=omega)
    cavity = 1j * (params.omega_c - omega) + params.eta + params.kappa / 2
    t0 = -params.eta / cavity
    return complex(t0), complex(1 + t0)


def coefficients_at(params: CavityParams, omega: float) -> DitCoefficients:
    t, r = scattering_amplitudes(params, omega)
    t0, r0 = bare_amplitudes(params, omega)
    return DitCoefficients(r=r, t=t, r0=r0, t0=t0)


def resonant_coefficients(wp: WorkingPoint) -> DitCoefficients:
    fp, lam = wp.purcell_factor, wp.loss_ratio
    denom = 2 * fp + 1 + lam / 2
    bare = 1 + lam / 2
    return DitCoefficients(r=(2 * fp + lam / 2) / denom, t=-1 / denom,
                           r0=(lam / 2) / bare, t0=-1 / bare)


def ideal_coefficients() -> DitCoefficients:
    return DitCoefficients(r=1, t=0, r0=0, t0=-1)


def purcell_factor(g: float, eta: float, gamma: float) -> float:
    if eta <= 0 or gamma <= 0:
        raise ValueError("eta and gamma must be positive")
    return g * g / (eta * gamma)


def weak_dip_halfwidth(wp: WorkingPoint, gamma: float) -> float:
    """Half-width Gamma = F_p*gamma/(1 + lambda/2) of the weak-coupling dip."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return wp.purcell_factor * gamma / (1 + wp.loss_ratio / 2)


def min_photon_interval(wp: WorkingPoint, gamma: float) -> float:
    """Shortest spacing between successive photons in the weak-excitation picture."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return 2 * wp.purcell_factor / (gamma * (1 + wp.loss_ratio / 2))


def balanced_purcell(lam: float) -> float:
    """Purcell factor at which ``|r| == |t0|`` on resonance, for loss ratio ``lam``."""
    _check_finite(lam=lam)
    if not 0 < lam <= 2:
        raise ValueError(f"loss ratio must lie in (0, 2], got {lam}")
    return (1 - lam * lam / 4) / lam


@dataclass(frozen=True)
class Spectrum:
    detuning: np.ndarray  # (omega - omega_c) / eta
    abs_r: np.ndarray
    abs_t: np.ndarray
    abs_r0: np.ndarray
    abs_t0: np.ndarray

    def rows(self):
        return zip(self.detuning, self.abs_r, self.abs_t, self.abs_r0, self.abs_t0)


def spectrum_sweep(params: CavityParams, omega_min: float, omega_max: float,
                   points: int) -> Spectrum:
    """Coefficient magnitudes on a uniform grid of probe frequencies.

    ``omega_min``/``omega_max`` are in the same units as ``params``; the
    returned detuning axis is normalized by ``eta`` and centered on ``omega_c``.
    """
    _check_finite(omega_min=omega_min, omega_max=omega_max)
    if points < 2:
        raise ValueError(f"points must be >= 2, got {points}")
    if not omega_min < omega_max:
        raise ValueError("omega_min must be smaller than omega_max")
    omega = np.linspace(omega_min, omega_max, points)
    # vectorized form of scattering_amplitudes / bare_amplitudes
    dipole = 1j * (params.omega_k - omega) + params.gamma / 2
    cavity = 1j * (params.omega_c - omega) + params.eta + params.kappa / 2
    t0 = -params.eta / cavity
    if params.g == 0:
        t = t0
    else:
        denom = dipole * cavity + params.g ** 2
        t = np.divide(-params.eta * dipole, denom, out=np.zeros_like(denom), where=denom != 0)
    return Spectrum(detuning=(omega - params.omega_c) / params.eta,
                    abs_r=np.abs(1 + t), abs_t=np.abs(t),
                    abs_r0=np.abs(1 + t0), abs_t0=np.abs(t0))


def transmission_minima(spectrum: Spectrum) -> np.ndarray:
    """Detunings of the interior local minima of ``|t|``."""
    a = spectrum.abs_t
    idx = np.where((a[1:-1] < a[:-2]) & (a[1:-1] <= a[2:]))[0] + 1
    return spectrum.detuning[idx]


def _crossings(x: np.ndarray, f: np.ndarray, i0: int) -> tuple[float, float]:
    # f < 0 inside the dip, >= 0 outside; outermost sign changes around i0
    left = np.where(f[:i0] >= 0)[0]
    right = np.where(f[i0:] >= 0)[0]
    if left.size == 0 or right.size == 0:
        raise ValueError("dip is not resolved inside the sweep range")
    il, ir = left[-1], i0 + right[0]
    xl = x[il] + (x[il + 1] - x[il]) * f[il] / (f[il] - f[il + 1])
    xr = x[ir - 1] + (x[ir] - x[ir - 1]) * f[ir - 1] / (f[ir - 1] - f[ir])
    return float(xl), float(xr)


def dip_full_width(spectrum: Spectrum, convention: str = "half-depth") -> float:
    """Full width of the central transmission dip.

    ``half-depth``: where ``|t|**2`` is halfway between its floor and the
    bare-cavity background ``|t0|**2`` at the dip center.
    ``crossover``: where ``|r| == |t|``.
    """
    a, x = spectrum.abs_t, spectrum.detuning
    i0 = int(np.argmin(a))
    if convention == "half-depth":
        level = (a[i0] ** 2 + spectrum.abs_t0[i0] ** 2) / 2
        f = a ** 2 - level
    elif convention == "crossover":
        f = a - spectrum.abs_r
    else:
        raise ValueError(f"unknown width convention {convention!r}")
    xl, xr = _crossings(x, f, i0)
    return xr - xl
