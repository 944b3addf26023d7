"""Monte Carlo gate fidelity over random real product inputs.

The fidelity of one run is the overlap between each measurement branch's
photon state and the ideal gate output, averaged over branches with their
probabilities. Two conventions are supported:

``normalized``
    each branch state is normalized first and the branch average is
    renormalized by the total branch probability (conditional fidelity,
    photon loss excluded);
``unnormalized``
    sum over branches of ``|<ideal|branch>|**2`` with the branch states left
    as the circuit produced them, so loss lowers the value.

Gates are evaluated through their per-branch transfer maps: every branch is a
linear map of the photon input, so the fidelity of an input ``x`` is a ratio of
quadratic forms in ``x``. This is exact and agrees with running the circuit.
"""

from __future__ import annotations

import csv
import functools
import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .circuits import (CircuitScript, GateSpec, branch_maps, get_gate, run_circuit)
from .scattering import DitCoefficients, WorkingPoint, resonant_coefficients
from .statespace import StateVector, make_product_state, overlap_up_to_phase

CONVENTIONS = ("normalized", "unnormalized")
DEFAULT_SAMPLES = 10_000
CHUNK = 4096

# Where each gate photon takes its polarization and rail amplitudes from:
# (draw photon, "pol" | "rail"), or None for a photon parked in rail 1.
# The one-DOF baselines map each hyper-gate draw onto the same control and
# target amplitudes, so the two gates see identical logical inputs.
_SOURCES = {
    "hyper-cnot": (((0, "pol"), (0, "rail")), ((1, "pol"), (1, "rail"))),
    "hyper-toffoli": (((0, "pol"), (0, "rail")), ((1, "pol"), (1, "rail")),
                      ((2, "pol"), (2, "rail"))),
    "cnot-pair": (((0, "pol"), None), ((1, "rail"), None),
                  ((1, "pol"), None), ((0, "rail"), None)),
    "toffoli-pair": (((0, "pol"), None), ((1, "pol"), None), ((2, "rail"), None),
                     ((0, "rail"), None), ((2, "pol"), None), ((1, "rail"), None)),
}


@dataclass(frozen=True)
class InputModel:
    """How a draw of ``draw_photons`` random photons becomes a gate input."""

    gate: str
    draw_photons: int
    sources: tuple

    @property
    def rails_fixed(self) -> bool:
        return all(rail is None for _, rail in self.sources)

    def prepare(self, draw: np.ndarray) -> np.ndarray:
        """Map draws ``(..., draw_photons, 4)`` to gate coefficients ``(..., photons, 4)``."""
        draw = np.asarray(draw)
        if draw.shape[-2:] != (self.draw_photons, 4):
            raise ValueError(f"{self.gate} needs draws of shape (..., {self.draw_photons}, 4)")
        parts = []
        for pol_src, rail_src in self.sources:
            pol = _pick(draw, pol_src)
            if rail_src is None:
                rail = np.zeros_like(pol)
                rail[..., 0] = 1
            else:
                rail = _pick(draw, rail_src)
            parts.append(np.concatenate([pol, rail], axis=-1))
        return np.stack(parts, axis=-2)


def _pick(draw: np.ndarray, source: tuple[int, str]) -> np.ndarray:
    photon, dof = source
    return draw[..., photon, 0:2] if dof == "pol" else draw[..., photon, 2:4]


def input_model(gate: str) -> InputModel:
    get_gate(gate)
    sources = _SOURCES[gate]
    used = {src[0] for pair in sources for src in pair if src is not None}
    return InputModel(gate, len(used), sources)


@dataclass(frozen=True)
class FidelityEstimate:
    mean: float
    stderr: float
    samples: int
    seed: int
    convention: str = "normalized"

    def __post_init__(self) -> None:
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.stderr < 0:
            raise ValueError("stderr must be >= 0")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")


@dataclass(frozen=True)
class SweepGrid:
    purcell: tuple[float, ...]
    loss: tuple[float, ...]
    gate: str = "hyper-cnot"
    samples: int = DEFAULT_SAMPLES
    seed: int = 0
    convention: str = "normalized"

    def __post_init__(self) -> None:
        object.__setattr__(self, "purcell", tuple(float(v) for v in self.purcell))
        object.__setattr__(self, "loss", tuple(float(v) for v in self.loss))
        if not self.purcell or not self.loss:
            raise ValueError("sweep grid axes must be nonempty")
        for v in self.purcell + self.loss:
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"grid values must be finite and >= 0, got {v}")
        if self.samples < 1:
            raise ValueError("samples must be >= 1")
        if self.convention not in CONVENTIONS:
            raise ValueError(f"unknown convention {self.convention!r}")
        get_gate(self.gate)

    def points(self) -> Iterable[tuple[int, int, WorkingPoint]]:
        for i, fp in enumerate(self.purcell):
            for j, lam in enumerate(self.loss):
                yield i, j, WorkingPoint(fp, lam)


# ---------------------------------------------------------------- sampling

def _draw_pairs(rng: np.random.Generator, shape: tuple[int, ...]) -> np.ndarray:
    pairs = rng.uniform(0.0, 1.0, size=shape + (2,))
    while True:
        empty = ~np.any(pairs != 0, axis=-1)
        if not empty.any():
            break
        pairs[empty] = rng.uniform(0.0, 1.0, size=(int(empty.sum()), 2))
    return pairs / np.linalg.norm(pairs, axis=-1, keepdims=True)


def sample_inputs(rng: np.random.Generator, n: int, photons: int,
                  complex_phases: bool = False) -> np.ndarray:
    """``n`` draws of per-photon ``(alpha, beta, gamma, delta)``, shape ``(n, photons, 4)``.

    Coefficients are iid uniform on [0, 1]; each (alpha, beta) and (gamma, delta)
    pair is then normalized. With ``complex_phases`` every coefficient also gets
    an independent uniform phase.
    """
    draw = _draw_pairs(rng, (n, photons, 2)).reshape(n, photons, 4)
    if complex_phases:
        draw = draw * np.exp(2j * np.pi * rng.uniform(size=draw.shape))
    return draw


def sample_input_state(rng: np.random.Generator, photons: int,
                       complex_phases: bool = False) -> np.ndarray:
    """One draw, shape ``(photons, 4)``."""
    return sample_inputs(rng, 1, photons, complex_phases)[0]


# ---------------------------------------------------------------- single runs

def single_run_fidelity(script: CircuitScript, state: StateVector, oracle,
                        coefficients: Optional[DitCoefficients] = None,
                        convention: str = "normalized") -> float:
    """Fidelity of one circuit run against ``oracle(state)``."""
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    state = state.normalized()
    result = run_circuit(script, state, coefficients)
    ideal = oracle(state)
    total = result.total_probability
    if total <= 0:
        raise ValueError("total branch probability is zero")
    acc = 0.0
    for branch in result.branches:
        acc += branch.probability * overlap_up_to_phase(branch.state, ideal) ** 2
    return acc / total if convention == "normalized" else acc


# ---------------------------------------------------------------- batched evaluation

@dataclass(frozen=True)
class _Quadratics:
    """Per-input-subspace forms: fidelity(x) = sum_b |x^H A_b x|^2 / x^H G x."""

    subspace: np.ndarray  # flat photon-basis indices of the input subspace
    local_index: np.ndarray  # (S, photons): per-photon 0..3 index of each subspace state
    overlaps: np.ndarray  # (branches, S, S)
    gram: np.ndarray  # (S, S)


@functools.lru_cache(maxsize=64)
def _quadratics(gate: str, coefficients: DitCoefficients) -> _Quadratics:
    spec: GateSpec = get_gate(gate)
    model = input_model(gate)
    script = spec.build(coefficients)
    photons = spec.photons
    shape = (4,) * photons
    local = np.array(list(np.ndindex(*shape)), dtype=np.intp)
    if model.rails_fixed:
        local = local[np.all(local < 2, axis=1)]  # rail index is the high bit of each 0..3
    subspace = np.ravel_multi_index(local.T, shape)
    columns = np.zeros((4 ** photons, subspace.size), dtype=complex)
    columns[subspace, np.arange(subspace.size)] = 1
    maps = branch_maps(script, columns, coefficients)
    dest = spec.permutation()[subspace]
    overlaps = np.stack([m[dest, :] for m in maps.values()])
    gram = sum(m.conj().T @ m for m in maps.values())
    return _Quadratics(subspace, local, overlaps, gram)


def _subspace_vectors(q: _Quadratics, coeffs: np.ndarray) -> np.ndarray:
    """Product kets restricted to the input subspace, shape ``(n, S)``."""
    n, photons, _ = coeffs.shape
    # per photon 4-vector with rail the slower index: (rail0 pol0, rail0 pol1, rail1 pol0, rail1 pol1)
    kets = (coeffs[:, :, 2:4, None] * coeffs[:, :, None, 0:2]).reshape(n, photons, 4)
    out = np.ones((n, q.local_index.shape[0]), dtype=complex)
    for k in range(photons):
        out *= kets[:, k, q.local_index[:, k]]
    return out


def fidelity_values(gate: str, coefficients: DitCoefficients, draws: np.ndarray,
                    convention: str = "normalized") -> np.ndarray:
    """Per-draw fidelities for draws of shape ``(n, draw_photons, 4)``."""
    if convention not in CONVENTIONS:
        raise ValueError(f"unknown convention {convention!r}")
    q = _quadratics(gate, coefficients)
    x = _subspace_vectors(q, input_model(gate).prepare(draws))
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    amp = np.einsum("ns,bst,nt->bn", x.conj(), q.overlaps, x)
    num = np.sum(np.abs(amp) ** 2, axis=0)
    if convention == "unnormalized":
        return np.clip(num, 0.0, 1.0)
    den = np.einsum("ns,st,nt->n", x.conj(), q.gram, x).real
    if np.any(den <= 0):
        raise ValueError("total branch probability is zero")
    return np.clip(num / den, 0.0, 1.0)


def _coefficients(point: Union[WorkingPoint, DitCoefficients]) -> DitCoefficients:
    if isinstance(point, DitCoefficients):
        return point
    return resonant_coefficients(point)


def _sample_fidelities(gate: str, point, samples: int, seed: int, convention: str,
                       complex_phases: bool) -> np.ndarray:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    coefficients = _coefficients(point)
    rng = np.random.default_rng(seed)
    photons = input_model(gate).draw_photons
    values = []
    for start in range(0, samples, CHUNK):
        draws = sample_inputs(rng, min(CHUNK, samples - start), photons, complex_phases)
        values.append(fidelity_values(gate, coefficients, draws, convention))
    return np.concatenate(values)


def _estimate(values: np.ndarray, seed: int, convention: str) -> FidelityEstimate:
    n = values.size
    stderr = float(values.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return FidelityEstimate(float(values.mean()), stderr, n, int(seed), convention)


def gate_fidelity(gate: str, point: Union[WorkingPoint, DitCoefficients],
                  samples: int = DEFAULT_SAMPLES, seed: int = 0,
                  convention: str = "normalized",
                  complex_phases: bool = False) -> FidelityEstimate:
    """Monte Carlo fidelity of a named gate at a working point (or explicit coefficients)."""
    values = _sample_fidelities(gate, point, samples, seed, convention, complex_phases)
    return _estimate(values, seed, convention)


# ---------------------------------------------------------------- sweeps

def point_seed(seed: int, i: int, j: int) -> int:
    """64-bit sub-seed of grid point ``(i, j)``, independent of evaluation order."""
    return int(np.random.SeedSequence([seed, i, j]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SweepRow:
    F_p: float
    lam: float
    gate: str
    mean: float
    stderr: float
    samples: int
    seed: int
    convention: str


def fidelity_sweep(grid: SweepGrid) -> list[SweepRow]:
    rows = []
    for i, j, wp in grid.points():
        s = point_seed(grid.seed, i, j)
        est = gate_fidelity(grid.gate, wp, grid.samples, s, grid.convention)
        rows.append(SweepRow(wp.purcell_factor, wp.loss_ratio, grid.gate, est.mean,
                             est.stderr, est.samples, s, est.convention))
    return rows


@dataclass(frozen=True)
class ComparisonRow:
    F_p: float
    lam: float
    gate_a: str
    gate_b: str
    mean_a: float
    mean_b: float
    difference: float
    combined_stderr: float  # sqrt(se_a^2 + se_b^2), ignores the pairing
    paired_stderr: float  # stderr of the per-sample differences
    samples: int
    seed: int
    convention: str


def compare_gates(gate_a: str, gate_b: str, grid: SweepGrid) -> list[ComparisonRow]:
    """Paired sweep: both gates see the same input draws at every point.

    ``grid.gate`` is ignored. The gates must draw the same number of photons.
    """
    na, nb = input_model(gate_a).draw_photons, input_model(gate_b).draw_photons
    if na != nb:
        raise ValueError(f"{gate_a} draws {na} photons but {gate_b} draws {nb}; cannot pair inputs")
    rows = []
    for i, j, wp in grid.points():
        s = point_seed(grid.seed, i, j)
        va = _sample_fidelities(gate_a, wp, grid.samples, s, grid.convention, False)
        vb = va if gate_b == gate_a else _sample_fidelities(gate_b, wp, grid.samples, s,
                                                            grid.convention, False)
        ea, eb = _estimate(va, s, grid.convention), _estimate(vb, s, grid.convention)
        d = va - vb
        paired = float(d.std(ddof=1) / math.sqrt(d.size)) if d.size > 1 else 0.0
        rows.append(ComparisonRow(wp.purcell_factor, wp.loss_ratio, gate_a, gate_b,
                                  ea.mean, eb.mean, float(d.mean()),
                                  math.hypot(ea.stderr, eb.stderr), paired,
                                  grid.samples, s, grid.convention))
    return rows


# ---------------------------------------------------------------- output

SWEEP_FIELDS = ("F_p", "lambda", "gate", "mean", "stderr", "samples", "seed", "convention")


def _record(row) -> dict:
    d = asdict(row)
    d["lambda"] = d.pop("lam")
    if isinstance(row, SweepRow):
        return {k: d[k] for k in SWEEP_FIELDS}
    return {"lambda" if k == "lam" else k: d["lambda" if k == "lam" else k]
            for k in ComparisonRow.__dataclass_fields__}


def format_rows(rows: Sequence, fmt: str = "csv") -> str:
    """CSV (header plus one line per row) or a JSON list with the same fields and values."""
    records = [_record(r) for r in rows]
    if fmt == "json":
        return json.dumps(records, indent=1) + "\n"
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    if records:
        fields = list(records[0])
    else:
        fields = list(SWEEP_FIELDS)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in rec.items()})
    return buf.getvalue()


def state_from_coefficients(coeffs: np.ndarray) -> StateVector:
    """Photon-only product state from per-photon ``(alpha, beta, gamma, delta)`` rows."""
    return make_product_state([tuple(row) for row in coeffs])
