"""Command-line front end.

Exit codes: 0 success, 1 numeric/domain error (including I/O), 2 parse or flag error.
Relative ``--out`` paths are resolved against ``$DITGATE_OUTPUT_DIR`` when it is set.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .circuits import (GATES, CircuitError, ScriptParseError, get_gate, load_builtin_script,
                       parse_circuit_script, run_circuit)
from .fidelity import (CONVENTIONS, SweepGrid, SweepRow, compare_gates, fidelity_sweep,
                       format_rows, gate_fidelity)
from .scattering import (CavityParams, DitCoefficients, WorkingPoint, balanced_purcell,
                         coefficients_at, ideal_coefficients, min_photon_interval,
                         resonant_coefficients, spectrum_sweep, weak_dip_halfwidth)
from .statespace import (SQRT1_2, StateVector, SystemLayout, make_product_state,
                         overlap_up_to_phase)

OUTPUT_DIR_ENV = "DITGATE_OUTPUT_DIR"
SPECTRUM_FIELDS = ("omega_detuning_over_eta", "abs_r", "abs_t", "abs_r0", "abs_t0")
BUILTIN_FILES = {"hyper-cnot": "hyper_cnot.dit", "hyper-toffoli": "hyper_toffoli.dit"}


class UsageError(Exception):
    """Malformed input text or flags (exit code 2)."""


# ---------------------------------------------------------------- value parsing

_UNITS = {"": 1.0, "hz": 1.0, "khz": 1e3, "mhz": 1e6, "ghz": 1e9, "thz": 1e12}
_RATE = re.compile(r"^\s*([-+0-9.eE]+)\s*([a-zA-Z]*)\s*$")


def finite_float(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not math.isfinite(value):
        raise argparse.ArgumentTypeError(f"must be finite: {text!r}")
    return value


def rate(text: str) -> float:
    """A rate with an optional unit: ``80MHz``, ``0.05THz`` or a bare number.

    Only ratios of rates matter, so a shared 2*pi factor may be dropped.
    """
    m = _RATE.match(text)
    if not m or m.group(2).lower() not in _UNITS:
        raise argparse.ArgumentTypeError(f"bad rate {text!r}; use e.g. 80MHz or 0.05THz")
    return finite_float(m.group(1)) * _UNITS[m.group(2).lower()]


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1: {text!r}")
    return value


def seed_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= value < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return value


_RANGE = re.compile(r"^([^:]+):([^:]+):(lin|log)(\d+)$")


def value_range(text: str) -> tuple[float, ...]:
    """``start:stop:linN`` / ``start:stop:logN`` (endpoints included), a number, or a comma list."""
    m = _RANGE.match(text.strip())
    if m:
        start, stop = finite_float(m.group(1)), finite_float(m.group(2))
        n = int(m.group(4))
        if n < 1:
            raise argparse.ArgumentTypeError(f"range needs at least one point: {text!r}")
        if m.group(3) == "log":
            if start <= 0 or stop <= 0:
                raise argparse.ArgumentTypeError(f"log range needs positive endpoints: {text!r}")
            values = np.geomspace(start, stop, n)
        else:
            values = np.linspace(start, stop, n)
        return tuple(float(v) for v in values)
    if ":" in text:
        raise argparse.ArgumentTypeError(f"bad range {text!r}; use start:stop:linN or start:stop:logN")
    parts = [p for p in text.split(",") if p.strip()]
    if not parts:
        raise argparse.ArgumentTypeError("empty value list")
    return tuple(finite_float(p) for p in parts)


_POL = {"R": (1, 0), "L": (0, 1), "+": (SQRT1_2, SQRT1_2), "-": (SQRT1_2, -SQRT1_2)}
_RAIL = {"1": (1, 0), "2": (0, 1), "+": (SQRT1_2, SQRT1_2), "-": (SQRT1_2, -SQRT1_2)}


def _amplitude_pair(text: str, table: dict, what: str) -> tuple[complex, complex]:
    if text in table:
        return table[text]
    if "/" in text:
        x, y = text.split("/", 1)
        try:
            pair = (complex(x), complex(y))
        except ValueError:
            raise UsageError(f"bad {what} amplitudes {text!r}") from None
        if not all(math.isfinite(abs(v)) for v in pair) or pair == (0, 0):
            raise UsageError(f"{what} amplitudes must be finite and not both zero: {text!r}")
        return pair
    raise UsageError(f"bad {what} {text!r}; use {'|'.join(table)} or x/y amplitudes")


def parse_input_spec(text: str, photons: int) -> StateVector:
    """``a:L,1 b:R,+`` -- one ``name:pol,rail`` token per photon, in order.

    ``pol`` is R, L, +, - or ``x/y`` amplitudes of (R, L); ``rail`` is 1, 2, +, -
    or ``x/y`` amplitudes of (rail 1, rail 2). Names are ignored beyond ordering.
    """
    tokens = text.split()
    if len(tokens) != photons:
        raise UsageError(f"input has {len(tokens)} photons, circuit needs {photons}")
    coeffs = []
    for tok in tokens:
        body = tok.split(":", 1)[-1]
        parts = body.split(",")
        if len(parts) != 2:
            raise UsageError(f"bad photon token {tok!r}; expected name:pol,rail")
        coeffs.append(_amplitude_pair(parts[0], _POL, "polarization")
                      + _amplitude_pair(parts[1], _RAIL, "rail"))
    return make_product_state(coeffs)


# ---------------------------------------------------------------- coefficient flags

def add_coefficient_flags(p: argparse.ArgumentParser, ideal_default: bool = True) -> None:
    g = p.add_argument_group("coefficients (default: ideal)" if ideal_default else "coefficients")
    g.add_argument("--fp", type=finite_float, help="Purcell factor (resonant working point)")
    g.add_argument("--lambda", dest="lam", type=finite_float, help="loss ratio kappa/eta")
    g.add_argument("--g", type=rate, help="coupling strength (physical set)")
    g.add_argument("--gamma", type=rate, help="emitter decay rate")
    g.add_argument("--eta", type=rate, help="waveguide cavity decay rate")
    g.add_argument("--kappa", type=rate, default=0.0, help="intrinsic cavity loss")
    g.add_argument("--omega", type=finite_float, default=0.0,
                   help="probe detuning (omega - omega_c)/eta for the physical set")


def resolve_coefficients(args, require: bool = False) -> DitCoefficients:
    physical = [args.g, args.gamma, args.eta]
    if args.fp is not None or args.lam is not None:
        if any(v is not None for v in physical):
            raise UsageError("give either --fp/--lambda or --g/--gamma/--eta, not both")
        if args.fp is None or args.lam is None:
            raise UsageError("--fp and --lambda go together")
        try:
            return resonant_coefficients(WorkingPoint(args.fp, args.lam))
        except ValueError as exc:
            raise ValueError(f"--fp/--lambda: {exc}") from None
    if any(v is not None for v in physical):
        if any(v is None for v in physical):
            raise UsageError("the physical set needs --g, --gamma and --eta")
        try:
            params = CavityParams(g=args.g, gamma=args.gamma, eta=args.eta, kappa=args.kappa)
        except ValueError as exc:
            raise ValueError(f"--g/--gamma/--eta/--kappa: {exc}") from None
        return coefficients_at(params.normalized(), args.omega)
    if require:
        raise UsageError("coefficients required: --fp/--lambda or --g/--gamma/--eta")
    return ideal_coefficients()


def _fmt_complex(z: complex) -> str:
    return f"{z.real:.12g}{z.imag:+.12g}j"


def coefficient_line(c: DitCoefficients) -> str:
    return "# coefficients " + " ".join(f"{n}={_fmt_complex(v)}"
                                        for n, v in zip(("r", "t", "r0", "t0"), c.as_tuple()))


# ---------------------------------------------------------------- output

def output_path(out: Optional[str], default_name: str) -> Optional[Path]:
    base = os.environ.get(OUTPUT_DIR_ENV)
    if out is None:
        return Path(base) / default_name if base else None
    path = Path(out)
    if base and not path.is_absolute():
        path = Path(base) / path
    return path


def emit(text: str, path: Optional[Path]) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from None


def table_text(fields: Sequence[str], rows: Sequence[Sequence], fmt: str,
               header: Sequence[str] = ()) -> str:
    if fmt == "json":
        return json.dumps([dict(zip(fields, r)) for r in rows], indent=1) + "\n"
    buf = io.StringIO()
    for line in header:
        buf.write(line + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    w.writerows(rows)
    return buf.getvalue()


def _sig9(v: float) -> float:
    return float(f"{v:.9g}")


# ---------------------------------------------------------------- commands

def cmd_spectrum(args) -> int:
    try:
        params = CavityParams(g=args.g, gamma=args.gamma, eta=args.eta,
                              kappa=args.kappa).normalized()
    except ValueError as exc:
        raise ValueError(f"--g/--gamma/--eta/--kappa: {exc}") from None
    if args.points < 2:
        raise ValueError("--points must be >= 2")
    if not args.wmin < args.wmax:
        raise ValueError("--wmin must be smaller than --wmax")
    spec = spectrum_sweep(params, args.wmin, args.wmax, args.points)
    rows = [tuple(_sig9(float(v)) for v in row) for row in spec.rows()]
    if args.format == "csv":
        rows = [tuple(f"{v:.9g}" for v in row) for row in spec.rows()]
    emit(table_text(SPECTRUM_FIELDS, rows, args.format),
         output_path(args.out, f"spectrum.{args.format}"))
    return 0


def cmd_coeffs(args) -> int:
    c = resolve_coefficients(args, require=True)
    record = {"r": c.r, "t": c.t, "r0": c.r0, "t0": c.t0}
    fields = ["r_re", "r_im", "t_re", "t_im", "r0_re", "r0_im", "t0_re", "t0_im",
              "abs_r", "abs_t", "abs_r0", "abs_t0"]
    values = []
    for z in record.values():
        values += [z.real, z.imag]
    values += [abs(z) for z in record.values()]
    if args.fp is not None:
        wp = WorkingPoint(args.fp, args.lam)
        fields += ["F_p", "lambda", "balanced_F_p", "dip_halfwidth_over_gamma",
                   "min_interval_times_gamma"]
        bal = balanced_purcell(args.lam) if 0 < args.lam <= 2 else float("nan")
        values += [args.fp, args.lam, bal, weak_dip_halfwidth(wp, 1.0), min_photon_interval(wp, 1.0)]
    rows = [tuple(f"{v:.12g}" for v in values)] if args.format == "csv" else [tuple(values)]
    emit(table_text(fields, rows, args.format), output_path(args.out, f"coeffs.{args.format}"))
    return 0


def load_script(name_or_path: str):
    if name_or_path in BUILTIN_FILES:
        return parse_circuit_script(load_builtin_script(BUILTIN_FILES[name_or_path]), name_or_path)
    if name_or_path in GATES:
        return get_gate(name_or_path).build(None)
    path = Path(name_or_path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc.strerror or exc}") from None
    return parse_circuit_script(text, path.stem)


def cmd_run(args) -> int:
    script = load_script(args.circuit)
    coefficients = resolve_coefficients(args)
    state = parse_input_spec(args.input, script.layout.photons)
    result = run_circuit(script, state, coefficients)
    lines = [f"# circuit {script.name or args.circuit}", coefficient_line(coefficients),
             f"# nv_interactions {script.nv_interactions()}",
             f"total_probability {result.total_probability:.12g}"]
    if args.dump:
        lines.append("input")
        lines.append(state.dump())
        for name, probe_state in result.probes.items():
            lines.append(f"probe {name}")
            lines.append(probe_state.dump())
    for b in result.branches:
        outcomes = ",".join(f"s{s}={o:+d}" for s, o in b.outcomes) or "none"
        lines.append(f"branch {outcomes} probability {b.probability:.12g}")
        shown = b.state if args.dump else b.state.normalized()
        lines.append(shown.dump())
    emit("\n".join(line for line in lines if line) + "\n", output_path(args.out, "run.txt"))
    return 0


def _basis_inputs(gate: str):
    spec = get_gate(gate)
    photons = spec.photons
    rails = (0,) if gate.endswith("-pair") else (0, 1)
    layout = SystemLayout(photons)
    choices = [(pol, rail) for rail in rails for pol in (0, 1)]
    for combo in np.ndindex(*(len(choices),) * photons):
        bits = [choices[i] for i in combo]
        yield StateVector.basis(layout, bits)


def cmd_truth_table(args) -> int:
    spec = get_gate(args.gate)
    coefficients = resolve_coefficients(args)
    script = spec.build(coefficients)
    rows = []
    for state in _basis_inputs(args.gate):
        result = run_circuit(script, state, coefficients)
        ideal = spec.oracle(state)
        total = result.total_probability
        overlap = sum(b.probability * overlap_up_to_phase(b.state, ideal)
                      for b in result.branches) / total
        best = max(result.branches, key=lambda b: b.probability).state.normalized()
        k = int(np.argmax(np.abs(best.amplitudes)))
        label_in = state.layout.label(int(np.argmax(np.abs(state.amplitudes))))
        rows.append((label_in, best.layout.label(k), f"{abs(best.amplitudes[k]):.9f}",
                     f"{overlap:.9f}", f"{total:.9f}"))
    fields = ("input", "output", "abs_amplitude", "oracle_overlap", "success_probability")
    if args.format == "json":
        rows = [(a, b, float(c), float(d), float(e)) for a, b, c, d, e in rows]
    emit(table_text(fields, rows, args.format, [coefficient_line(coefficients)]),
         output_path(args.out, f"truth_table_{args.gate}.{args.format}"))
    return 0


def cmd_fidelity(args) -> int:
    coefficients = resolve_coefficients(args, require=True)
    est = gate_fidelity(args.gate, coefficients, args.samples, args.seed, args.convention,
                        args.complex_phases)
    fp = args.fp if args.fp is not None else float("nan")
    lam = args.lam if args.lam is not None else float("nan")
    row = SweepRow(fp, lam, args.gate, est.mean, est.stderr, est.samples, est.seed, est.convention)
    emit(format_rows([row], args.format), output_path(args.out, f"fidelity.{args.format}"))
    return 0


def cmd_sweep(args) -> int:
    if args.compare:
        names = [n.strip() for n in args.compare.split(",")]
        if len(names) != 2:
            raise UsageError("--compare takes two gate names: A,B")
        for n in names:
            get_gate(n)
        grid = SweepGrid(args.fp, args.lam, names[0], args.samples, args.seed, args.convention)
        rows = compare_gates(names[0], names[1], grid)
        default = f"compare_{names[0]}_{names[1]}.{args.format}"
    else:
        grid = SweepGrid(args.fp, args.lam, args.gate, args.samples, args.seed, args.convention)
        rows = fidelity_sweep(grid)
        default = f"sweep_{args.gate}.{args.format}"
    emit(format_rows(rows, args.format), output_path(args.out, default))
    return 0


# ---------------------------------------------------------------- parser

class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse already exits with 2; keep its behavior explicit
        self.print_usage(sys.stderr)
        self.exit(2, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ditgate", description="Hyperparallel cavity-NV photonic gate simulator.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, fmt=True):
        sp.add_argument("--out", help="output file (default: stdout, or $%s/<name>)" % OUTPUT_DIR_ENV)
        if fmt:
            sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("spectrum", help="coefficient magnitudes vs normalized detuning")
    sp.add_argument("--g", type=rate, required=True)
    sp.add_argument("--gamma", type=rate, required=True)
    sp.add_argument("--eta", type=rate, required=True)
    sp.add_argument("--kappa", type=rate, default=0.0)
    sp.add_argument("--wmin", type=finite_float, default=-3.0, help="start detuning, units of eta")
    sp.add_argument("--wmax", type=finite_float, default=3.0, help="stop detuning, units of eta")
    sp.add_argument("--points", type=positive_int, default=601)
    common(sp)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("coeffs", help="scattering coefficients at a working point")
    add_coefficient_flags(sp, ideal_default=False)
    common(sp)
    sp.set_defaults(func=cmd_coeffs)

    sp = sub.add_parser("run", help="run a circuit on a product input")
    sp.add_argument("circuit", help=f"built-in name ({', '.join(GATES)}) or script file")
    sp.add_argument("--input", required=True, help="e.g. 'a:L,1 b:R,1'")
    sp.add_argument("--dump", action="store_true",
                    help="also dump input and probe states; branch states unnormalized")
    add_coefficient_flags(sp)
    common(sp, fmt=False)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("truth-table", help="basis-input table against the ideal gate")
    sp.add_argument("--gate", required=True, choices=sorted(GATES))
    add_coefficient_flags(sp)
    common(sp)
    sp.set_defaults(func=cmd_truth_table)

    def mc_flags(sp):
        sp.add_argument("--samples", type=positive_int, default=10_000)
        sp.add_argument("--seed", type=seed_int, default=0)
        sp.add_argument("--convention", choices=CONVENTIONS, default="normalized")

    sp = sub.add_parser("fidelity", help="Monte Carlo fidelity at one point")
    sp.add_argument("--gate", required=True, choices=sorted(GATES))
    add_coefficient_flags(sp, ideal_default=False)
    mc_flags(sp)
    sp.add_argument("--complex-phases", action="store_true",
                    help="draw random phases for every amplitude as well")
    common(sp)
    sp.set_defaults(func=cmd_fidelity)

    sp = sub.add_parser("sweep", help="fidelity over an (F_p, lambda) grid")
    target = sp.add_mutually_exclusive_group(required=True)
    target.add_argument("--gate", choices=sorted(GATES))
    target.add_argument("--compare", help="two gates, A,B, on common random inputs")
    sp.add_argument("--fp", type=value_range, required=True, help="start:stop:linN|logN or list")
    sp.add_argument("--lambda", dest="lam", type=value_range, required=True)
    mc_flags(sp)
    common(sp)
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except (UsageError, ScriptParseError) as exc:
        print(f"ditgate {args.command}: {exc}", file=sys.stderr)
        return 2
    except (ValueError, IndexError, CircuitError, OSError, ArithmeticError) as exc:
        print(f"ditgate {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
