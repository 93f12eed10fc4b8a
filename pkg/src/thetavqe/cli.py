"""Command-line front end.

Subcommands: exact-sweep, vqe, correlator, transpile, fit-evals.

Every option can also come from a JSON file given with ``--config``; keys
are the option names with dashes replaced by underscores.  A flag on the
command line beats the config file, which beats the built-in default.

Exit status: 0 on success, 1 on usage errors, 2 on runtime failures.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import theta
from .ansatz import build_ansatz
from .circuit import Circuit
from .encoding import enumerate_basis, physical_indices
from .mitigation import MitigationConfig, mitigated_observable
from .simulator import NoiseSpec
from .transpiler import CouplingMap, depth, transpile
from .vqe import MODES, Objective, OptimizerConfig, default_candidates, fit_eval_scaling, sweep

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2

DEFAULTS = {
    "exact-sweep": {"jmax": ["3/2"], "lambdas": "0:1:21", "jconv": "4", "out": None},
    "vqe": {"ansatz": None, "mode": "ideal", "lambdas": "0:1:21", "candidates": None,
            "candidate_scale": 0.1, "seed": 0, "max_evals": 20000, "ftol": None, "xtol": 1e-4,
            "shots": 1000, "trajectories": 128, "p1": 0.0005, "p2": 0.005, "chip": "square17",
            "gauge": False, "rot": False, "inbulk": False, "out": None, "manifest": None},
    "correlator": {"params": None, "shots": 1000, "repetitions": 200, "seed": 0,
                   "gauge": True, "rot": True, "out": None},
    "transpile": {"ansatz": None, "circuit": None, "chip": "square17", "out": None},
    "fit-evals": {"input": None, "out": None},
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def parse_lambdas(text) -> list[float]:
    """``start:stop:num`` (inclusive, like linspace) or a comma list."""
    if isinstance(text, (list, tuple)):
        vals = [float(v) for v in text]
    elif ":" in str(text):
        a, b, n = str(text).split(":")
        vals = list(np.linspace(float(a), float(b), int(n)))
    else:
        vals = [float(v) for v in str(text).split(",") if v.strip()]
    if not vals or any(not 0.0 <= v <= 1.0 for v in vals):
        raise UsageError(f"bad lambda grid {text!r}")
    return vals


def parse_spin(text) -> int:
    """Spin such as '3/2', '1.5' or '2' as a twice-value."""
    try:
        v = Fraction(str(text))
    except ValueError as e:
        raise UsageError(f"bad spin {text!r}") from e
    if v < 0 or (2 * v).denominator != 1:
        raise UsageError(f"spin must be a non-negative multiple of 1/2, got {text!r}")
    return int(2 * v)


def _add_common(p):
    p.add_argument("--config", help="JSON file with option values")
    p.add_argument("--out", help="output file (default: stdout)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="thetavqe", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)

    p = sub.add_parser("exact-sweep", help="exact spectra over a lambda x j_max grid")
    _add_common(p)
    p.add_argument("--jmax", nargs="+", help="cutoffs, e.g. 1/2 3/2 4")
    p.add_argument("--lambdas", help="start:stop:num or comma list")
    p.add_argument("--jconv", help="reference cutoff for the band column")

    p = sub.add_parser("vqe", help="VQE sweep over lambda")
    _add_common(p)
    p.add_argument("--ansatz", help="ssp2|ssp3|ssp4|hea18|...|hea42")
    p.add_argument("--mode", choices=MODES)
    p.add_argument("--lambdas")
    p.add_argument("--candidates", type=int, help="starts per lambda (overrides the scale)")
    p.add_argument("--candidate-scale", dest="candidate_scale", type=float,
                   help="fraction of the reference candidate count")
    p.add_argument("--seed", type=int)
    p.add_argument("--max-evals", dest="max_evals", type=int)
    p.add_argument("--ftol", type=float)
    p.add_argument("--xtol", type=float)
    p.add_argument("--shots", type=int)
    p.add_argument("--trajectories", type=int)
    p.add_argument("--p1", type=float)
    p.add_argument("--p2", type=float)
    p.add_argument("--chip")
    for flag in ("gauge", "rot", "inbulk"):
        p.add_argument(f"--{flag}", action="store_true", default=None)
    p.add_argument("--manifest", help="where to write the JSON run manifest")

    p = sub.add_parser("correlator", help="sampled two-point correlator at stored parameters")
    _add_common(p)
    p.add_argument("--params", help="manifest written by the vqe command")
    p.add_argument("--shots", type=int)
    p.add_argument("--repetitions", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--no-gauge", dest="gauge", action="store_false", default=None)
    p.add_argument("--no-rot", dest="rot", action="store_false", default=None)

    p = sub.add_parser("transpile", help="lower and route a circuit onto a chip")
    _add_common(p)
    p.add_argument("--ansatz")
    p.add_argument("--circuit", help="circuit text file instead of an ansatz id")
    p.add_argument("--chip", help="'square17' or a JSON coupling-map file")

    p = sub.add_parser("fit-evals", help="fit evaluation counts against fbar")
    _add_common(p)
    p.add_argument("--input", help="CSV with columns family,fbar,M_eval")
    return ap


def resolve(command: str, ns: argparse.Namespace) -> dict:
    """Merge defaults, config file and explicit flags (in rising priority)."""
    opts = dict(DEFAULTS[command])
    if getattr(ns, "config", None):
        path = Path(ns.config)
        if not path.exists():
            raise UsageError(f"config file {path} not found")
        try:
            cfg = json.loads(path.read_text())
        except json.JSONDecodeError as e:
            raise UsageError(f"config file {path} is not valid JSON: {e}") from e
        unknown = set(cfg) - set(opts)
        if unknown:
            raise UsageError(f"unknown config keys: {sorted(unknown)}")
        opts.update(cfg)
    for k in opts:
        v = getattr(ns, k, None)
        if v is not None:
            opts[k] = v
    return opts


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


# ----------------------------------------------------------------- commands

def cmd_exact_sweep(o: dict) -> int:
    lams = parse_lambdas(o["lambdas"])
    jconv = parse_spin(o["jconv"])
    rows = []
    for j in o["jmax"]:
        t = parse_spin(j)
        rows.extend(theta.sweep(t, lams, j_conv=jconv))
    _emit(theta.rows_to_csv(rows), o["out"])
    return EXIT_OK


def _vqe_config(o: dict) -> OptimizerConfig:
    cand = o["candidates"] if o["candidates"] is not None else \
        default_candidates(o["ansatz"], o["candidate_scale"])
    return OptimizerConfig(
        candidates=int(cand), max_evals=int(o["max_evals"]), xtol=float(o["xtol"]),
        ftol=None if o["ftol"] is None else float(o["ftol"]), seed=int(o["seed"]),
        shots=int(o["shots"]), trajectories=int(o["trajectories"]),
        noise=NoiseSpec(p2=float(o["p2"]), p1=float(o["p1"])), chip=str(o["chip"]),
        mitigation=MitigationConfig(bool(o["gauge"]), bool(o["rot"]), bool(o["inbulk"])))


def cmd_vqe(o: dict) -> int:
    if not o["ansatz"]:
        raise UsageError("--ansatz is required")
    try:
        build_ansatz(o["ansatz"])
    except ValueError as e:
        raise UsageError(str(e)) from e
    if o["mode"] not in MODES:
        raise UsageError(f"mode must be one of {MODES}")
    try:
        cfg = _vqe_config(o)
    except ValueError as e:
        raise UsageError(str(e)) from e
    res = sweep(o["ansatz"], parse_lambdas(o["lambdas"]), o["mode"], cfg)
    _emit(res.to_csv(), o["out"])
    if o["manifest"]:
        Path(o["manifest"]).write_text(res.manifest_json())
    print(f"fbar={res.fbar:.6g} f_max={res.f_max:.6g} M_eval={res.M_eval:.6g}", file=sys.stderr)
    return EXIT_OK


CORRELATOR_HEADER = ("lambda", "cP_median", "cP_std", "cP_exact", "acceptance")


def cmd_correlator(o: dict) -> int:
    if not o["params"]:
        raise UsageError("--params is required")
    path = Path(o["params"])
    if not path.exists():
        raise UsageError(f"parameter file {path} not found")
    man = json.loads(path.read_text())
    cfg = OptimizerConfig.from_dict(man["config"])
    mit = MitigationConfig(bool(o["gauge"]), bool(o["rot"]))
    circuit = build_ansatz(man["ansatz"])
    basis = enumerate_basis(3)
    model = theta.model_for(3)
    # half the plaquette on the physical block, zero elsewhere
    idx = physical_indices(basis)
    O = np.zeros((64, 64))
    O[np.ix_(idx, idx)] = 0.5 * model.h_p[(1, 2)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CORRELATOR_HEADER)
    for k, (lam_key, params) in enumerate(sorted(man["params"].items(), key=lambda kv: float(kv[0]))):
        lam = float(lam_key)
        obj = Objective(circuit, lam, man["mode"], cfg)
        state = obj.readout_state(np.asarray(params, dtype=float))
        _, omega = theta.ground_state(model.hamiltonian(lam))
        exact = theta.correlator(omega, model)
        r = mitigated_observable(state, O, exact, mit, int(o["shots"]), int(o["repetitions"]),
                                 seed=[int(o["seed"]), k])
        w.writerow([f"{lam:.6g}", f"{r.median:.8g}", f"{r.std:.8g}", f"{exact:.8g}",
                    f"{r.acceptance:.6g}"])
    _emit(buf.getvalue(), o["out"])
    return EXIT_OK


def cmd_transpile(o: dict) -> int:
    if bool(o["ansatz"]) == bool(o["circuit"]):
        raise UsageError("give exactly one of --ansatz or --circuit")
    try:
        chip = CouplingMap.load(o["chip"])
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME
    if o["ansatz"]:
        try:
            c = build_ansatz(o["ansatz"])
        except ValueError as e:
            raise UsageError(str(e)) from e
    else:
        path = Path(o["circuit"])
        if not path.exists():
            raise UsageError(f"circuit file {path} not found")
        c = Circuit.from_text(path.read_text())
    if not c.gates:
        _emit("", o["out"])
        print("1q=0 2q=0 swaps=0 depth=0", file=sys.stderr)
        return EXIT_OK
    r = transpile(c, chip)
    _emit(r.circuit.to_text(), o["out"])
    print(f"1q={r.circuit.n_1q} 2q={r.circuit.n_2q} swaps={r.n_swaps} depth={depth(r.circuit)}",
          file=sys.stderr)
    return EXIT_OK


def cmd_fit_evals(o: dict) -> int:
    if not o["input"]:
        raise UsageError("--input is required")
    path = Path(o["input"])
    if not path.exists():
        raise UsageError(f"input file {path} not found")
    groups: dict[str, list[tuple[float, float]]] = {}
    with path.open() as fh:
        for row in csv.DictReader(fh):
            groups.setdefault(row["family"], []).append((float(row["fbar"]), float(row["M_eval"])))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("family", "n", "power_a", "power_b", "exp_a", "exp_b"))
    for fam in sorted(groups):
        f, m = zip(*groups[fam])
        fit = fit_eval_scaling(f, m)
        w.writerow([fam, fit.n_points, *(f"{v:.8g}" for v in fit.power + fit.exponential)])
    _emit(buf.getvalue(), o["out"])
    return EXIT_OK


COMMANDS = {"exact-sweep": cmd_exact_sweep, "vqe": cmd_vqe, "correlator": cmd_correlator,
            "transpile": cmd_transpile, "fit-evals": cmd_fit_evals}


def main(argv=None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    if not ns.command:
        ap.print_usage(sys.stderr)
        return EXIT_USAGE
    try:
        opts = resolve(ns.command, ns)
        return COMMANDS[ns.command](opts)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (RuntimeError, ValueError, OSError, KeyError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
