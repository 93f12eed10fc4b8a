"""Multi-start Powell VQE over the embedded j_max = 3/2 Hamiltonian.

Three evaluation modes share one driver:

``ideal``
    exact post-selected expectation value from the statevector;
``sampled``
    the same state read out with a finite number of shots per measurement
    group, ancilla post-selection done shot by shot;
``noisy``
    the circuit is transpiled onto a chip and run as depolarizing Pauli
    trajectories.  A fixed set of error patterns (common random numbers) is
    reused for every evaluation so the objective is a smooth function of
    the parameters.

All candidates of a run advance in lockstep and their requested points are
evaluated as one batch.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .ansatz import build_ansatz
from .circuit import Circuit
from .encoding import DEFAULT_PENALTY, embed_hamiltonian, physical_indices
from .measurement import GroupedObservables
from .mitigation import NO_MITIGATION, MitigationConfig, insert_inbulk_check, mitigation_operator
from .powell import PowellConfig, minimize_many
from .simulator import AllShotsRejected, NoiseSpec, NoisyProgram, Program
from .theta import ground_state, model_for
from .transpiler import CouplingMap, transpile

MODES = ("ideal", "sampled", "noisy")
TABLE_CANDIDATES = {"ssp2": 100, "ssp3": 200, "ssp4": 400, "hea18": 100, "hea24": 100,
                    "hea30": 200, "hea36": 200, "hea42": 400}
CSV_HEADER = ("lambda", "energy", "exact_E0", "infidelity", "M_eval", "acceptance_rate")
MIN_ACCEPTANCE = 1e-10


def default_candidates(ansatz_id: str, scale: float = 1.0) -> int:
    base = TABLE_CANDIDATES.get(ansatz_id.lower())
    if base is None:
        raise ValueError(f"no default candidate count for {ansatz_id!r}")
    return max(1, int(round(base * scale)))


@dataclass
class OptimizerConfig:
    candidates: int = 10
    max_evals: int = 20000
    xtol: float = 1e-4
    ftol: float | None = None  # default depends on mode
    seed: int = 0
    shots: int = 1000
    trajectories: int = 128
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    chip: str = "square17"
    penalty: float = DEFAULT_PENALTY
    mitigation: MitigationConfig = NO_MITIGATION

    def __post_init__(self):
        if self.candidates < 1:
            raise ValueError("need at least one candidate")
        if self.max_evals < 1 or self.shots < 1 or self.trajectories < 1:
            raise ValueError("max_evals, shots and trajectories must be positive")

    def powell(self, mode: str) -> PowellConfig:
        ftol = self.ftol if self.ftol is not None else (1e-8 if mode == "ideal" else 1e-3)
        return PowellConfig(ftol=ftol, xtol=self.xtol, max_evals=self.max_evals)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["mitigation"]["pair"] = list(self.mitigation.pair)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "OptimizerConfig":
        d = dict(d)
        if "noise" in d and isinstance(d["noise"], dict):
            d["noise"] = NoiseSpec(**d["noise"])
        if "mitigation" in d and isinstance(d["mitigation"], dict):
            m = dict(d["mitigation"])
            if "pair" in m:
                m["pair"] = tuple(m["pair"])
            d["mitigation"] = MitigationConfig(**m)
        return cls(**d)


@dataclass
class VqeRun:
    ansatz: str
    lam: float
    mode: str
    params: np.ndarray
    energy: float
    exact: float
    infidelity: float
    evals: list[int]
    acceptance: float
    converged: list[bool]
    failed: list[int] = field(default_factory=list)
    energies: list[float] = field(default_factory=list)
    seconds: float = 0.0

    @property
    def M_eval(self) -> float:
        return float(np.mean(self.evals))

    @property
    def delta(self) -> float:
        return self.energy - self.exact

    def row(self) -> tuple:
        return (self.lam, self.energy, self.exact, self.infidelity, self.M_eval, self.acceptance)


# ----------------------------------------------------------------- objectives

def _chip(name: str) -> CouplingMap:
    return CouplingMap.load(name)


_TRANSPILED: dict[tuple[str, str], tuple] = {}


def transpiled(c: Circuit, chip: str):
    """(compacted native circuit, data index map, ancilla conditions), cached."""
    key = (c.to_text(), chip)
    if key not in _TRANSPILED:
        routed = transpile(c, _chip(chip))
        small, used = routed.compact()
        _TRANSPILED[key] = (small, used, routed)
    return _TRANSPILED[key]


class Objective:
    """Energy of the post-selected data state as a batched function of θ.

    The returned energies are ⟨M H M⟩ / ⟨M⟩ with M the enabled mitigation
    projectors (identity by default).  Points where post-selection keeps
    nothing get ``reject_value`` and are counted in ``n_rejected``.
    """

    def __init__(self, circuit: Circuit, lam: float, mode: str = "ideal",
                 cfg: OptimizerConfig | None = None):
        if mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        self.cfg = cfg or OptimizerConfig()
        self.mode = mode
        self.lam = float(lam)
        if self.cfg.mitigation.inbulk_verification:
            circuit = insert_inbulk_check(circuit)
        self.circuit = circuit
        self.H = embed_hamiltonian(None, self.lam, self.cfg.penalty)
        self.M = mitigation_operator(self.cfg.mitigation)
        self.MHM = self.M @ self.H @ self.M
        self._identity_M = not (self.cfg.mitigation.gauge_postselect or self.cfg.mitigation.rotation_projector)
        self.reject_value = float(np.max(np.diag(self.H)))
        self.n_rejected = 0
        self.n_evals = 0
        if mode == "noisy":
            self._setup_noisy()
        else:
            self._setup_pure()
        if mode == "sampled":
            self.obs = GroupedObservables([self.MHM, self.M])
            self.rng = np.random.default_rng(self.cfg.seed + 7919)

    # -- pure (ideal / sampled)
    def _setup_pure(self):
        c = self.circuit
        free = [q for q in range(c.n_qubits) if q not in c.data and q not in c.postselect]
        if free:
            raise ValueError("every non-data qubit must be post-selected")
        self.program = Program(c)
        self.take = self._take_index(c.n_qubits, c.data, c.postselect, [])[:, 0]

    @staticmethod
    def _take_index(n, data, conditions, rest) -> np.ndarray:
        """Full-register index for each (data value, rest value) pair."""
        nd, nr = len(data), len(rest)
        out = np.zeros((1 << nd, 1 << nr), dtype=int)
        d = np.arange(1 << nd)[:, None]
        r = np.arange(1 << nr)[None, :]
        for pos, q in enumerate(data):
            out |= ((d >> (nd - 1 - pos)) & 1) << (n - 1 - q)
        for pos, q in enumerate(rest):
            out |= ((r >> (nr - 1 - pos)) & 1) << (n - 1 - q)
        for q, b in conditions.items():
            out |= b << (n - 1 - q)
        return out

    def states(self, X: np.ndarray) -> np.ndarray:
        """Unnormalized post-selected data states, shape (B, 64)."""
        psi = self.program.run(np.atleast_2d(X))
        return psi[:, self.take]

    # -- noisy
    def _setup_noisy(self):
        small, used, routed = transpiled(self.circuit, self.cfg.chip)
        self.native = small
        self.noisy = NoisyProgram(small, self.cfg.noise)
        rng = np.random.default_rng(self.cfg.seed + 104729)
        self.draws = self.noisy.draw(self.cfg.trajectories, rng)
        self.bound = self.noisy.bind(self.draws, self.cfg.trajectories)
        rest = [q for q in range(small.n_qubits) if q not in small.data and q not in small.postselect]
        self.take = self._take_index(small.n_qubits, small.data, small.postselect, rest)

    def noisy_blocks(self, X: np.ndarray) -> np.ndarray:
        """Per-trajectory conditioned data blocks, shape (B, T, 64, R)."""
        X = np.atleast_2d(X)
        B, T = X.shape[0], self.cfg.trajectories
        psi = self.bound.run(X)
        return psi[:, self.take].reshape(B, T, *self.take.shape)

    def density(self, x: np.ndarray) -> np.ndarray:
        """Trajectory-averaged data density matrix, unnormalized by acceptance."""
        Y = self.noisy_blocks(x)[0]
        return np.einsum("tir,tjr->ij", Y, Y.conj()) / Y.shape[0]

    # -- evaluation
    def __call__(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.mode == "noisy":
            self.n_evals += X.shape[0]
            Y = self.noisy_blocks(X)
            MY = Y if self._identity_M else np.einsum("ij,btjr->btir", self.M, Y)
            num = np.einsum("btir,ij,btjr->b", MY.conj(), self.H, MY).real
            den = np.einsum("btir,btir->b", MY.conj(), MY).real
            return self._ratio(num, den)
        return self.energies(self.states(X))

    def energies(self, phi: np.ndarray) -> np.ndarray:
        """Energies for precomputed post-selected states (ideal or sampled)."""
        self.n_evals += phi.shape[0]
        if self.mode == "sampled":
            return self._sampled(phi)
        Mphi = phi if self._identity_M else phi @ self.M.T
        num = np.sum(Mphi.conj() * (Mphi @ self.H), axis=1).real
        den = np.sum(np.abs(Mphi) ** 2, axis=1)
        return self._ratio(num, den)

    def _ratio(self, num, den):
        out = np.full(len(num), self.reject_value)
        ok = den > MIN_ACCEPTANCE
        out[ok] = num[ok] / den[ok]
        self.n_rejected += int(np.sum(~ok))
        return out

    def _sampled(self, phi: np.ndarray) -> np.ndarray:
        out = np.empty(len(phi))
        for i, v in enumerate(phi):
            try:
                num, den = self.obs.sample(v, self.cfg.shots, self.rng)[0]
            except AllShotsRejected:
                num, den = 0.0, 0.0
            if den > MIN_ACCEPTANCE:
                out[i] = num / den
            else:
                out[i] = self.reject_value
                self.n_rejected += 1
        return out

    def readout_state(self, x: np.ndarray) -> np.ndarray:
        """Post-selected data state at x: a vector (pure modes) or a density
        matrix (noisy mode), unnormalized so its norm is the acceptance."""
        if self.mode == "noisy":
            return self.density(x)
        return self.states(x)[0]

    # -- diagnostics at a single point
    def diagnostics(self, x: np.ndarray) -> tuple[float, float]:
        """(infidelity against the exact ground state, acceptance) at x.

        The fidelity uses the physical part of the post-selected state,
        renormalized, so leakage into unphysical labels is not counted here.
        """
        phys = physical_indices()
        _, omega = ground_state(model_for(3).hamiltonian(self.lam))
        if self.mode == "noisy":
            rho = self.density(x)
            acc = float(np.trace(rho).real)
            rp = rho[np.ix_(phys, phys)]
            norm = float(np.trace(rp).real)
            fid = float((omega @ rp @ omega).real / norm) if norm > MIN_ACCEPTANCE else 0.0
            return 1.0 - fid, acc
        phi = self.states(x)[0]
        acc = float(np.vdot(phi, phi).real)
        v = phi[phys]
        norm = float(np.vdot(v, v).real)
        fid = float(abs(np.vdot(omega, v)) ** 2 / norm) if norm > MIN_ACCEPTANCE else 0.0
        return 1.0 - fid, acc


# ----------------------------------------------------------------- driver

def _resolve(ansatz) -> tuple[str, Circuit]:
    if isinstance(ansatz, Circuit):
        return ansatz.name or "circuit", ansatz
    return str(ansatz).lower(), build_ansatz(str(ansatz))


def random_starts(k: int, n: int, seed) -> np.ndarray:
    return np.random.default_rng(seed).uniform(-np.pi, np.pi, size=(n, k))


def _starts(c: Circuit, lam: float, cfg: OptimizerConfig) -> np.ndarray:
    return random_starts(c.n_slots, cfg.candidates, [cfg.seed, int(round(lam * 1e6))])


def _finish(name: str, obj: Objective, results, t0: float) -> VqeRun:
    energies = [r.fun for r in results]
    failed = [i for i, e in enumerate(energies) if e >= obj.reject_value]
    # np.argmin keeps the lowest candidate index among ties
    best = int(np.argmin(energies))
    x = results[best].x
    infid, acc = obj.diagnostics(x)
    exact = ground_state(model_for(3).hamiltonian(obj.lam))[0]
    return VqeRun(name, obj.lam, obj.mode, x, float(energies[best]), float(exact), infid,
                  [r.n_evals for r in results], acc, [r.converged for r in results],
                  failed, [float(e) for e in energies], time.perf_counter() - t0)


def vqe(ansatz, lam: float, mode: str = "ideal", cfg: OptimizerConfig | None = None,
        x0s: np.ndarray | None = None) -> VqeRun:
    """Best of ``cfg.candidates`` Powell runs from uniform random starts."""
    cfg = cfg or OptimizerConfig()
    name, c = _resolve(ansatz)
    t0 = time.perf_counter()
    obj = Objective(c, lam, mode, cfg)
    x0s = _starts(c, lam, cfg) if x0s is None else np.atleast_2d(np.asarray(x0s, dtype=float))
    results = minimize_many(obj, x0s, cfg.powell(mode))
    return _finish(name, obj, results, t0)


def _ideal_sweep(name: str, c: Circuit, lambdas: list[float], cfg: OptimizerConfig) -> list[VqeRun]:
    """All λ points in one lockstep batch (same circuit, different H).

    Every candidate starts where it would in a separate :func:`vqe` call;
    results agree up to floating-point differences from the batch shape.
    """
    t0 = time.perf_counter()
    objs = [Objective(c, lam, "ideal", cfg) for lam in lambdas]
    x0s = np.concatenate([_starts(c, lam, cfg) for lam in lambdas])
    owner = np.repeat(np.arange(len(lambdas)), cfg.candidates)
    prog, take = objs[0].program, objs[0].take

    def fbatch(X, idx):
        phi = prog.run(X)[:, take]
        out = np.empty(len(X))
        lab = owner[idx]
        for l in np.unique(lab):
            sel = lab == l
            out[sel] = objs[l].energies(phi[sel])
        return out

    results = minimize_many(fbatch, x0s, cfg.powell("ideal"), indexed=True)
    k = cfg.candidates
    return [_finish(name, obj, results[i * k:(i + 1) * k], t0) for i, obj in enumerate(objs)]


def trapezoid_mean(xs: Sequence[float], ys: Sequence[float]) -> float:
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) == 1:
        return float(ys[0])
    span = xs[-1] - xs[0]
    if span <= 0:
        raise ValueError("grid must be increasing")
    return float(np.trapezoid(ys, xs) / span)


@dataclass
class SweepResult:
    ansatz: str
    mode: str
    runs: list[VqeRun]
    config: OptimizerConfig

    @property
    def lambdas(self) -> list[float]:
        return [r.lam for r in self.runs]

    @property
    def fbar(self) -> float:
        return trapezoid_mean(self.lambdas, [r.infidelity for r in self.runs])

    @property
    def f_max(self) -> float:
        return max(r.infidelity for r in self.runs)

    @property
    def M_eval(self) -> float:
        return float(np.mean([r.M_eval for r in self.runs]))

    def to_csv(self) -> str:
        lines = [",".join(CSV_HEADER)]
        for r in self.runs:
            lines.append(",".join(f"{v:.10g}" for v in r.row()))
        return "\n".join(lines) + "\n"

    def manifest(self) -> dict:
        return {
            "ansatz": self.ansatz,
            "mode": self.mode,
            "lambdas": self.lambdas,
            "config": self.config.to_dict(),
            "fbar": self.fbar,
            "f_max": self.f_max,
            "M_eval": self.M_eval,
            "params": {f"{r.lam:.6g}": [float(v) for v in r.params] for r in self.runs},
        }

    def manifest_json(self) -> str:
        return json.dumps(self.manifest(), indent=2)


def sweep(ansatz, lambdas: Sequence[float], mode: str = "ideal",
          cfg: OptimizerConfig | None = None) -> SweepResult:
    lambdas = [float(v) for v in lambdas]
    if not lambdas or any(not 0.0 <= v <= 1.0 for v in lambdas):
        raise ValueError("lambda grid must be non-empty and inside [0, 1]")
    if any(b <= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda grid must be strictly increasing")
    cfg = cfg or OptimizerConfig()
    name, c = _resolve(ansatz)
    if mode == "ideal":
        runs = _ideal_sweep(name, c, lambdas, cfg)
    else:
        runs = [vqe(c, lam, mode, cfg) for lam in lambdas]
    return SweepResult(name, mode, runs, cfg)


# ----------------------------------------------------------------- eval scaling

@dataclass
class ScalingFit:
    # log M = a + b log f   and   log M = a + b f
    power: tuple[float, float]
    exponential: tuple[float, float]
    n_points: int

    def predict_power(self, f: float) -> float:
        a, b = self.power
        return math.exp(a + b * math.log(f))

    def predict_exponential(self, f: float) -> float:
        a, b = self.exponential
        return math.exp(a + b * f)


def fit_eval_scaling(fbars: Sequence[float], m_evals: Sequence[float]) -> ScalingFit:
    """Least-squares fits of log(M_eval) against log(f̄) and against f̄."""
    f = np.asarray(fbars, dtype=float)
    m = np.asarray(m_evals, dtype=float)
    if f.shape != m.shape or len(f) < 3:
        raise ValueError("need at least three (fbar, M_eval) points")
    if np.any(f <= 0) or np.any(m <= 0):
        raise ValueError("fbar and M_eval must be positive")
    if np.ptp(f) == 0:
        raise ValueError("fbar values are all equal")
    ly = np.log(m)
    b1, a1 = np.polyfit(np.log(f), ly, 1)
    b2, a2 = np.polyfit(f, ly, 1)
    return ScalingFit((float(a1), float(b1)), (float(a2), float(b2)), len(f))
