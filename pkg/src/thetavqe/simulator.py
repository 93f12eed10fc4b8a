"""Statevector simulation, post-selection, sampling and Pauli-trajectory noise.

Circuits are compiled once into a short program: runs of fixed gates that
map basis states to basis states (X, CNOT, CZ, Toffoli, ...) are fused into
a single permutation with phases, and each rotation becomes a pair-update on
precomputed index arrays.  A program runs on a batch of states of shape
``(B, 2**n)`` with one parameter vector per row, which is what lets many
optimizer candidates advance together.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .circuit import Circuit, Gate, gate_matrix

MONOMIAL = {"X", "CNOT", "CZ", "SWAP", "TOFFOLI", "PTOFFOLI", "CSWAP"}


class AllShotsRejected(RuntimeError):
    """Post-selection left nothing to renormalize."""


@dataclass(frozen=True)
class NoiseSpec:
    p2: float = 0.005
    p1: float = 0.0005
    readout_error: float = 0.0

    def __post_init__(self):
        for name in ("p2", "p1", "readout_error"):
            v = getattr(self, name)
            if not 0.0 <= v <= 0.5:
                raise ValueError(f"{name} must lie in [0, 0.5], got {v}")


def _bit(q: int, n: int) -> int:
    return 1 << (n - 1 - q)


def _monomial_action(g: Gate, n: int) -> tuple[np.ndarray, np.ndarray]:
    """(src, phase) so that new[i] = phase[i] * old[src[i]]."""
    dim = 1 << n
    idx = np.arange(dim)
    u = gate_matrix(g.kind, 0.0, len(g.qubits))
    k = len(g.qubits)
    local = np.zeros(dim, dtype=int)
    for pos, q in enumerate(g.qubits):
        local |= ((idx >> (n - 1 - q)) & 1) << (k - 1 - pos)
    # u is monomial: column j has a single nonzero at row r(j)
    rows = np.argmax(np.abs(u), axis=0)
    inv = np.empty(1 << k, dtype=int)
    inv[rows] = np.arange(1 << k)
    vals = u[rows, np.arange(1 << k)]
    src_local = inv[local]  # the local input that lands on this output
    src = idx.copy()
    for pos, q in enumerate(g.qubits):
        b = _bit(q, n)
        want = (src_local >> (k - 1 - pos)) & 1
        src = (src & ~b) | (want * b)
    phase = vals[src_local]
    return src, phase


class Program:
    """Compiled, batch-capable form of a :class:`Circuit`."""

    def __init__(self, circuit: Circuit, fuse: bool = True):
        self.circuit = circuit
        self.n = circuit.n_qubits
        self.steps: list[tuple] = []
        n = self.n
        idx = np.arange(1 << n)
        pend_src = None
        pend_ph = None

        def flush():
            nonlocal pend_src, pend_ph
            if pend_src is not None:
                real = bool(np.all(pend_ph.imag == 0))
                ph = None if np.all(pend_ph == 1) else (pend_ph.real if real else pend_ph)
                self.steps.append(("perm", pend_src, ph))
            pend_src = pend_ph = None

        for g in circuit.gates:
            if g.kind == "MEASURE":
                raise ValueError("measurement gates cannot be simulated as unitaries")
            if g.kind in MONOMIAL:
                src, ph = _monomial_action(g, n)
                if pend_src is None or not fuse:
                    flush()
                    pend_src, pend_ph = src, ph.astype(complex)
                else:
                    # new = ph * (prev)[src] where prev = pend_ph * old[pend_src]
                    pend_ph = ph * pend_ph[src]
                    pend_src = pend_src[src]
                continue
            flush()
            if g.kind == "H":
                b = _bit(g.qubits[0], n)
                self.steps.append(("h", idx ^ b, np.where(idx & b, -1.0, 1.0)))
                continue
            # parameterized or fixed-angle rotation, possibly controlled
            *ctrls, t = g.qubits
            if not ctrls:
                # uncontrolled: new = c ψ + s · sign · ψ[i ^ bit]  (contiguous ops only)
                b = _bit(t, n)
                sign = np.where(idx & b, 1.0, -1.0)
                kind = "rz1" if g.kind == "RZ" else "ry1"
                self.steps.append((kind, idx ^ b, sign, g.slot, g.scale, g.theta, t))
                continue
            mask = np.ones(1 << n, dtype=bool)
            for c in ctrls:
                mask &= (idx & _bit(c, n)) != 0
            b = _bit(t, n)
            i0 = idx[mask & ((idx & b) == 0)]
            kind = "rz" if g.kind == "RZ" else "ry"
            self.steps.append((kind, i0, i0 | b, g.slot, g.scale, g.theta))
        flush()
        # leading steps with real matrices can run in float64
        self.real_prefix = 0
        for st in self.steps:
            if st[0] in ("ry", "ry1", "h") or (st[0] == "perm" and not np.iscomplexobj(st[2])):
                self.real_prefix += 1
            else:
                break

    def run(self, params: np.ndarray, psi0: np.ndarray | None = None) -> np.ndarray:
        """Evolve a batch.  ``params`` has shape (B, k) or (k,)."""
        params = np.asarray(params, dtype=float)
        single = params.ndim == 1
        if single:
            params = params[None, :]
        if params.shape[1] != self.circuit.n_slots:
            raise ValueError(f"expected {self.circuit.n_slots} parameters, got {params.shape[1]}")
        B = params.shape[0]
        start = 0
        if psi0 is None:
            psi = np.zeros((B, 1 << self.n))
            psi[:, 0] = 1.0
            for step in self.steps[:self.real_prefix]:
                psi = self._apply(step, psi, params)
            start = self.real_prefix
            psi = psi.astype(complex)
        else:
            psi = np.array(np.broadcast_to(psi0, (B, 1 << self.n)), dtype=complex)
        for step in self.steps[start:]:
            psi = self._apply(step, psi, params)
        return psi[0] if single else psi

    @staticmethod
    def _angles(step, params):
        slot, scale, theta = step[3], step[4], step[5]
        if slot is None:
            return np.full((params.shape[0], 1), theta)
        return (scale * params[:, slot])[:, None]

    def _apply(self, step, psi, params):
        kind = step[0]
        if kind == "perm":
            out = np.take(psi, step[1], axis=1)
            return out if step[2] is None else out * step[2]
        if kind == "h":
            return (psi * step[2] + np.take(psi, step[1], axis=1)) * (1 / np.sqrt(2))
        th = self._angles(step, params)
        if kind == "ry1":
            return np.cos(th / 2) * psi + np.sin(th / 2) * (np.take(psi, step[1], axis=1) * step[2])
        if kind == "rz1":
            t = step[6]
            ph = np.exp(0.5j * th * np.array([-1.0, 1.0]))  # (B, 2)
            v = psi.reshape(psi.shape[0], 1 << t, 2, -1)
            return (v * ph[:, None, :, None]).reshape(psi.shape)
        i0, i1 = step[1], step[2]
        if kind == "ry":
            c, s = np.cos(th / 2), np.sin(th / 2)
            a0, a1 = psi[:, i0], psi[:, i1]
            psi[:, i0] = c * a0 - s * a1
            psi[:, i1] = s * a0 + c * a1
            return psi
        # rz
        psi[:, i0] *= np.exp(-0.5j * th)
        psi[:, i1] *= np.exp(0.5j * th)
        return psi


_PROGRAMS: dict[int, tuple[Circuit, int, Program]] = {}


def program_for(c: Circuit) -> Program:
    """Cached compile keyed on circuit identity and length."""
    key = id(c)
    hit = _PROGRAMS.get(key)
    if hit is not None and hit[0] is c and hit[1] == len(c.gates):
        return hit[2]
    prog = Program(c)
    _PROGRAMS[key] = (c, len(c.gates), prog)
    return prog


def simulate_state(c: Circuit, params: Sequence[float] = ()) -> np.ndarray:
    params = np.asarray(params, dtype=float).reshape(-1)
    if len(params) != c.n_slots:
        raise ValueError(f"expected {c.n_slots} parameters, got {len(params)}")
    return program_for(c).run(params)


def _cond_mask(n: int, conditions: Mapping[int, int]) -> np.ndarray:
    idx = np.arange(1 << n)
    mask = np.ones(1 << n, dtype=bool)
    for q, bit in conditions.items():
        mask &= ((idx >> (n - 1 - q)) & 1) == bit
    return mask


def reduce_index(n: int, keep: Sequence[int]) -> np.ndarray:
    """Map each full index to the index over the kept qubits (in order)."""
    idx = np.arange(1 << n)
    out = np.zeros(1 << n, dtype=int)
    for pos, q in enumerate(keep):
        out |= ((idx >> (n - 1 - q)) & 1) << (len(keep) - 1 - pos)
    return out


def post_select(psi: np.ndarray, n: int, conditions: Mapping[int, int],
                keep: Sequence[int] | None = None) -> tuple[np.ndarray, float]:
    """Project ancillas onto the required bits and renormalize.

    Returns the state on the remaining qubits (``keep``, default all
    unconditioned qubits in order) and the acceptance probability.
    """
    if keep is None:
        keep = [q for q in range(n) if q not in conditions]
    mask = _cond_mask(n, conditions)
    full_idx = np.nonzero(mask)[0]
    red = reduce_index(n, keep)[full_idx]
    out = np.zeros(1 << len(keep), dtype=complex)
    np.add.at(out, red, psi[full_idx])
    acc = float(np.vdot(out, out).real)
    if acc <= 1e-14:
        raise AllShotsRejected("all shots rejected by post-selection")
    return out / np.sqrt(acc), acc


def data_state(c: Circuit, params: Sequence[float]) -> tuple[np.ndarray, float]:
    """Post-selected state on the data qubits and its acceptance rate."""
    psi = simulate_state(c, params)
    return post_select(psi, c.n_qubits, c.postselect, keep=list(c.data))


def expectation(c: Circuit, params: Sequence[float], H) -> float:
    """⟨H⟩ on the data register after post-selection.

    ``H`` is a dense matrix over the data qubits or a list of PauliTerms.
    """
    from .encoding import pauli_matrix

    psi, _ = data_state(c, params)
    if isinstance(H, np.ndarray):
        return float(np.vdot(psi, H @ psi).real)
    total = 0.0
    for t in H:
        total += t.coeff * float(np.vdot(psi, pauli_matrix(t.letters) @ psi).real)
    return total


def histogram_from_probs(probs: np.ndarray, n: int, shots: int, rng) -> dict[str, int]:
    probs = np.clip(np.asarray(probs, dtype=float), 0, None)
    probs = probs / probs.sum()
    counts = rng.multinomial(shots, probs)
    return {format(i, f"0{n}b"): int(k) for i, k in enumerate(counts) if k}


def sample(c: Circuit, params: Sequence[float], shots: int, seed=None) -> dict[str, int]:
    """Multinomial bitstring histogram over all qubits (qubit 0 leftmost)."""
    if shots < 1:
        raise ValueError("shots must be at least 1")
    psi = simulate_state(c, params)
    rng = np.random.default_rng(seed)
    return histogram_from_probs(np.abs(psi) ** 2, c.n_qubits, shots, rng)


def post_select_counts(hist: Mapping[str, int], conditions: Mapping[int, int],
                       keep: Sequence[int] | None = None) -> tuple[dict[str, int], float]:
    """Shot-level post-selection: drop shots that violate ``conditions``."""
    total = sum(hist.values())
    out: dict[str, int] = {}
    for bits, k in hist.items():
        if all(bits[q] == str(b) for q, b in conditions.items()):
            key = bits if keep is None else "".join(bits[q] for q in keep)
            out[key] = out.get(key, 0) + k
    kept = sum(out.values())
    if kept == 0:
        raise AllShotsRejected("all shots rejected by post-selection")
    return out, kept / total


# ----------------------------------------------------------------- noise

_PAULI_SRC = {"I": (0, 1, 1), "X": (1, 1, 1), "Y": (1, -1j, 1j), "Z": (0, 1, -1)}


class NoisyProgram:
    """Trajectory simulation of a native circuit with depolarizing Paulis.

    Error sites follow every 1- and 2-qubit gate.  For a batch of B
    trajectories the random Pauli draws are made up front, so a fixed
    ``seed`` gives a fixed set of error patterns (common random numbers).
    """

    def __init__(self, circuit: Circuit, noise: NoiseSpec):
        self.circuit = circuit
        self.noise = noise
        self.n = circuit.n_qubits
        self.segments: list[Program] = []
        self.sites: list[tuple[int, ...]] = []
        self.gates = [g for g in circuit.gates if g.kind != "MEASURE"]
        self.site_pos: list[int] = []  # gate index after which each site acts
        seg: list[Gate] = []
        for i, g in enumerate(self.gates):
            seg.append(g)
            p = noise.p2 if g.n_qubits == 2 else noise.p1 if g.n_qubits == 1 else None
            if p is None:
                raise ValueError("noisy simulation expects a lowered circuit (1- and 2-qubit gates)")
            if p > 0:
                self.segments.append(Program(circuit.copy(seg)))
                self.sites.append(g.qubits)
                self.site_pos.append(i)
                seg = []
        self.tail = Program(circuit.copy(seg))
        idx = np.arange(1 << self.n)
        self._idx = idx

    def draw(self, n_traj: int, rng) -> list[np.ndarray]:
        """Pauli labels per site: array (n_traj, arity) over 0..3 = I,X,Y,Z."""
        draws = []
        for qs in self.sites:
            k = len(qs)
            p = self.noise.p2 if k == 2 else self.noise.p1
            hit = rng.random(n_traj) < p
            which = rng.integers(1, 4**k, size=n_traj)  # uniform over non-identity
            lab = np.where(hit, which, 0)
            draws.append(np.stack([(lab >> (2 * (k - 1 - i))) & 3 for i in range(k)], axis=1))
        return draws

    def _apply_paulis(self, psi, qs, labels):
        n = self.n
        rows = np.nonzero(np.any(labels != 0, axis=1))[0]
        if len(rows) == 0:
            return psi
        sub = psi[rows]
        for pos, q in enumerate(qs):
            lab = labels[rows, pos]
            b = _bit(q, n)
            bitval = (self._idx & b) != 0
            # Y = i X Z, so apply Z, then X, then the factor i
            zmask = (lab == 3) | (lab == 2)
            if np.any(zmask):
                sub[zmask] = sub[zmask] * np.where(bitval, -1.0, 1.0)
            flip = (lab == 1) | (lab == 2)
            if np.any(flip):
                sub[flip] = sub[flip][:, self._idx ^ b]
            ymask = lab == 2
            if np.any(ymask):
                sub[ymask] = sub[ymask] * 1j
        psi[rows] = sub
        return psi

    def bind(self, draws: list[np.ndarray], n_traj: int | None = None) -> "BoundNoise":
        """Fix a set of error patterns and fuse the error-free stretches.

        ``n_traj`` is only needed when the circuit has no noisy sites.
        """
        return BoundNoise(self, draws, n_traj)

    def run(self, params: np.ndarray, draws: list[np.ndarray]) -> np.ndarray:
        """States for each trajectory.  ``params``: (k,) or (B, k)."""
        params = np.asarray(params, dtype=float)
        B = draws[0].shape[0] if draws else (params.shape[0] if params.ndim == 2 else 1)
        if params.ndim == 1:
            params = np.broadcast_to(params, (B, len(params)))
        psi = np.zeros((B, 1 << self.n), dtype=complex)
        psi[:, 0] = 1.0
        for prog, qs, lab in zip(self.segments, self.sites, draws):
            psi = prog.run(params, psi)
            psi = self._apply_paulis(psi, qs, lab)
        return self.tail.run(params, psi)


class BoundNoise:
    """A :class:`NoisyProgram` with its Pauli draws fixed.

    Only sites where at least one trajectory has an error split the
    circuit, and everything before the first such site is simulated once
    per parameter row and then copied to all trajectories.
    """

    def __init__(self, noisy: NoisyProgram, draws: list[np.ndarray], n_traj: int | None = None):
        self.noisy = noisy
        self.n_traj = draws[0].shape[0] if draws else (n_traj or 1)
        hit = [k for k, d in enumerate(draws) if np.any(d != 0)]
        c = noisy.circuit
        self.segments: list[Program] = []
        self.labels: list[np.ndarray] = []
        self.qubits: list[tuple[int, ...]] = []
        start = 0
        for k in hit:
            end = noisy.site_pos[k] + 1
            self.segments.append(Program(c.copy(noisy.gates[start:end])))
            self.labels.append(draws[k])
            self.qubits.append(noisy.sites[k])
            start = end
        self.tail = Program(c.copy(noisy.gates[start:]))

    def run(self, params: np.ndarray) -> np.ndarray:
        """States of shape (B * T, 2^n), trajectories of each row adjacent."""
        X = np.atleast_2d(np.asarray(params, dtype=float))
        B, T = X.shape[0], self.n_traj
        if not self.segments:
            return np.repeat(self.tail.run(X), T, axis=0)
        psi = np.repeat(self.segments[0].run(X), T, axis=0)
        XT = np.repeat(X, T, axis=0)
        for k, prog in enumerate(self.segments):
            if k:
                psi = prog.run(XT, psi)
            psi = self.noisy._apply_paulis(psi, self.qubits[k], np.tile(self.labels[k], (B, 1)))
        return self.tail.run(XT, psi)


def simulate_noisy(c: Circuit, params: Sequence[float], noise: NoiseSpec,
                   trajectories: int, seed=None, observable: np.ndarray | None = None):
    """Trajectory-averaged expectation (mean, standard error) of a diagonal
    or dense observable on all qubits, or the averaged probability vector
    when ``observable`` is None."""
    if trajectories < 1:
        raise ValueError("trajectories must be at least 1")
    if not c.is_native():
        raise ValueError("circuit must be lowered to native gates first")
    rng = np.random.default_rng(seed)
    prog = NoisyProgram(c, noise)
    params = np.asarray(params, dtype=float)
    vals = []
    probs = np.zeros(1 << c.n_qubits)
    chunk = 4096
    done = 0
    while done < trajectories:
        b = min(chunk, trajectories - done)
        draws = prog.draw(b, rng)
        psi = prog.run(np.broadcast_to(params, (b, len(params))), draws) if prog.segments else \
            np.broadcast_to(simulate_state(c, params), (b, 1 << c.n_qubits))
        if observable is None:
            probs += np.sum(np.abs(psi) ** 2, axis=0)
        else:
            obs = np.asarray(observable)
            if obs.ndim == 1:
                vals.append(np.abs(psi) ** 2 @ obs)
            else:
                vals.append(np.einsum("bi,ij,bj->b", psi.conj(), obs, psi).real)
        done += b
    if observable is None:
        return probs / trajectories
    v = np.concatenate(vals)
    return float(v.mean()), float(v.std(ddof=1) / np.sqrt(len(v))) if len(v) > 1 else 0.0
