from functools import reduce
from itertools import product

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from thetavqe.circuit import KINDS, Circuit, Gate, circuit_unitary, embed_gate, gate_matrix
from thetavqe.encoding import embed_hamiltonian, pauli_decompose
from thetavqe.simulator import (
    AllShotsRejected, NoiseSpec, NoisyProgram, Program, data_state, expectation, post_select,
    post_select_counts, sample, simulate_noisy, simulate_state,
)

PAULI = {
    "I": np.eye(2), "X": np.array([[0, 1], [1, 0]]),
    "Y": np.array([[0, -1j], [1j, 0]]), "Z": np.diag([1, -1]),
}


def random_circuit(n, n_gates, rng, kinds=("RY", "RZ", "H", "X", "CNOT", "CZ", "SWAP",
                                           "TOFFOLI", "PTOFFOLI", "CSWAP", "CRY")):
    c = Circuit(n)
    for _ in range(n_gates):
        kind = str(rng.choice([k for k in kinds if k not in ("TOFFOLI", "PTOFFOLI", "CSWAP") or n >= 3]))
        if kind in ("RY", "RZ"):
            c.rot(kind, int(rng.integers(n)))
        elif kind == "CRY":
            k = 2 if n < 3 else int(rng.integers(2, 4))
            c.rot("CRY", *map(int, rng.choice(n, k, replace=False)))
        else:
            k = 1 if kind in ("H", "X") else 2 if kind in ("CNOT", "CZ", "SWAP") else 3
            c.add(kind, *map(int, rng.choice(n, k, replace=False)))
    return c


@pytest.mark.parametrize("kind", sorted(KINDS - {"MEASURE"}))
def test_gate_unitarity(kind):
    n = 3 if kind in ("TOFFOLI", "PTOFFOLI", "CSWAP") else 2 if kind in ("CNOT", "CZ", "SWAP") else 1
    u = gate_matrix(kind, 0.37, 3 if kind == "CRY" else n)
    assert np.max(np.abs(u.conj().T @ u - np.eye(len(u)))) <= 1e-14


def test_phased_toffoli_identity():
    d = gate_matrix("PTOFFOLI").conj().T @ gate_matrix("TOFFOLI")
    expected = np.eye(8)
    expected[0b101, 0b101] = -1
    assert np.allclose(d, expected, atol=0)


def test_phased_toffoli_action():
    c = Circuit(3)
    c.add("X", 0)
    c.add("X", 2)
    c.add("PTOFFOLI", 0, 1, 2)
    psi = simulate_state(c)
    assert psi[0b101] == pytest.approx(-1)
    c2 = Circuit(3)
    c2.add("X", 0)
    c2.add("X", 1)
    c2.add("PTOFFOLI", 0, 1, 2)
    assert simulate_state(c2)[0b111] == pytest.approx(1)


def test_gate_validation():
    with pytest.raises(ValueError):
        Gate("CNOT", (0, 0))
    with pytest.raises(ValueError):
        Gate("RY", (0,))
    with pytest.raises(ValueError):
        Gate("H", (0,), theta=1.0)
    with pytest.raises(ValueError):
        Gate("FOO", (0,))
    c = Circuit(2)
    with pytest.raises(ValueError):
        c.add("X", 2)
    with pytest.raises(ValueError):
        c.add("RY", 0, slot=0)


def test_text_roundtrip():
    rng = np.random.default_rng(1)
    c = random_circuit(4, 30, rng)
    c.add("RY", 1, theta=0.25)
    c.add("RZ", 2, slot=0, scale=-0.5)
    c.postselect = {3: 0}
    c.data, c.ancillas = (0, 1, 2), (3,)
    c.name = "demo"
    back = Circuit.from_text(c.to_text())
    assert back.to_text() == c.to_text()
    assert back.gates == c.gates
    assert Gate.from_line("RY 0 theta=0.5") == Gate("RY", (0,), theta=0.5)


def test_empty_circuit_is_vacuum():
    psi = simulate_state(Circuit(3))
    assert psi[0] == 1 and np.count_nonzero(psi) == 1


def test_ry_pi_flips():
    c = Circuit(1)
    c.rot("RY", 0)
    psi = simulate_state(c, [np.pi])
    assert abs(psi[1]) == pytest.approx(1.0)


def test_parameter_count_checked():
    c = Circuit(1)
    c.rot("RY", 0)
    with pytest.raises(ValueError):
        simulate_state(c, [])


@pytest.mark.parametrize("seed", range(10))
def test_statevector_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    c = random_circuit(5, 40, rng)
    params = rng.uniform(-np.pi, np.pi, c.n_slots)
    psi = simulate_state(c, params)
    U = circuit_unitary(c, params)
    assert np.max(np.abs(psi - U[:, 0])) < 1e-10
    A = rng.normal(size=(32, 32)) + 1j * rng.normal(size=(32, 32))
    H = A + A.conj().T
    assert np.vdot(psi, H @ psi).real == pytest.approx(np.vdot(U[:, 0], H @ U[:, 0]).real, abs=1e-10)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)


def test_batched_program_matches_single_runs():
    rng = np.random.default_rng(5)
    c = random_circuit(4, 25, rng)
    X = rng.uniform(-np.pi, np.pi, (6, c.n_slots))
    batch = Program(c).run(X)
    for row, x in zip(batch, X):
        assert np.allclose(row, simulate_state(c, x), atol=1e-13)


def test_embed_gate_ordering():
    # CNOT with control on qubit 2 and target on qubit 0 of a 3-qubit register
    U = embed_gate(gate_matrix("CNOT"), (2, 0), 3)
    assert U[0b101, 0b001] == 1 and U[0b100, 0b100] == 1


def test_expectation_examples():
    c = Circuit(6)
    assert expectation(c, [], np.eye(64)) == pytest.approx(1.0)
    assert expectation(c, [], embed_hamiltonian(None, 0.0)) == 0.0
    rng = np.random.default_rng(2)
    c2 = random_circuit(6, 30, rng, kinds=("RY", "CNOT", "H"))
    x = rng.uniform(-np.pi, np.pi, c2.n_slots)
    H = embed_hamiltonian(None, 0.5)
    assert expectation(c2, x, pauli_decompose(H)) == pytest.approx(expectation(c2, x, H), abs=1e-10)


def test_expectation_two_qubit_vs_bruteforce():
    rng = np.random.default_rng(4)
    c = random_circuit(2, 12, rng, kinds=("RY", "RZ", "H", "CNOT", "CZ"))
    x = rng.uniform(-np.pi, np.pi, c.n_slots)
    psi = np.zeros(4, complex)
    psi[0] = 1
    for g in c.gates:
        psi = embed_gate(g.matrix(g.angle(x)), g.qubits, 2) @ psi
    H = np.kron(PAULI["X"], PAULI["Z"]) + 0.3 * np.kron(PAULI["Y"], PAULI["Y"])
    assert expectation(c, x, H) == pytest.approx(np.vdot(psi, H @ psi).real, abs=1e-10)


def test_sampling():
    assert sample(Circuit(3), [], 100, seed=0) == {"000": 100}
    c = Circuit(1)
    c.add("H", 0)
    h = sample(c, [], 10_000, seed=7)
    assert abs(h["0"] - 5000) < 5 * 50
    assert sample(c, [], 500, seed=3) == sample(c, [], 500, seed=3)
    with pytest.raises(ValueError):
        sample(c, [], 0)


def test_post_select_examples():
    c = Circuit(2, data=(0,), ancillas=(1,), postselect={1: 0})
    c.add("H", 0)
    psi, acc = data_state(c, [])
    assert acc == pytest.approx(1.0)
    assert np.allclose(psi, [2**-0.5, 2**-0.5])
    # ancilla rotated by a Hadamard: acceptance one half
    c.add("H", 1)
    psi, acc = data_state(c, [])
    assert acc == pytest.approx(0.5)
    with pytest.raises(AllShotsRejected):
        post_select(simulate_state(Circuit(2)), 2, {1: 1})


def test_post_select_counts():
    out, acc = post_select_counts({"00": 30, "01": 70}, {1: 0}, keep=[0])
    assert out == {"0": 30} and acc == pytest.approx(0.3)
    with pytest.raises(AllShotsRejected):
        post_select_counts({"01": 5}, {1: 0})


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(p2=0.6)
    n = NoiseSpec()
    assert (n.p2, n.p1, n.readout_error) == (0.005, 0.0005, 0.0)


def test_noiseless_trajectories_match_statevector():
    c = Circuit(2)
    c.rot("RY", 0)
    c.add("CZ", 0, 1)
    c.rot("RY", 1)
    x = [0.4, 1.1]
    probs = simulate_noisy(c, x, NoiseSpec(0.0, 0.0), trajectories=3, seed=0)
    assert np.allclose(probs, np.abs(simulate_state(c, x)) ** 2, atol=1e-14)
    with pytest.raises(ValueError):
        simulate_noisy(c, x, NoiseSpec(), trajectories=0)
    c.add("H", 0)
    with pytest.raises(ValueError):
        simulate_noisy(c, x + [], NoiseSpec(), trajectories=1)


def _depolarize(rho, qubits, p, n):
    k = len(qubits)
    out = (1 - p) * rho
    labels = [l for l in product("IXYZ", repeat=k) if set(l) != {"I"}]
    for lab in labels:
        ops = ["I"] * n
        for q, ch in zip(qubits, lab):
            ops[q] = ch
        P = reduce(np.kron, [PAULI[o] for o in ops])
        out = out + p / len(labels) * P @ rho @ P.conj().T
    return out


def exact_channel(c, x, noise):
    n = c.n_qubits
    rho = np.zeros((2**n, 2**n), complex)
    rho[0, 0] = 1
    for g in c.gates:
        U = embed_gate(g.matrix(g.angle(x)), g.qubits, n)
        rho = U @ rho @ U.conj().T
        rho = _depolarize(rho, g.qubits, noise.p2 if g.n_qubits == 2 else noise.p1, n)
    return rho


def test_single_cz_full_depolarizing():
    c = Circuit(2)
    c.add("CZ", 0, 1)
    noise = NoiseSpec(p2=0.5, p1=0.0)
    ZI = np.kron(PAULI["Z"], PAULI["I"])
    rho = exact_channel(c, [], noise)
    mean, err = simulate_noisy(c, [], noise, 100_000, seed=1, observable=ZI)
    assert np.trace(rho @ ZI).real == pytest.approx(1 - 2 * 0.5 * 8 / 15)
    assert abs(mean - np.trace(rho @ ZI).real) < 5 * err


def test_trajectories_unbiased_two_qubits():
    c = Circuit(2)
    c.rot("RY", 0)
    c.rot("RY", 1)
    c.add("CZ", 0, 1)
    c.rot("RZ", 0)
    c.rot("RY", 1)
    c.add("CZ", 1, 0)
    c.rot("RY", 0)
    x = [0.7, -1.2, 0.4, 2.0, -0.3]
    noise = NoiseSpec(p2=0.2, p1=0.05)
    O = np.kron(PAULI["Z"], PAULI["Z"]) + 0.5 * np.kron(PAULI["X"], PAULI["I"])
    exact = np.trace(exact_channel(c, x, noise) @ O).real
    mean, err = simulate_noisy(c, x, noise, 100_000, seed=11, observable=O)
    assert abs(mean - exact) < 5 * err


@pytest.mark.parametrize("p", [0.02, 0.3])
def test_bound_draws_match_unbound(p):
    rng = np.random.default_rng(5)
    c = random_circuit(4, 30, rng, kinds=("H", "X", "CZ", "RY", "RZ"))
    noisy = NoisyProgram(c, NoiseSpec(p2=p, p1=p / 3))
    T, B = 16, 3
    draws = noisy.draw(T, np.random.default_rng(8))
    X = rng.uniform(-np.pi, np.pi, (B, c.n_slots))
    ref = noisy.run(np.repeat(X, T, axis=0), [np.tile(d, (B, 1)) for d in draws])
    assert np.allclose(noisy.bind(draws).run(X), ref, atol=1e-12)
