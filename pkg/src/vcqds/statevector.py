"""Dense state-vector kernels and the eigendecomposition propagator used as the exact reference.

States are plain complex numpy arrays of length ``2**n``; qubit ``i`` is bit ``i`` of the
amplitude index.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path

import numpy as np

from .pauli import PauliString, PauliSum

MAX_QUBITS = 14


class DimensionError(ValueError):
    pass


def _check_qubits(n: int) -> None:
    if n > MAX_QUBITS:
        raise DimensionError(f"dense simulation is capped at {MAX_QUBITS} qubits, got {n}")


def _check_state(state: np.ndarray, n: int) -> None:
    if state.shape[-1] != 1 << n:
        raise DimensionError(f"state of length {state.shape[-1]} does not match {n} qubits")


@lru_cache(maxsize=8192)
def _pauli_action(n: int, x: int, z: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (perm, phase) with ``(P psi)[c] = phase[c] * psi[perm[c]]``."""
    _check_qubits(n)
    idx = np.arange(1 << n, dtype=np.int64)
    src = idx ^ x
    y = (x & z).bit_count()
    sign = 1 - 2 * (np.bitwise_count(src & z).astype(np.int64) & 1)
    phase = (1j**y) * sign
    src.setflags(write=False)
    phase = phase.astype(complex)
    phase.setflags(write=False)
    return src, phase


def apply_pauli(state: np.ndarray, p: PauliString) -> np.ndarray:
    """``P |psi>``; works on a single state or a stack of states along the last axis."""
    _check_state(state, p.n_qubits)
    perm, phase = _pauli_action(p.n_qubits, p.x_mask, p.z_mask)
    return phase * state[..., perm]


def apply_pauli_sum(state: np.ndarray, op: PauliSum) -> np.ndarray:
    out = np.zeros_like(state, dtype=complex)
    for p, c in op:
        out += c * apply_pauli(state, p)
    return out


def apply_pauli_rotation(state: np.ndarray, p: PauliString, theta: float) -> np.ndarray:
    """``exp(-i theta P) |psi>`` = cos(theta) psi - i sin(theta) P psi."""
    _check_state(state, p.n_qubits)
    if p.is_identity():
        return np.exp(-1j * theta) * state
    perm, phase = _pauli_action(p.n_qubits, p.x_mask, p.z_mask)
    return np.cos(theta) * state - 1j * np.sin(theta) * (phase * state[..., perm])


def expectation(state: np.ndarray, op: PauliSum) -> float:
    if not op.is_real():
        raise ValueError("expectation needs a Hermitian (real-coefficient) PauliSum")
    val = np.vdot(state, apply_pauli_sum(state, op))
    if abs(val.imag) > 1e-12 * max(1.0, op.norm()):
        raise ArithmeticError(f"expectation value has imaginary part {val.imag:.3e}")
    return float(val.real)


def pauli_sum_matrix(op: PauliSum) -> np.ndarray:
    n = op.n_qubits
    _check_qubits(n)
    dim = 1 << n
    mat = np.zeros((dim, dim), dtype=complex)
    cols = np.arange(dim)
    for p, c in op:
        perm, phase = _pauli_action(n, p.x_mask, p.z_mask)
        # row r picks column perm[r]
        mat[cols, perm] += c * phase
    return mat


def basis_state(n_qubits: int, bits: str | int = 0) -> np.ndarray:
    """Computational basis state; a bit string is read with its leftmost character as qubit 0."""
    _check_qubits(n_qubits)
    if isinstance(bits, str):
        if len(bits) != n_qubits or set(bits) - {"0", "1"}:
            raise ValueError(f"bad bitstring {bits!r} for {n_qubits} qubits")
        index = sum(1 << i for i, b in enumerate(bits) if b == "1")
    else:
        index = bits
    psi = np.zeros(1 << n_qubits, dtype=complex)
    psi[index] = 1.0
    return psi


def fidelity(a: np.ndarray, b: np.ndarray) -> float:
    return float(abs(np.vdot(a, b)) ** 2)


@dataclass(frozen=True)
class DensePropagator:
    n_qubits: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @classmethod
    def from_pauli_sum(cls, op: PauliSum) -> "DensePropagator":
        w, v = np.linalg.eigh(pauli_sum_matrix(op))
        return cls(op.n_qubits, w, v)

    def matrix(self) -> np.ndarray:
        return (self.eigenvectors * self.eigenvalues) @ self.eigenvectors.conj().T

    def unitary(self, t: float) -> np.ndarray:
        return (self.eigenvectors * np.exp(-1j * self.eigenvalues * t)) @ self.eigenvectors.conj().T


def exact_propagate(prop: DensePropagator, state: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t) |psi>`` through the stored eigendecomposition."""
    _check_state(state, prop.n_qubits)
    coeffs = prop.eigenvectors.conj().T @ state
    return prop.eigenvectors @ (np.exp(-1j * prop.eigenvalues * t) * coeffs)


def save_state(path: str | Path, state: np.ndarray) -> None:
    """Text snapshot: one ``re im`` pair per line, amplitude index order (qubit 0 fastest)."""
    np.savetxt(path, np.column_stack([state.real, state.imag]), fmt="%.17e")


def load_state(path: str | Path) -> np.ndarray:
    data = np.loadtxt(path, ndmin=2)
    return data[:, 0] + 1j * data[:, 1]
