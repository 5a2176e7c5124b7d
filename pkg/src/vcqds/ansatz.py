"""Hamiltonian-ansatz circuits: ordered exponentials of (grouped) Pauli strings."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .pauli import PauliString, commutes
from .statevector import _check_state, apply_pauli, apply_pauli_rotation


@dataclass(frozen=True)
class AnsatzCircuit:
    """``U(theta) = exp(-i theta_M G_M) ... exp(-i theta_1 G_1)``.

    ``groups[j]`` lists the mutually commuting strings whose sum is ``G_j``; groups are applied
    first-to-last. ``layers`` records which block each group came from.
    """

    groups: tuple[tuple[PauliString, ...], ...]
    thetas: np.ndarray = field(repr=False)
    layers: tuple[str, ...] = ()

    def __post_init__(self):
        thetas = np.asarray(self.thetas, dtype=float)
        if thetas.shape != (len(self.groups),):
            raise ValueError(f"{len(self.groups)} groups but {thetas.shape} parameters")
        for grp in self.groups:
            if not grp:
                raise ValueError("empty generator group")
            for i, p in enumerate(grp):
                if not all(commutes(p, q) for q in grp[i + 1 :]):
                    raise ValueError(f"group members must commute: {[q.label for q in grp]}")
        object.__setattr__(self, "thetas", thetas)

    @classmethod
    def from_groups(cls, groups: Sequence[Sequence[PauliString]], layers: Sequence[str] = ()) -> "AnsatzCircuit":
        groups = tuple(tuple(g) for g in groups)
        return cls(groups, np.zeros(len(groups)), tuple(layers))

    @property
    def n_params(self) -> int:
        return len(self.groups)

    @property
    def n_qubits(self) -> int:
        return self.groups[0][0].n_qubits

    def with_thetas(self, thetas) -> "AnsatzCircuit":
        return AnsatzCircuit(self.groups, np.array(thetas, dtype=float), self.layers)


def hamiltonian_ansatz(strings: Sequence[PauliString], n_layers: int) -> AnsatzCircuit:
    """One parameter per string per layer, strings applied in the given order."""
    groups = [(p,) for _ in range(n_layers) for p in strings]
    layers = [f"L{layer}" for layer in range(n_layers) for _ in strings]
    return AnsatzCircuit.from_groups(groups, layers)


def ansatz_apply(circuit: AnsatzCircuit, psi0: np.ndarray) -> np.ndarray:
    psi = np.array(psi0, dtype=complex)
    for grp, th in zip(circuit.groups, circuit.thetas):
        for p in grp:
            psi = apply_pauli_rotation(psi, p, th)
    return psi


def ansatz_apply_and_derivatives(circuit: AnsatzCircuit, psi0: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Return ``psi = U psi0`` and the stacked derivative states ``d psi / d theta_j`` (rows).

    One sweep: after gate ``j`` acts, the new row ``-i G_j psi`` is appended and every later gate
    is applied to the current state and all rows at once.
    """
    _check_state(psi0, circuit.n_qubits)
    n_p = circuit.n_params
    stack = np.zeros((n_p + 1, psi0.shape[-1]), dtype=complex)
    stack[0] = psi0
    for j, (grp, th) in enumerate(zip(circuit.groups, circuit.thetas)):
        live = stack[: j + 1]
        for p in grp:
            live = apply_pauli_rotation(live, p, th)
        stack[: j + 1] = live
        gen_psi = np.zeros_like(live[0])
        for p in grp:
            gen_psi += apply_pauli(live[0], p)
        stack[j + 1] = -1j * gen_psi
    return stack[0], stack[1:]
