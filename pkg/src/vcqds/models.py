"""Model Hamiltonians, initial states, observables and ansatz layouts for the simulated systems."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ansatz import AnsatzCircuit, hamiltonian_ansatz
from .pauli import PauliError, PauliString, PauliSum, parse_pauli_text
from .statevector import DensePropagator, basis_state

# 2x3 grid, qubits 0..5 = sites 1..6; bonds read off the grouped ZZ generators of the ansatz
ISING_2X3_BONDS = ((0, 1), (0, 2), (1, 3), (2, 3), (2, 4), (3, 5), (4, 5))
# grouped ZZ generators of one U_h block, in application order (Z1Z2 acts first)
ISING_2X3_UH_GROUPS = (((0, 1),), ((0, 2), (1, 3)), ((2, 3),), ((2, 4), (3, 5)), ((4, 5),))


def pauli_op(n: int, ops: Sequence[tuple[int, str]]) -> PauliString:
    x = z = 0
    for q, kind in ops:
        p = PauliString.single(n, q, kind)
        x ^= p.x_mask
        z ^= p.z_mask
    return PauliString(n, x, z)


def zz(n: int, i: int, j: int) -> PauliString:
    return pauli_op(n, [(i, "Z"), (j, "Z")])


def spin_z(n: int, site: int) -> PauliSum:
    """S_z = Z/2 on one site."""
    return PauliSum(n, [(PauliString.single(n, site, "Z"), 0.5)])


@dataclass
class ModelBundle:
    name: str
    H0: PauliSum
    initial_state: np.ndarray
    observables: dict[str, PauliSum]
    ansatz: AnsatzCircuit | None = None
    coupling: PauliSum | None = None
    bonds: tuple[tuple[int, int], ...] = ()
    positions: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)

    @property
    def n_qubits(self) -> int:
        return self.H0.n_qubits


def ising_correlation(n: int = 6, bonds=ISING_2X3_BONDS) -> PauliSum:
    return PauliSum(n, [(zz(n, i, j), 1.0 / len(bonds)) for i, j in bonds])


def ising_2x3_ansatz() -> AnsatzCircuit:
    """U_h^3 U_s U_h^3 U_s with the rightmost factor acting first."""
    n = 6
    uh = [tuple(zz(n, i, j) for i, j in grp) for grp in ISING_2X3_UH_GROUPS]
    us = [(PauliString.single(n, q, "X"),) for q in range(n)]
    groups, layers = [], []
    # rightmost factor first: U_s(8), U_h(7), U_h(6), U_h(5), U_s(4), U_h(3), U_h(2), U_h(1)
    for block in range(8, 0, -1):
        gens = us if block in (4, 8) else uh
        groups += gens
        layers += [f"{'Us' if block in (4, 8) else 'Uh'}{block}"] * len(gens)
    return AnsatzCircuit.from_groups(groups, layers)


def ising_2x3(J: float = 1.0, d: float = 1.0) -> ModelBundle:
    n = 6
    terms = [(zz(n, i, j), J / 4) for i, j in ISING_2X3_BONDS]
    terms += [(PauliString.single(n, q, "X"), d) for q in range(n)]
    H0 = PauliSum(n, terms)
    positions = np.array([(q // 2, q % 2) for q in range(n)], dtype=float)
    return ModelBundle(
        name="ising2x3",
        H0=H0,
        initial_state=basis_state(n, 0),
        observables={"C": ising_correlation()},
        ansatz=ising_2x3_ansatz(),
        bonds=ISING_2X3_BONDS,
        positions=positions,
        metadata={"J": J, "d": d},
    )


def heisenberg_terms(n: int, Jx: float, Jy: float, Jz: float, periodic: bool) -> tuple[PauliSum, tuple]:
    if n < 2:
        raise ValueError("a Heisenberg chain needs at least two sites")
    bonds = [(i, i + 1) for i in range(n - 1)]
    if periodic and n > 2:
        bonds.append((n - 1, 0))
    terms = []
    for i, j in bonds:
        for kind, J in (("X", Jx), ("Y", Jy), ("Z", Jz)):
            terms.append((pauli_op(n, [(i, kind), (j, kind)]), J))
    return PauliSum(n, terms), tuple(bonds)


def singlet() -> np.ndarray:
    """(|01> - |10>)/sqrt(2) with site 1 = qubit 0; '0' is spin up."""
    return (basis_state(2, "01") - basis_state(2, "10")) / np.sqrt(2)


def ground_state(H: PauliSum) -> np.ndarray:
    prop = DensePropagator.from_pauli_sum(H)
    gaps = np.diff(prop.eigenvalues[:2])
    if gaps.size and gaps[0] < 1e-9:
        raise ValueError("ground state is degenerate")
    psi = prop.eigenvectors[:, 0].astype(complex)
    # fix the global phase: largest amplitude real positive
    k = int(np.argmax(np.abs(psi)))
    return psi * (abs(psi[k]) / psi[k])


def four_site_pattern() -> np.ndarray:
    """Neel configurations weighted 2, nearest-neighbour domain pairs weighted -1, over sqrt(12)."""
    psi = np.zeros(16, dtype=complex)
    for bits in ("0101", "1010"):
        psi[int(bits[::-1], 2)] += 2
    for bits in ("0011", "1001", "1100", "0110"):
        psi[int(bits[::-1], 2)] -= 1
    return psi / np.sqrt(12)


def heisenberg_chain(
    n: int, Jx: float = 1.0, Jy: float = 1.0, Jz: float = 1.0, periodic: bool = True, n_layers: int = 2
) -> ModelBundle:
    H0, bonds = heisenberg_terms(n, Jx, Jy, Jz, periodic)
    if n == 2 and min(Jx, Jy, Jz) > 0:
        psi0 = singlet()
    else:
        psi0 = ground_state(H0)
    coupling = spin_z(n, 0) * 2.0  # kick couples to Z on site 1
    observables = {f"Sz{i + 1}": spin_z(n, i) for i in range(n)}
    strings = H0.strings() + coupling.strings()
    return ModelBundle(
        name=f"heisenberg{n}",
        H0=H0,
        initial_state=psi0,
        observables=observables,
        ansatz=hamiltonian_ansatz(strings, n_layers),
        coupling=coupling,
        bonds=bonds,
        positions=np.arange(n, dtype=float),
        metadata={"Jx": Jx, "Jy": Jy, "Jz": Jz, "periodic": periodic},
    )


class ModelError(ValueError):
    pass


def ingest_molecular(hamiltonian_file: str | Path, dipole_file: str | Path, n_layers: int = 2) -> ModelBundle:
    """Pauli-sum Hamiltonian and dipole files; the reference determinant comes from ``# ref:``."""
    texts = {}
    for key, path in (("H", hamiltonian_file), ("mu", dipole_file)):
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"no such file: {path}")
        texts[key] = parse_pauli_text(path.read_text(), source=str(path))
    (H0, h_header), (mu, mu_header) = texts["H"], texts["mu"]
    if H0.n_qubits != mu.n_qubits:
        raise ModelError(f"qubit count mismatch: Hamiltonian {H0.n_qubits}, dipole {mu.n_qubits}")
    ref = h_header.get("ref") or mu_header.get("ref") or "0" * H0.n_qubits
    try:
        psi0 = basis_state(H0.n_qubits, ref)
    except ValueError as exc:
        raise ModelError(str(exc)) from None
    strings = [p for p in H0.strings() + mu.strings() if not p.is_identity()]
    strings = list(dict.fromkeys(strings))
    if not strings:
        raise PauliError("model has no non-identity terms")
    return ModelBundle(
        name=Path(hamiltonian_file).stem,
        H0=H0,
        initial_state=psi0,
        observables={"dipole": mu},
        ansatz=hamiltonian_ansatz(strings, n_layers),
        # electric-dipole interaction -mu.E, so absorption comes out with positive Im alpha
        coupling=mu * -1.0,
        metadata={"ref": ref, "hamiltonian_file": str(hamiltonian_file), "dipole_file": str(dipole_file)},
    )


def build_model(name: str, **params) -> ModelBundle:
    """Named models: ``ising2x3``, ``heisenberg2``, ``heisenberg4``."""
    if name == "ising2x3":
        return ising_2x3(params.get("J", 1.0), params.get("d", 1.0))
    if name.startswith("heisenberg"):
        try:
            n = int(name[len("heisenberg") :])
        except ValueError:
            raise ModelError(f"unknown model {name!r}") from None
        J = params.get("J", 1.0)
        return heisenberg_chain(n, J, J, J, periodic=params.get("periodic", True), n_layers=params.get("layers", 2))
    raise ModelError(f"unknown model {name!r}")
