"""McLachlan variational propagation of an ansatz state under a (time-dependent) Hamiltonian."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ansatz import AnsatzCircuit, ansatz_apply_and_derivatives
from .pauli import PauliSum
from .statevector import apply_pauli_sum

log = logging.getLogger(__name__)

COND_WARN = 1e12


@dataclass
class McLachlanSystem:
    A: np.ndarray
    C: np.ndarray
    M: np.ndarray
    V: np.ndarray
    energy: float
    h2: float
    overlaps: np.ndarray  # <psi | d_j psi>, purely imaginary
    theta_dot: np.ndarray | None = None
    residual: float | None = None
    condition: float | None = None

    def error_functional(self, theta_dot: np.ndarray) -> float:
        """``|| (d/dt + iH) psi ||^2`` for the given parameter velocities."""
        return float(theta_dot @ self.A.real @ theta_dot - 2 * self.C.imag @ theta_dot + self.h2)

    def projected_error(self, theta_dot: np.ndarray) -> float:
        """Same distance with the global phase optimised out."""
        b = self.overlaps.imag
        m = self.A.real - np.outer(b, b)
        v = self.C.imag + self.energy * b
        var = self.h2 - self.energy**2
        return float(theta_dot @ m @ theta_dot - 2 * v @ theta_dot + var)


def assemble_system(
    circuit: AnsatzCircuit, psi0: np.ndarray, H: PauliSum, phase_correction: bool = True
) -> McLachlanSystem:
    psi, dpsi = ansatz_apply_and_derivatives(circuit, psi0)
    h_psi = apply_pauli_sum(psi, H)
    A = dpsi.conj() @ dpsi.T
    C = dpsi.conj() @ h_psi
    energy = float(np.vdot(psi, h_psi).real)
    h2 = float(np.vdot(h_psi, h_psi).real)
    overlaps = dpsi @ psi.conj()
    b = overlaps.imag
    if phase_correction:
        # project the global-phase direction out of the metric and the force
        M = A.real - np.outer(b, b)
        V = C.imag + energy * b
    else:
        M = A.real.copy()
        V = C.imag.copy()
    M = 0.5 * (M + M.T)
    return McLachlanSystem(A=A, C=C, M=M, V=V, energy=energy, h2=h2, overlaps=overlaps)


def solve_theta_dot(system: McLachlanSystem, reg: float = 1e-8) -> np.ndarray:
    """Solve ``(M + reg I) theta_dot = V`` and store velocity, residual and condition number."""
    n = len(system.V)
    if n == 0:
        system.theta_dot = np.zeros(0)
        system.residual = system.h2
        system.condition = 1.0
        return system.theta_dot
    evals = np.linalg.eigvalsh(system.M)
    lo = max(evals[0], 0.0) + reg
    system.condition = float((evals[-1] + reg) / lo)
    if system.condition > COND_WARN:
        log.warning("McLachlan system condition number %.3e", system.condition)
    theta_dot = np.linalg.solve(system.M + reg * np.eye(n), system.V)
    system.theta_dot = theta_dot
    system.residual = system.error_functional(theta_dot)
    return theta_dot


@dataclass
class StepDiagnostics:
    t: float
    residual: float
    projected_residual: float
    condition: float
    thetas: np.ndarray


HamiltonianFn = Callable[[float], PauliSum]


def _velocity(circuit, psi0, H, reg, phase_correction):
    system = assemble_system(circuit, psi0, H, phase_correction)
    return solve_theta_dot(system, reg), system


def step(
    circuit: AnsatzCircuit,
    psi0: np.ndarray,
    H_of_t: HamiltonianFn,
    t: float,
    dt: float,
    scheme: str = "euler",
    reg: float = 1e-8,
    phase_correction: bool = True,
) -> tuple[AnsatzCircuit, StepDiagnostics]:
    if dt <= 0:
        raise ValueError(f"dt must be positive, got {dt}")
    th = circuit.thetas
    k1, system = _velocity(circuit, psi0, H_of_t(t), reg, phase_correction)
    if scheme == "euler":
        new = th + dt * k1
    elif scheme == "rk4":
        k2, _ = _velocity(circuit.with_thetas(th + 0.5 * dt * k1), psi0, H_of_t(t + 0.5 * dt), reg, phase_correction)
        k3, _ = _velocity(circuit.with_thetas(th + 0.5 * dt * k2), psi0, H_of_t(t + 0.5 * dt), reg, phase_correction)
        k4, _ = _velocity(circuit.with_thetas(th + dt * k3), psi0, H_of_t(t + dt), reg, phase_correction)
        new = th + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
    else:
        raise ValueError(f"unknown scheme {scheme!r}")
    diag = StepDiagnostics(
        t=t,
        residual=system.residual,
        projected_residual=system.projected_error(k1),
        condition=system.condition,
        thetas=th.copy(),
    )
    return circuit.with_thetas(new), diag


def evolve(
    circuit: AnsatzCircuit,
    psi0: np.ndarray,
    H_of_t: HamiltonianFn,
    t_end: float,
    dt: float,
    scheme: str = "euler",
    reg: float = 1e-8,
    phase_correction: bool = True,
    t0: float = 0.0,
    callback: Callable[[float, AnsatzCircuit], None] | None = None,
) -> tuple[AnsatzCircuit, list[StepDiagnostics]]:
    """Integrate from ``t0`` to ``t_end`` in fixed steps; ``callback(t, circuit)`` sees every grid point."""
    n_steps = int(round((t_end - t0) / dt))
    if not np.isclose(t0 + n_steps * dt, t_end, rtol=0, atol=1e-9 * max(1.0, abs(t_end))):
        raise ValueError(f"window [{t0}, {t_end}] is not a whole number of steps of {dt}")
    diagnostics = []
    if callback:
        callback(t0, circuit)
    for i in range(n_steps):
        t = t0 + i * dt
        circuit, diag = step(circuit, psi0, H_of_t, t, dt, scheme, reg, phase_correction)
        diagnostics.append(diag)
        if callback:
            callback(t0 + (i + 1) * dt, circuit)
    return circuit, diagnostics


def write_diagnostics(path, diagnostics: list[StepDiagnostics]) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        n_p = len(diagnostics[0].thetas) if diagnostics else 0
        w.writerow(["t", "residual", "condition"] + [f"theta_{j}" for j in range(n_p)])
        for d in diagnostics:
            w.writerow([repr(d.t), repr(d.residual), repr(d.condition)] + [repr(float(x)) for x in d.thetas])
