"""Kick-then-relax simulation: VQDS through the field window, Cartan fast-forwarding afterwards."""

from __future__ import annotations

import json
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .ansatz import AnsatzCircuit, ansatz_apply
from .cartan import CartanFactorization, CartanOptions, FastForward, factorize, save_factorization
from .models import ModelBundle, build_model, ingest_molecular
from .pauli import PauliSum
from .spectra import TimeSeries, write_series_csv
from .statevector import DensePropagator, apply_pauli_sum, pauli_sum_matrix
from .vqds import StepDiagnostics, evolve, write_diagnostics

log = logging.getLogger(__name__)

# Lorentzian tail at t_f = 20 Gamma is 1/401 of the peak
DEFAULT_TF_OVER_GAMMA = 20.0
PHASE2_CHUNK = 2048


class PlanError(ValueError):
    """Invalid or inconsistent simulation plan (input error)."""


def thread_count() -> int:
    """Worker cap from ``VCQDS_THREADS`` (default 1)."""
    raw = os.environ.get("VCQDS_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise PlanError(f"VCQDS_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise PlanError(f"VCQDS_THREADS must be >= 1, got {n}")
    return n


@dataclass(frozen=True)
class KickField:
    """``V(t) = (E0 / pi) Gamma / (Gamma^2 + (t - center)^2) D`` switched on for ``0 <= t <= t_f``."""

    e0: float
    gamma: float
    coupling: PauliSum
    t_f: float
    center: float = 0.0
    window_cutoff: float = 0.01

    def __post_init__(self):
        if not math.isfinite(self.e0):
            raise PlanError(f"E0 must be finite, got {self.e0}")
        if not self.gamma > 0:
            raise PlanError(f"Gamma must be positive, got {self.gamma}")
        if not self.t_f > 0:
            raise PlanError(f"t_f must be positive, got {self.t_f}")
        tail = self.gamma**2 / (self.gamma**2 + (self.t_f - self.center) ** 2)
        if tail > self.window_cutoff:
            raise PlanError(
                f"kick window ends at {tail:.3g} of the peak amplitude (cutoff {self.window_cutoff}); lengthen t_f"
            )

    def amplitude(self, t):
        return self.e0 / np.pi * self.gamma / (self.gamma**2 + (np.asarray(t, dtype=float) - self.center) ** 2)

    def windowed(self, t):
        t = np.asarray(t, dtype=float)
        return np.where((t >= 0) & (t <= self.t_f + 1e-12), self.amplitude(t), 0.0)

    def hamiltonian(self, h0: PauliSum, t: float) -> PauliSum:
        return h0 + self.coupling * float(self.amplitude(t))


def kick_amplitude(t, kick: KickField):
    return kick.amplitude(t)


@dataclass
class SimulationPlan:
    """Everything a run needs. Keys mirror the plan file."""

    model: str | None = None
    model_params: dict = field(default_factory=dict)
    hamiltonian_file: str | None = None
    dipole_file: str | None = None
    e0: float = 1e-5
    gamma: float = 0.25
    tf: float | None = None
    dt_kick: float = 0.005
    dt_record: float = 0.05
    t_total: float = 50.0
    ansatz_layers: int = 2
    observables: list[str] | None = None
    seed: int = 0
    output_dir: str = "runs/out"
    kick_center: str = "zero"
    scheme: str = "rk4"
    reg: float | None = None
    phase_correction: bool = True
    cartan_tolerance: float = 1e-10

    @classmethod
    def from_mapping(cls, data: Mapping[str, Any], base_dir: str | Path | None = None) -> "SimulationPlan":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise PlanError(f"unknown plan keys: {', '.join(unknown)}")
        plan = cls(**dict(data))
        if base_dir is not None:
            for key in ("hamiltonian_file", "dipole_file"):
                val = getattr(plan, key)
                if val and not Path(val).is_absolute():
                    setattr(plan, key, str(Path(base_dir) / val))
        plan.validate()
        return plan

    def replace(self, **overrides) -> "SimulationPlan":
        data = asdict(self)
        data.update({k: v for k, v in overrides.items() if v is not None})
        plan = SimulationPlan(**data)
        plan.validate()
        return plan

    @property
    def regularization(self) -> float:
        """Tikhonov shift for phase 1; by default ``min(1e-8, 0.1 E0^2)``.

        Starting from a reference state the metric's small eigenvalues grow like ``E0^2``, so a fixed
        shift would bias weak-field runs and break linear response; scaling with ``E0^2`` keeps the
        regularised equations covariant under ``E0 -> c E0``.
        """
        if self.reg is not None:
            return float(self.reg)
        return min(1e-8, 0.1 * self.e0**2) if self.e0 != 0 else 1e-8

    @property
    def t_f(self) -> float:
        if self.tf is not None:
            return float(self.tf)
        span = DEFAULT_TF_OVER_GAMMA * self.gamma
        return span if self.kick_center == "zero" else 2 * span

    def validate(self) -> None:
        if (self.model is None) == (self.hamiltonian_file is None):
            raise PlanError("give exactly one of 'model' or 'hamiltonian_file'")
        if self.hamiltonian_file and not self.dipole_file:
            raise PlanError("'hamiltonian_file' needs a 'dipole_file'")
        for key in ("dt_kick", "dt_record", "t_total", "gamma"):
            val = getattr(self, key)
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise PlanError(f"{key} must be a positive number, got {val!r}")
        if not math.isfinite(self.e0):
            raise PlanError(f"e0 must be finite, got {self.e0!r}")
        if self.kick_center not in ("zero", "mid"):
            raise PlanError(f"kick_center must be 'zero' or 'mid', got {self.kick_center!r}")
        if self.scheme not in ("euler", "rk4"):
            raise PlanError(f"scheme must be 'euler' or 'rk4', got {self.scheme!r}")
        if self.reg is not None and not (math.isfinite(self.reg) and self.reg >= 0):
            raise PlanError(f"reg must be a non-negative number, got {self.reg!r}")
        if self.ansatz_layers < 1:
            raise PlanError("ansatz_layers must be >= 1")
        if self.t_f > self.t_total:
            raise PlanError(f"kick window t_f={self.t_f} exceeds t_total={self.t_total}")
        if not _is_multiple(self.t_f, self.dt_kick):
            raise PlanError(f"t_f={self.t_f} is not a whole number of dt_kick={self.dt_kick} steps")
        if not _is_multiple(self.dt_record, self.dt_kick):
            raise PlanError(f"dt_record={self.dt_record} is not a multiple of dt_kick={self.dt_kick}")

    def build(self) -> ModelBundle:
        if self.model is not None:
            params = dict(self.model_params)
            params.setdefault("layers", self.ansatz_layers)
            return build_model(self.model, **params)
        return ingest_molecular(self.hamiltonian_file, self.dipole_file, self.ansatz_layers)

    def kick(self, bundle: ModelBundle) -> KickField:
        if bundle.coupling is None:
            raise PlanError(f"model {bundle.name!r} has no kick coupling operator")
        center = 0.0 if self.kick_center == "zero" else self.t_f / 2
        return KickField(self.e0, self.gamma, bundle.coupling, self.t_f, center)

    def record_times(self) -> np.ndarray:
        n = int(round(self.t_total / self.dt_record))
        return self.dt_record * np.arange(n + 1)


def load_plan(path: str | Path) -> SimulationPlan:
    """Read a JSON or YAML plan; relative data paths are resolved against the plan's directory."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such plan file: {path}")
    text = path.read_text()
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            import yaml

            data = yaml.safe_load(text)
        else:
            data = json.loads(text)
    except Exception as exc:  # parser-specific exception types
        raise PlanError(f"cannot parse {path}: {exc}") from None
    if not isinstance(data, dict):
        raise PlanError(f"{path}: plan must be a mapping")
    return SimulationPlan.from_mapping(data, base_dir=path.parent)


def _is_multiple(a: float, b: float) -> bool:
    r = a / b
    return abs(r - round(r)) < 1e-9 * max(1.0, abs(r))


# ---------------------------------------------------------------------------
# sampling helpers
# ---------------------------------------------------------------------------


def expectations(states: np.ndarray, op: PauliSum) -> np.ndarray:
    """``<psi|O|psi>`` for every row of a state stack."""
    vals = np.einsum("...i,...i->...", states.conj(), apply_pauli_sum(states, op))
    return vals.real


def sample_fast_forward(
    ff, state: np.ndarray, taus: np.ndarray, observables: Mapping[str, PauliSum], threads: int = 1
) -> dict[str, np.ndarray]:
    """Observables of ``exp(-i H tau) state`` for each tau; chunks may run on separate threads."""
    taus = np.asarray(taus, dtype=float)
    chunks = [taus[i : i + PHASE2_CHUNK] for i in range(0, len(taus), PHASE2_CHUNK)]

    def work(chunk):
        states = ff(state, chunk)
        return {name: expectations(states, op) for name, op in observables.items()}

    if threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, chunks))
    else:
        parts = [work(c) for c in chunks]
    return {name: np.concatenate([p[name] for p in parts]) if parts else np.zeros(0) for name in observables}


def correlation_series(ff, state: np.ndarray, left: PauliSum, right: PauliSum, times) -> np.ndarray:
    """``<state| L(t) R(0) |state>`` with ``L(t) = U^dag L U``, ``U = exp(-i H t)``."""
    times = np.asarray(times, dtype=float)
    psi_t = ff(state, times)
    phi_t = ff(apply_pauli_sum(state, right), times)
    return np.einsum("ti,ti->t", psi_t.conj(), apply_pauli_sum(phi_t, left))


class DenseFastForward:
    """Same call signature as :class:`FastForward` using the eigendecomposition oracle."""

    def __init__(self, h0: PauliSum):
        self.prop = DensePropagator.from_pauli_sum(h0)

    def __call__(self, state: np.ndarray, times) -> np.ndarray:
        times = np.asarray(times, dtype=float)
        v, w = self.prop.eigenvectors, self.prop.eigenvalues
        coeffs = v.conj().T @ state
        return (np.exp(-1j * np.multiply.outer(times, w)) * coeffs) @ v.T


# ---------------------------------------------------------------------------
# runs
# ---------------------------------------------------------------------------


@dataclass
class RunResult:
    plan: SimulationPlan
    model: str
    times: np.ndarray
    records: dict[str, np.ndarray]
    field: np.ndarray
    handoff_state: np.ndarray
    factorization: CartanFactorization | None = None
    diagnostics: list[StepDiagnostics] = field(default_factory=list)
    circuit: AnsatzCircuit | None = None

    def series(self, name: str) -> TimeSeries:
        return TimeSeries(float(self.times[0]), self.plan.dt_record, self.records[name], name)

    def field_series(self) -> TimeSeries:
        return TimeSeries(float(self.times[0]), self.plan.dt_record, self.field, "field")


def _select_observables(plan: SimulationPlan, bundle: ModelBundle) -> dict[str, PauliSum]:
    if plan.observables is None:
        return dict(bundle.observables)
    missing = [o for o in plan.observables if o not in bundle.observables]
    if missing:
        raise PlanError(f"unknown observables {missing}; model provides {sorted(bundle.observables)}")
    return {o: bundle.observables[o] for o in plan.observables}


def _split_grid(plan: SimulationPlan):
    times = plan.record_times()
    t_f = plan.t_f
    in_kick = times <= t_f + 1e-9 * max(1.0, t_f)
    stride = int(round(plan.dt_record / plan.dt_kick))
    return times, in_kick, stride


def run_hybrid(
    plan: SimulationPlan, bundle: ModelBundle | None = None, factorization: CartanFactorization | None = None
) -> RunResult:
    """Phase 1: McLachlan VQDS under ``H0 + V(t)`` on ``[0, t_f]``. Phase 2: fast-forward from the handoff state."""
    bundle = bundle or plan.build()
    kick = plan.kick(bundle)
    observables = _select_observables(plan, bundle)
    if factorization is None:
        factorization = factorize(bundle.H0, opts=CartanOptions(tolerance=plan.cartan_tolerance, seed=plan.seed))
    times, in_kick, stride = _split_grid(plan)
    psi0 = bundle.initial_state
    circuit = bundle.ansatz
    if circuit is None:
        raise PlanError(f"model {bundle.name!r} has no ansatz")

    kick_states = []

    def keep(t, circ):
        kick_states.append(ansatz_apply(circ, psi0))

    circuit, diagnostics = evolve(
        circuit,
        psi0,
        lambda t: kick.hamiltonian(bundle.H0, t),
        kick.t_f,
        plan.dt_kick,
        scheme=plan.scheme,
        reg=plan.regularization,
        phase_correction=plan.phase_correction,
        callback=keep,
    )
    handoff = kick_states[-1]
    phase1 = np.array(kick_states[::stride])[: int(in_kick.sum())]
    records = {name: expectations(phase1, op) for name, op in observables.items()}

    ff = FastForward(factorization)
    taus = times[~in_kick] - kick.t_f
    late = sample_fast_forward(ff, handoff, taus, observables, thread_count())
    for name in records:
        records[name] = np.concatenate([records[name], late[name]])
    return RunResult(
        plan=plan,
        model=bundle.name,
        times=times,
        records=records,
        field=kick.windowed(times),
        handoff_state=handoff,
        factorization=factorization,
        diagnostics=diagnostics,
        circuit=circuit,
    )


def _dense_step(h: PauliSum, dt: float, state: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(pauli_sum_matrix(h))
    return v @ (np.exp(-1j * w * dt) * (v.conj().T @ state))


def run_exact_reference(plan: SimulationPlan, bundle: ModelBundle | None = None, refine: int = 1) -> RunResult:
    """Dense oracle on the same grid: piecewise-constant ``H(t)`` (left endpoint, ``dt_kick / refine``) in the window,
    exact ``exp(-i H0 t)`` afterwards."""
    bundle = bundle or plan.build()
    kick = plan.kick(bundle)
    observables = _select_observables(plan, bundle)
    times, in_kick, stride = _split_grid(plan)
    dt = plan.dt_kick / refine
    n_steps = int(round(kick.t_f / dt))
    state = np.array(bundle.initial_state, dtype=complex)
    kept = [state]
    for k in range(n_steps):
        state = _dense_step(kick.hamiltonian(bundle.H0, k * dt), dt, state)
        if (k + 1) % refine == 0:
            kept.append(state)
    phase1 = np.array(kept[::stride])[: int(in_kick.sum())]
    records = {name: expectations(phase1, op) for name, op in observables.items()}
    late = sample_fast_forward(DenseFastForward(bundle.H0), state, times[~in_kick] - kick.t_f, observables)
    for name in records:
        records[name] = np.concatenate([records[name], late[name]])
    return RunResult(plan, bundle.name, times, records, kick.windowed(times), state)


# ---------------------------------------------------------------------------
# artifacts
# ---------------------------------------------------------------------------


def _package_version() -> str:
    from importlib.metadata import PackageNotFoundError, version

    try:
        return version("artifact")
    except PackageNotFoundError:
        return "unknown"


def manifest(result: RunResult, outputs: list[str], extra: Mapping[str, Any] | None = None) -> dict:
    fact = result.factorization
    doc = {
        "plan": asdict(result.plan),
        "model": result.model,
        "t_f": result.plan.t_f,
        "n_records": int(len(result.times)),
        "versions": {"vcqds": _package_version(), "numpy": np.__version__},
        "outputs": sorted(outputs),
    }
    if fact is not None:
        doc["cartan"] = {
            "closure_dim": len(fact.split.g),
            "k": len(fact.split.k_part),
            "m": len(fact.split.m_part),
            "h": len(fact.split.h_part),
            "depth": fact.depth,
            "residual": fact.residual_norm,
            "iterations": fact.iterations,
        }
    if result.diagnostics:
        doc["vqds"] = {
            "steps": len(result.diagnostics),
            "scheme": result.plan.scheme,
            "regularization": result.plan.regularization,
            "max_residual": max(d.residual for d in result.diagnostics),
            "max_condition": max(d.condition for d in result.diagnostics),
        }
    if extra:
        doc.update(extra)
    return doc


def write_run(result: RunResult, output_dir: str | Path, exact: RunResult | None = None) -> list[Path]:
    """Per-observable ``t,value`` CSVs, the field, the Cartan artifact, VQDS diagnostics and the manifest."""
    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name in result.records:
        p = out / f"{name}.csv"
        write_series_csv(p, result.series(name))
        written.append(p)
        if exact is not None:
            p = out / f"{name}_exact.csv"
            write_series_csv(p, exact.series(name))
            written.append(p)
    p = out / "field.csv"
    write_series_csv(p, result.field_series())
    written.append(p)
    if result.factorization is not None:
        p = out / "cartan.txt"
        save_factorization(p, result.factorization)
        written.append(p)
    if result.diagnostics:
        p = out / "vqds_diagnostics.csv"
        write_diagnostics(p, result.diagnostics)
        written.append(p)
    p = out / "manifest.json"
    doc = manifest(result, [w.name for w in written] + [p.name])
    p.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    written.append(p)
    return written
