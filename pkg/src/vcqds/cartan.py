"""Cartan (KHK) factorization of a time-independent Hamiltonian and the fixed-depth propagator.

The dynamical Lie algebra is split by the involution that sends a Pauli string with an even
number of Y factors to the ``m`` part and an odd number to the ``k`` part. ``K`` is the ordered
product ``exp(i a_1 k_1) ... exp(i a_n k_n)``. The angles minimise ``<K v K^dag, H0>`` with all
work done on coefficient vectors over ``m``; the dense state is only touched when the
propagator is applied.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from numba import njit

from .pauli import LieBasis, PauliString, PauliSum, commutes, multiply
from .statevector import DimensionError, apply_pauli_rotation

log = logging.getLogger(__name__)

INVOLUTION_TAG = "even-y"


class CartanError(RuntimeError):
    pass


class InvolutionViolation(CartanError):
    pass


class SeedNotInM(CartanError):
    pass


class NoConvergence(CartanError):
    pass


class ResidualTooLarge(CartanError):
    def __init__(self, residual: float, tol: float):
        super().__init__(f"Cartan residual {residual:.3e} exceeds tolerance {tol:.1e}")
        self.residual = residual


@dataclass(frozen=True)
class CartanSplit:
    g: LieBasis
    k_part: tuple[PauliString, ...]
    m_part: tuple[PauliString, ...]
    h_part: tuple[PauliString, ...] = ()

    def verify(self) -> None:
        """Exhaustively check [k,k] in k, [m,m] in k, [k,m] in m."""
        k_set, m_set = set(self.k_part), set(self.m_part)
        for group_a, group_b, target, name in (
            (self.k_part, self.k_part, k_set, "[k,k] in k"),
            (self.m_part, self.m_part, k_set, "[m,m] in k"),
            (self.k_part, self.m_part, m_set, "[k,m] in m"),
        ):
            for a in group_a:
                for b in group_b:
                    if not commutes(a, b) and multiply(a, b)[1] not in target:
                        raise InvolutionViolation(f"{name} fails for {a.label}, {b.label}")


def involution_split(g: LieBasis) -> CartanSplit:
    k_part = tuple(p for p in g if p.y_count % 2 == 1)
    m_part = tuple(p for p in g if p.y_count % 2 == 0)
    split = CartanSplit(g, k_part, m_part)
    split.verify()
    return split


def cartan_subalgebra(split: CartanSplit, seed: PauliSum) -> CartanSplit:
    """Greedy maximal commuting subset of ``m`` grown from the first seed string found in ``m``."""
    m_set = set(split.m_part)
    start = next((p for p, _ in seed if p in m_set), None)
    if start is None:
        raise SeedNotInM("no term of the seed lies in the m part of the split")
    h = [start]
    for p in split.m_part:
        if p != start and all(commutes(p, q) for q in h):
            h.append(p)
    return CartanSplit(split.g, split.k_part, split.m_part, tuple(h))


def adjoint_rotate(op: PauliSum, k: PauliString, a: float) -> PauliSum:
    """``exp(i a k) op exp(-i a k)`` term by term."""
    c2, s2 = np.cos(2 * a), np.sin(2 * a)
    items = []
    for p, c in op:
        if commutes(k, p):
            items.append((p, c))
        else:
            phase, r = multiply(k, p)
            items.append((p, c2 * c))
            items.append((r, (1j * phase * s2 * c).real))
    return PauliSum(op.n_qubits, items, prune=op.prune)


@njit(cache=True)
def _rot(vec, src, dst, sign, count, diag, off, keep):
    """out[src] = diag*vec[src]; out[dst] += off*sign*vec[src]; other entries kept or zeroed."""
    out = vec.copy() if keep else np.zeros_like(vec)
    for t in range(count):
        out[src[t]] = diag * vec[src[t]]
    for t in range(count):
        out[dst[t]] += off * sign[t] * vec[src[t]]
    return out


@njit(cache=True)
def _coordinate_sweep(angles, v, target, src, dst, sign, counts):
    """One cyclic pass of exact minimisation along each angle; f is A + B cos 2a + C sin 2a in each."""
    n = angles.shape[0]
    dim = v.shape[0]
    ws = np.empty((n + 1, dim))
    ws[n] = v
    for i in range(n - 1, -1, -1):
        ws[i] = _rot(ws[i + 1], src[i], dst[i], sign[i], counts[i], np.cos(2 * angles[i]), np.sin(2 * angles[i]), True)
    u = target.copy()
    for i in range(n):
        w = ws[i + 1]
        b = 0.0
        c = 0.0
        for t in range(counts[i]):
            b += u[src[i, t]] * w[src[i, t]]
            c += u[dst[i, t]] * sign[i, t] * w[src[i, t]]
        # minimum of b cos(2a) + c sin(2a)
        if b * b + c * c > 0.0:
            angles[i] = 0.5 * np.arctan2(-c, -b)
        u = _rot(u, src[i], dst[i], sign[i], counts[i], np.cos(2 * angles[i]), -np.sin(2 * angles[i]), True)
    return angles


@njit(cache=True)
def _linear_jac(vec, src, dst, sign, counts):
    """Columns ``d/da [exp(-i a k_i) vec exp(i a k_i)]`` at ``a = 0``."""
    jac = np.zeros((vec.shape[0], counts.shape[0]))
    for i in range(counts.shape[0]):
        for t in range(counts[i]):
            jac[dst[i, t], i] -= 2 * sign[i, t] * vec[src[i, t]]
    return jac


@njit(cache=True)
def _apply_sequence(vec, idx, angles, src, dst, sign, counts):
    for t in range(idx.shape[0]):
        i = idx[t]
        vec = _rot(vec, src[i], dst[i], sign[i], counts[i], np.cos(2 * angles[t]), np.sin(2 * angles[t]), True)
    return vec


class AdjointAction:
    """Rotations ``exp(i a k_i) . exp(-i a k_i)`` as paired index maps on the ``m`` coefficient space."""

    def __init__(self, split: CartanSplit):
        self.m_index = {p: i for i, p in enumerate(split.m_part)}
        self.dim = len(split.m_part)
        n_k = len(split.k_part)
        pairs = []
        for k in split.k_part:
            rows = []
            for p, i in self.m_index.items():
                if not commutes(k, p):
                    phase, r = multiply(k, p)
                    rows.append((i, self.m_index[r], (1j * phase).real))
            pairs.append(rows)
        width = max((len(r) for r in pairs), default=0)
        self.counts = np.array([len(r) for r in pairs], dtype=np.int64)
        self.src = np.zeros((n_k, width), dtype=np.int64)
        self.dst = np.zeros((n_k, width), dtype=np.int64)
        self.sign = np.zeros((n_k, width))
        for i, rows in enumerate(pairs):
            if rows:
                s_, d_, g_ = zip(*rows)
                self.src[i, : len(rows)] = s_
                self.dst[i, : len(rows)] = d_
                self.sign[i, : len(rows)] = g_

    def vector(self, op: PauliSum) -> np.ndarray:
        vec = np.zeros(self.dim)
        for p, c in op:
            if p not in self.m_index:
                raise SeedNotInM(f"{p.label} is not in the m part")
            vec[self.m_index[p]] = float(np.real(c))
        return vec

    def rotate(self, i: int, a: float, vec: np.ndarray) -> np.ndarray:
        return _rot(vec, self.src[i], self.dst[i], self.sign[i], self.counts[i], np.cos(2 * a), np.sin(2 * a), True)

    def conjugate(self, angles: np.ndarray, vec: np.ndarray) -> np.ndarray:
        """``K vec K^dag``."""
        for i in range(len(angles) - 1, -1, -1):
            vec = self.rotate(i, angles[i], vec)
        return vec

    def conjugate_dagger(self, angles: np.ndarray, vec: np.ndarray) -> np.ndarray:
        """``K^dag vec K``."""
        for i in range(len(angles)):
            vec = self.rotate(i, -angles[i], vec)
        return vec

    def sequence(self, idx, angles, vec) -> np.ndarray:
        """Rotate ``vec`` by ``(k_idx[t], angles[t])`` for t in order."""
        idx = np.asarray(idx, dtype=np.int64)
        return _apply_sequence(np.array(vec, dtype=float), idx, np.asarray(angles, dtype=float), self.src, self.dst, self.sign, self.counts)

    def sweep(self, angles, v, target) -> np.ndarray:
        return _coordinate_sweep(
            np.array(angles, dtype=float), v, target, self.src, self.dst, self.sign, self.counts
        )

    def linear_jacobian(self, vec) -> np.ndarray:
        return _linear_jac(np.asarray(vec, dtype=float), self.src, self.dst, self.sign, self.counts)


@dataclass(frozen=True)
class CartanOptions:
    """``sweeps`` cyclic passes of exact per-angle minimisation of f, then damped Newton on the off-h residual."""

    tolerance: float = 1e-10
    max_iterations: int = 10000
    gradient_floor: float = 1e-12
    max_retries: int = 5
    seed: int = 0
    sweeps: int = 50
    prune: float = 1e-16


@dataclass(frozen=True)
class CartanFactorization:
    split: CartanSplit
    k_angles: tuple[tuple[PauliString, float], ...]
    h_coeffs: dict[PauliString, float]
    residual_norm: float
    iterations: int = 0
    n_qubits: int = field(default=0)

    @property
    def angles(self) -> np.ndarray:
        return np.array([a for _, a in self.k_angles])

    @property
    def depth(self) -> int:
        return len(self.k_angles)

    def h_sum(self) -> PauliSum:
        return PauliSum(self.n_qubits, list(self.h_coeffs.items()))

    def _sequence(self, act: "AdjointAction") -> np.ndarray:
        pos = {k: i for i, k in enumerate(self.split.k_part)}
        return np.array([pos[k] for k, _ in self.k_angles], dtype=np.int64)

    def reconstruct(self) -> PauliSum:
        """``K h K^dag`` by exact rotations on the ``m`` coefficient vector."""
        ident = PauliString.identity(self.n_qubits)
        if not self.split.m_part:
            return self.h_sum()
        act = AdjointAction(self.split)
        h = PauliSum(self.n_qubits, [(p, c) for p, c in self.h_coeffs.items() if p != ident])
        vec = act.vector(h)
        idx = self._sequence(act)
        vec = act.sequence(idx[::-1], self.angles[::-1], vec)
        items = [(p, float(c)) for p, c in zip(self.split.m_part, vec)]
        if ident in self.h_coeffs:
            items.append((ident, self.h_coeffs[ident]))
        return PauliSum(self.n_qubits, items)

    def reconstruction_error(self, h0: PauliSum) -> float:
        return (self.reconstruct() - h0).norm() / h0.norm()


def _dense_v(h_part: tuple[PauliString, ...]) -> np.ndarray:
    # powers of pi^(1/|h|): rationally independent and all of order one
    gam = np.pi ** (np.arange(1, len(h_part) + 1, dtype=float) / len(h_part))
    return gam / np.linalg.norm(gam)


def _newton_polish(act, x_vec, off_h, opts):
    """Levenberg-Marquardt on the off-h part of ``K^dag H0 K``.

    Each accepted step is applied as one more layer ``prod_i exp(i s_i k_i)`` on the right of ``K``,
    so the rotations stay exact and only the step direction is linearised.
    """
    n_k = act.src.shape[0]
    layers = []
    r = float(np.linalg.norm(x_vec[off_h]))
    mu = 1e-2
    it = 0
    while r > opts.tolerance * 1e-2 and it < opts.max_iterations:
        it += 1
        jac = act.linear_jacobian(x_vec)[off_h]
        jtj, g = jac.T @ jac, jac.T @ x_vec[off_h]
        if np.linalg.norm(g) < opts.gradient_floor * 1e-3 and r > opts.tolerance:
            break  # stuck on a non-Cartan stationary point
        while True:
            s = np.linalg.solve(jtj + mu * np.eye(n_k), -g)
            idx = np.nonzero(np.abs(s) > opts.prune)[0]
            trial = act.sequence(idx, -s[idx], x_vec)
            r_new = float(np.linalg.norm(trial[off_h]))
            if r_new < r:
                x_vec, r, mu = trial, r_new, max(mu / 5, 1e-14)
                layers.append((idx, s[idx]))
                break
            mu *= 4
            if mu > 1e8:
                return x_vec, layers, r, it
    if it >= opts.max_iterations and r > opts.tolerance:
        raise NoConvergence(f"Cartan refinement hit {opts.max_iterations} iterations at residual {r:.3e}")
    return x_vec, layers, r, it


def minimize_fK(split: CartanSplit, h0: PauliSum, opts: CartanOptions | None = None) -> CartanFactorization:
    """Angles of ``K`` with ``K^dag H0 K`` in span(h).

    A warm start minimises ``f = <K v K^dag, H0>`` by exact coordinate sweeps; the remaining
    off-h residual is removed by damped Newton layers appended to ``K``. The result is a product of
    exponentials whose length depends only on the Hamiltonian, never on the evolution time.
    """
    opts = opts or CartanOptions()
    if not split.h_part:
        raise CartanError("h part is empty; run cartan_subalgebra first")
    act = AdjointAction(split)
    target = act.vector(h0)
    scale = np.linalg.norm(target)
    if scale == 0:
        raise CartanError("zero Hamiltonian")
    target_n = target / scale
    h_idx = np.array([act.m_index[p] for p in split.h_part])
    v = np.zeros(act.dim)
    v[h_idx] = _dense_v(split.h_part)
    n_k = len(split.k_part)
    off_h = np.ones(act.dim, dtype=bool)
    off_h[h_idx] = False

    rng = np.random.default_rng(opts.seed)
    best = None
    for attempt in range(opts.max_retries + 1):
        angles = np.zeros(n_k) if attempt == 0 else rng.uniform(-np.pi, np.pi, n_k)
        for _ in range(opts.sweeps if n_k else 0):
            angles = act.sweep(angles, v, target_n)
        x_vec = act.sequence(np.arange(n_k), -angles, target_n)
        if n_k:
            x_vec, layers, residual, iterations = _newton_polish(act, x_vec, off_h, opts)
        else:
            layers, residual, iterations = [], float(np.linalg.norm(x_vec[off_h])), 0
        log.info("cartan attempt %d: %d refinement layers, residual %.3e", attempt, len(layers), residual)
        if best is None or residual < best[0]:
            best = (residual, angles, layers, x_vec, iterations + (opts.sweeps if n_k else 0))
        if residual <= opts.tolerance:
            break
    residual, angles, layers, x_vec, iterations = best
    if residual > opts.tolerance:
        raise ResidualTooLarge(residual, opts.tolerance)
    seq = [(k, float(a)) for k, a in zip(split.k_part, angles) if abs(a) > opts.prune]
    for idx, s in layers:
        seq += [(split.k_part[i], float(a)) for i, a in zip(idx, s)]
    h_coeffs = {p: float(x_vec[act.m_index[p]] * scale) for p in split.h_part}
    return CartanFactorization(
        split=split,
        k_angles=tuple(seq),
        h_coeffs=h_coeffs,
        residual_norm=residual,
        iterations=iterations,
        n_qubits=h0.n_qubits,
    )


def cost_fK(fact: CartanFactorization, h0: PauliSum, angles: np.ndarray | None = None) -> float:
    """``<K v K^dag, H0>`` under the trace form; ``angles`` overrides the stored ones (same sequence)."""
    act = AdjointAction(fact.split)
    v = np.zeros(act.dim)
    v[[act.m_index[p] for p in fact.split.h_part]] = _dense_v(fact.split.h_part)
    ang = fact.angles if angles is None else np.asarray(angles, dtype=float)
    idx = fact._sequence(act)
    kv = act.sequence(idx[::-1], ang[::-1], v)
    target = act.vector(PauliSum(h0.n_qubits, [(p, c) for p, c in h0 if not p.is_identity()]))
    return float(kv @ target) * 2.0 ** (2 * h0.n_qubits + 1)


def factorize(h0: PauliSum, cap: int = 4096, opts: CartanOptions | None = None) -> CartanFactorization:
    """Closure, split, Cartan subalgebra and K angles for ``h0`` in one call."""
    from .pauli import lie_closure

    strings = [p for p in h0.strings() if not p.is_identity()]
    ident = PauliString.identity(h0.n_qubits)
    if not strings:
        # pure energy offset: K = 1, h = H0
        offset = {ident: float(h0.coeff(ident))} if ident in h0 else {}
        return CartanFactorization(CartanSplit(LieBasis(()), (), (), ()), (), offset, 0.0, 0, h0.n_qubits)
    g = lie_closure(strings, cap=cap)
    split = cartan_subalgebra(involution_split(g), PauliSum(h0.n_qubits, [(p, h0.coeff(p)) for p in strings]))
    fact = minimize_fK(split, PauliSum(h0.n_qubits, [(p, h0.coeff(p)) for p in strings]), opts)
    if ident in h0:
        # identity commutes with everything; carried in h as a global energy offset
        coeffs = dict(fact.h_coeffs)
        coeffs[ident] = float(h0.coeff(ident))
        fact = CartanFactorization(fact.split, fact.k_angles, coeffs, fact.residual_norm, fact.iterations, fact.n_qubits)
    return fact


# ---------------------------------------------------------------------------
# propagation
# ---------------------------------------------------------------------------


def apply_K(fact: CartanFactorization, state: np.ndarray, dagger: bool = False) -> np.ndarray:
    """``K |psi>`` (or ``K^dag |psi>``); acts on a single state or a stack along the last axis."""
    if state.shape[-1] != 1 << fact.n_qubits:
        raise DimensionError(f"state of length {state.shape[-1]} does not match {fact.n_qubits} qubits")
    if dagger:
        for k, a in fact.k_angles:
            state = apply_pauli_rotation(state, k, a)
    else:
        for k, a in reversed(fact.k_angles):
            state = apply_pauli_rotation(state, k, -a)
    return state


def apply_h_evolution(fact: CartanFactorization, state: np.ndarray, times) -> np.ndarray:
    """``exp(-i h t) |psi>``; with an array of times the result has one row per time."""
    times = np.asarray(times, dtype=float)
    out = np.broadcast_to(state, times.shape + state.shape[-1:]).astype(complex)
    tcol = times[..., None]
    for p, c in fact.h_coeffs.items():
        out = apply_pauli_rotation(out, p, c * tcol)
    return out


def fast_forward_apply(fact: CartanFactorization, t: float, state: np.ndarray) -> np.ndarray:
    """``K exp(-i h t) K^dag |psi>``. The gate count does not depend on ``t``."""
    return apply_K(fact, apply_h_evolution(fact, apply_K(fact, state, dagger=True), t))


class FastForward:
    """Propagator with ``K`` cached as a dense matrix, for sampling many times from one state."""

    def __init__(self, fact: CartanFactorization):
        self.fact = fact
        dim = 1 << fact.n_qubits
        self.K = apply_K(fact, np.eye(dim, dtype=complex)).T

    def __call__(self, state: np.ndarray, times) -> np.ndarray:
        rotated = self.K.conj().T @ state
        evolved = apply_h_evolution(self.fact, rotated, times)
        return evolved @ self.K.T


# ---------------------------------------------------------------------------
# text artifact
# ---------------------------------------------------------------------------


def dumps_factorization(fact: CartanFactorization) -> str:
    lines = [
        "# cartan factorization",
        f"involution: {INVOLUTION_TAG}",
        f"n_qubits: {fact.n_qubits}",
        f"closure_dim: {len(fact.split.g)}",
        f"residual: {fact.residual_norm:.17g}",
        f"iterations: {fact.iterations}",
    ]
    k_set = {k for k, _ in fact.k_angles}
    h_set = set(fact.h_coeffs)
    lines += [f"k {k.label} {a:.17g}" for k, a in fact.k_angles]
    lines += [f"h {p.label} {c:.17g}" for p, c in fact.h_coeffs.items()]
    lines += [f"m {p.label}" for p in fact.split.m_part if p not in h_set]
    return "\n".join(lines) + "\n"


def loads_factorization(text: str) -> CartanFactorization:
    meta: dict[str, str] = {}
    k_angles, h_coeffs, m_extra = [], {}, []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        head, _, rest = line.partition(" ")
        if head.endswith(":"):
            meta[head[:-1]] = rest.strip()
        elif head == "k":
            lab, val = rest.split()
            k_angles.append((PauliString.from_label(lab), float(val)))
        elif head == "h":
            lab, val = rest.split()
            h_coeffs[PauliString.from_label(lab)] = float(val)
        elif head == "m":
            m_extra.append(PauliString.from_label(rest.strip()))
        elif head == "g":
            pass
        else:
            raise ValueError(f"unrecognised factorization line: {raw!r}")
    if meta.get("involution") != INVOLUTION_TAG:
        raise ValueError(f"unsupported involution {meta.get('involution')!r}")
    n = int(meta["n_qubits"])
    h_part = tuple(p for p in h_coeffs if not p.is_identity())
    k_part = tuple(dict.fromkeys(k for k, _ in k_angles))
    m_part = h_part + tuple(m_extra)
    g = LieBasis(k_part + m_part)
    return CartanFactorization(
        split=CartanSplit(g, k_part, m_part, h_part),
        k_angles=tuple(k_angles),
        h_coeffs=h_coeffs,
        residual_norm=float(meta.get("residual", "nan")),
        iterations=int(meta.get("iterations", 0)),
        n_qubits=n,
    )


def save_factorization(path: str | Path, fact: CartanFactorization) -> None:
    Path(path).write_text(dumps_factorization(fact))


def load_factorization(path: str | Path) -> CartanFactorization:
    return loads_factorization(Path(path).read_text())
