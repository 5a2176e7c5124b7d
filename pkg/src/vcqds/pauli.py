"""Pauli strings in symplectic (x_mask, z_mask) form and real linear combinations of them.

Bit ``i`` of a mask refers to qubit ``i``. In text form the leftmost character is qubit 0.
Matrices and state vectors use the little-endian convention: qubit ``i`` is bit ``i`` of the
basis-state index.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np

PRUNE_TOL = 1e-14

_PHASES = (1, 1j, -1, -1j)
_CHAR_BITS = {"I": (0, 0), "X": (1, 0), "Y": (1, 1), "Z": (0, 1)}


class PauliError(ValueError):
    pass


class ClosureCapExceeded(RuntimeError):
    def __init__(self, size: int, cap: int):
        super().__init__(f"Lie closure exceeded cap: dimension {size} > {cap}")
        self.size = size
        self.cap = cap


@dataclass(frozen=True, order=True)
class PauliString:
    n_qubits: int
    x_mask: int
    z_mask: int

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        x = z = 0
        for i, ch in enumerate(label.upper()):
            try:
                bx, bz = _CHAR_BITS[ch]
            except KeyError:
                raise PauliError(f"invalid Pauli character {ch!r} in {label!r}") from None
            x |= bx << i
            z |= bz << i
        if not label:
            raise PauliError("empty Pauli label")
        return cls(len(label), x, z)

    @classmethod
    def single(cls, n_qubits: int, qubit: int, kind: str) -> "PauliString":
        """`kind` on ``qubit``, identity elsewhere."""
        bx, bz = _CHAR_BITS[kind]
        return cls(n_qubits, bx << qubit, bz << qubit)

    @classmethod
    def identity(cls, n_qubits: int) -> "PauliString":
        return cls(n_qubits, 0, 0)

    @property
    def label(self) -> str:
        out = []
        for i in range(self.n_qubits):
            bx = (self.x_mask >> i) & 1
            bz = (self.z_mask >> i) & 1
            out.append("IZXY"[bx * 2 + bz])
        return "".join(out)

    @property
    def y_count(self) -> int:
        return (self.x_mask & self.z_mask).bit_count()

    @property
    def weight(self) -> int:
        return (self.x_mask | self.z_mask).bit_count()

    def is_identity(self) -> bool:
        return self.x_mask == 0 and self.z_mask == 0

    def __repr__(self) -> str:
        return f"PauliString({self.label!r})"

    def __str__(self) -> str:
        return self.label


def _check_sizes(p: PauliString, q: PauliString) -> None:
    if p.n_qubits != q.n_qubits:
        raise PauliError(f"qubit count mismatch: {p.n_qubits} vs {q.n_qubits}")


def multiply(p: PauliString, q: PauliString) -> tuple[complex, PauliString]:
    """Return ``(phase, r)`` with ``p @ q == phase * r``."""
    _check_sizes(p, q)
    r = PauliString(p.n_qubits, p.x_mask ^ q.x_mask, p.z_mask ^ q.z_mask)
    # P = i^y X^x Z^z, so PQ = i^(yP + yQ - yR) (-1)^|zP & xQ| R
    k = p.y_count + q.y_count - r.y_count + 2 * (p.z_mask & q.x_mask).bit_count()
    return _PHASES[k % 4], r


def commutes(p: PauliString, q: PauliString) -> bool:
    _check_sizes(p, q)
    return ((p.x_mask & q.z_mask).bit_count() + (p.z_mask & q.x_mask).bit_count()) % 2 == 0


def commutator(p: PauliString, q: PauliString) -> tuple[complex, PauliString] | None:
    """``[p, q] = coeff * r`` with ``coeff = ±2i``, or None when they commute."""
    if commutes(p, q):
        return None
    phase, r = multiply(p, q)
    return 2 * phase, r


class PauliSum:
    """Linear combination of Pauli strings on a fixed number of qubits.

    Coefficients are real unless the sum was built with ``allow_complex=True`` (used for
    intermediate products). Terms below ``prune`` in magnitude are dropped.
    """

    def __init__(
        self,
        n_qubits: int,
        terms: Mapping[PauliString, complex] | Iterable[tuple[PauliString, complex]] = (),
        *,
        allow_complex: bool = False,
        prune: float = PRUNE_TOL,
    ):
        self.n_qubits = n_qubits
        self.allow_complex = allow_complex
        self.prune = prune
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict[PauliString, complex] = {}
        for p, c in items:
            if p.n_qubits != n_qubits:
                raise PauliError(f"term {p} has {p.n_qubits} qubits, expected {n_qubits}")
            acc[p] = acc.get(p, 0.0) + c
        self._terms: dict[PauliString, complex] = {}
        for p, c in acc.items():
            if not allow_complex:
                if abs(complex(c).imag) > max(prune, 1e-12 * abs(c)):
                    raise PauliError(f"complex coefficient {c} for {p} in a real PauliSum")
                c = float(complex(c).real)
            if abs(c) > prune:
                self._terms[p] = c

    @classmethod
    def from_labels(cls, pairs: Iterable[tuple[str, float]] | Mapping[str, float]) -> "PauliSum":
        items = list(pairs.items() if isinstance(pairs, Mapping) else pairs)
        if not items:
            raise PauliError("cannot infer qubit count from an empty term list")
        strings = [(PauliString.from_label(lab), c) for lab, c in items]
        return cls(strings[0][0].n_qubits, strings)

    @classmethod
    def from_string(cls, p: PauliString, coeff: float = 1.0) -> "PauliSum":
        return cls(p.n_qubits, [(p, coeff)])

    @property
    def terms(self) -> dict[PauliString, complex]:
        return dict(self._terms)

    def strings(self) -> list[PauliString]:
        return list(self._terms)

    def coeff(self, p: PauliString) -> complex:
        return self._terms.get(p, 0.0)

    def __len__(self) -> int:
        return len(self._terms)

    def __iter__(self) -> Iterator[tuple[PauliString, complex]]:
        return iter(self._terms.items())

    def __contains__(self, p: PauliString) -> bool:
        return p in self._terms

    def is_real(self) -> bool:
        return all(isinstance(c, float) or complex(c).imag == 0 for c in self._terms.values())

    def _like(self, items, allow_complex=None) -> "PauliSum":
        ac = self.allow_complex if allow_complex is None else allow_complex
        return PauliSum(self.n_qubits, items, allow_complex=ac, prune=self.prune)

    def __add__(self, other: "PauliSum") -> "PauliSum":
        if other.n_qubits != self.n_qubits:
            raise PauliError("qubit count mismatch")
        return self._like(
            list(self._terms.items()) + list(other._terms.items()),
            self.allow_complex or other.allow_complex,
        )

    def __sub__(self, other: "PauliSum") -> "PauliSum":
        return self + (-1.0) * other

    def __neg__(self) -> "PauliSum":
        return (-1.0) * self

    def __rmul__(self, scalar: complex) -> "PauliSum":
        ac = self.allow_complex or isinstance(scalar, complex)
        return self._like([(p, scalar * c) for p, c in self._terms.items()], ac)

    def __mul__(self, scalar: complex) -> "PauliSum":
        return self.__rmul__(scalar)

    def __matmul__(self, other: "PauliSum") -> "PauliSum":
        items = []
        for p, a in self._terms.items():
            for q, b in other._terms.items():
                phase, r = multiply(p, q)
                items.append((r, phase * a * b))
        return PauliSum(self.n_qubits, items, allow_complex=True, prune=self.prune)

    def norm(self) -> float:
        """2-norm of the coefficient vector."""
        return float(np.sqrt(sum(abs(c) ** 2 for c in self._terms.values())))

    def real(self) -> "PauliSum":
        """Drop imaginary parts; for products that are Hermitian by construction."""
        return PauliSum(self.n_qubits, [(p, complex(c).real) for p, c in self._terms.items()], prune=self.prune)

    def commutes_with(self, other: "PauliSum", tol: float = 1e-12) -> bool:
        comm = self @ other - other @ self
        return comm.norm() <= tol

    def to_matrix(self) -> np.ndarray:
        from .statevector import pauli_sum_matrix

        return pauli_sum_matrix(self)

    def __repr__(self) -> str:
        inner = ", ".join(f"{c!r}*{p.label}" for p, c in self._terms.items())
        return f"PauliSum({self.n_qubits}, [{inner}])"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PauliSum):
            return NotImplemented
        return self.n_qubits == other.n_qubits and self._terms == other._terms


def killing_inner(a: PauliSum, b: PauliSum) -> float:
    """Trace form ``2^(n+1) Tr(A B)`` evaluated on coefficient vectors."""
    if a.n_qubits != b.n_qubits:
        raise PauliError(f"qubit count mismatch: {a.n_qubits} vs {b.n_qubits}")
    n = a.n_qubits
    dot = sum(c * b.coeff(p) for p, c in a)
    return float(np.real(dot)) * 2.0 ** (2 * n + 1)


@dataclass(frozen=True)
class LieBasis:
    elements: tuple[PauliString, ...]

    def __post_init__(self):
        if len(set(self.elements)) != len(self.elements):
            raise PauliError("duplicate elements in LieBasis")
        object.__setattr__(self, "_index", {p: i for i, p in enumerate(self.elements)})

    @property
    def index(self) -> dict[PauliString, int]:
        return self._index  # type: ignore[attr-defined]

    @property
    def n_qubits(self) -> int:
        return self.elements[0].n_qubits

    def __len__(self) -> int:
        return len(self.elements)

    def __iter__(self):
        return iter(self.elements)

    def __contains__(self, p: PauliString) -> bool:
        return p in self.index

    def masks(self) -> tuple[np.ndarray, np.ndarray]:
        xs = np.array([p.x_mask for p in self.elements], dtype=np.int64)
        zs = np.array([p.z_mask for p in self.elements], dtype=np.int64)
        return xs, zs

    def is_closed(self) -> bool:
        for i, p in enumerate(self.elements):
            for q in self.elements[i + 1 :]:
                if not commutes(p, q) and multiply(p, q)[1] not in self.index:
                    return False
        return True


def anticommuting_mask(x: int, z: int, xs: np.ndarray, zs: np.ndarray) -> np.ndarray:
    """Boolean array: which of the strings (xs, zs) anticommute with (x, z)."""
    s = np.bitwise_count(xs & z) + np.bitwise_count(zs & x)
    return (s & 1).astype(bool)


def lie_closure(generators: Iterable[PauliString], cap: int = 4096) -> LieBasis:
    """Commutator closure of a set of Pauli strings (phases dropped).

    Breadth-first: each element is paired with every element before it, in insertion order.
    """
    elems: list[PauliString] = []
    seen: set[PauliString] = set()
    for g in generators:
        if g not in seen:
            seen.add(g)
            elems.append(g)
    if not elems:
        raise PauliError("lie_closure needs at least one generator")
    n = elems[0].n_qubits
    if any(p.n_qubits != n for p in elems):
        raise PauliError("generators have mismatched qubit counts")
    if len(elems) > cap:
        raise ClosureCapExceeded(len(elems), cap)

    xs = np.zeros(max(cap, len(elems)) + 1, dtype=np.int64)
    zs = np.zeros_like(xs)
    for i, p in enumerate(elems):
        xs[i], zs[i] = p.x_mask, p.z_mask

    queue = deque(range(len(elems)))
    while queue:
        i = queue.popleft()
        p = elems[i]
        count = len(elems)
        anti = np.nonzero(anticommuting_mask(p.x_mask, p.z_mask, xs[:count], zs[:count]))[0]
        for j in anti:
            r = PauliString(n, p.x_mask ^ int(xs[j]), p.z_mask ^ int(zs[j]))
            if r in seen:
                continue
            if len(elems) >= cap:
                raise ClosureCapExceeded(len(elems) + 1, cap)
            seen.add(r)
            xs[len(elems)], zs[len(elems)] = r.x_mask, r.z_mask
            elems.append(r)
            queue.append(len(elems) - 1)
    return LieBasis(tuple(elems))


# ---------------------------------------------------------------------------
# text format: "<coefficient> <string>" per line, '#' comments, header keys "# key: value"
# ---------------------------------------------------------------------------


class PauliParseError(PauliError):
    def __init__(self, line_no: int, message: str, source: str = "<string>"):
        super().__init__(f"{source}:{line_no}: {message}")
        self.line_no = line_no


def parse_pauli_text(text: str, source: str = "<string>") -> tuple[PauliSum, dict[str, str]]:
    """Parse the Pauli-sum text format. Returns the sum and the ``# key: value`` header."""
    header: dict[str, str] = {}
    items: list[tuple[PauliString, float]] = []
    n_qubits = None
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, _, val = body.partition(":")
                header[key.strip().lower()] = val.strip()
            continue
        line = line.split("#", 1)[0].strip()
        parts = line.split()
        if len(parts) != 2:
            raise PauliParseError(line_no, f"expected '<coefficient> <string>', got {raw!r}", source)
        try:
            coeff = float(parts[0])
        except ValueError:
            raise PauliParseError(line_no, f"bad coefficient {parts[0]!r}", source) from None
        try:
            p = PauliString.from_label(parts[1])
        except PauliError as exc:
            raise PauliParseError(line_no, str(exc), source) from None
        if n_qubits is None:
            n_qubits = p.n_qubits
        elif p.n_qubits != n_qubits:
            raise PauliParseError(line_no, f"string has {p.n_qubits} qubits, expected {n_qubits}", source)
        items.append((p, coeff))
    if "n_qubits" in header:
        declared = int(header["n_qubits"])
        if n_qubits is not None and declared != n_qubits:
            raise PauliParseError(0, f"header declares {declared} qubits, terms have {n_qubits}", source)
        n_qubits = declared
    if n_qubits is None:
        raise PauliParseError(0, "no terms and no '# n_qubits:' header", source)
    return PauliSum(n_qubits, items), header


def format_pauli_text(op: PauliSum, header: Mapping[str, str] | None = None) -> str:
    lines = [f"# {k}: {v}" for k, v in (header or {}).items()]
    lines += [f"{float(np.real(c))!r} {p.label}" for p, c in op]
    return "\n".join(lines) + "\n"
