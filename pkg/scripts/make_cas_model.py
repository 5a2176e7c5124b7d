"""Write the synthetic two-orbital, two-electron test molecule used by the absorption workflow.

Spin orbitals (qubits): 0 = g alpha, 1 = g beta, 2 = u alpha, 3 = u beta; occupation 1 = filled,
Jordan-Wigner ordering by qubit index. The Hamiltonian keeps orbital energies, Coulomb integrals
and the spin exchange K_gu but no pair-hopping term, so the closed-shell determinant |1100> is an
exact eigenstate and the kicked dipole contains a single dominant transition.
"""

import argparse
import itertools
from pathlib import Path

import numpy as np

from vcqds.pauli import PauliString, PauliSum, format_pauli_text
from vcqds.statevector import pauli_sum_matrix

N = 4
DEFAULTS = dict(eps_g=-0.6, eps_u=0.1, j_gg=0.65, j_uu=0.7, j_gu=0.6, k_gu=0.18, dipole=0.1)


def annihilator(p: int) -> np.ndarray:
    # a_p = Z_0 ... Z_{p-1} (X_p + i Y_p) / 2 with |1> occupied
    ops = [(q, "Z") for q in range(p)]
    lab_x = ["I"] * N
    lab_y = ["I"] * N
    for q, _ in ops:
        lab_x[q] = lab_y[q] = "Z"
    lab_x[p], lab_y[p] = "X", "Y"
    x = pauli_sum_matrix(PauliSum(N, [(PauliString.from_label("".join(lab_x)), 1.0)]))
    y = pauli_sum_matrix(PauliSum(N, [(PauliString.from_label("".join(lab_y)), 1.0)]))
    return (x + 1j * y) / 2


def build(eps_g, eps_u, j_gg, j_uu, j_gu, k_gu, dipole):
    a = [annihilator(p) for p in range(N)]
    ad = [m.conj().T for m in a]
    n = [ad[p] @ a[p] for p in range(N)]
    g, u = (0, 1), (2, 3)
    H = eps_g * (n[0] + n[1]) + eps_u * (n[2] + n[3])
    H = H + j_gg * n[0] @ n[1] + j_uu * n[2] @ n[3]
    H = H + j_gu * (n[0] + n[1]) @ (n[2] + n[3])
    for s, t in itertools.product(range(2), repeat=2):
        H = H + k_gu * ad[g[s]] @ ad[u[t]] @ a[g[t]] @ a[u[s]]
    mu = -dipole * sum(ad[g[s]] @ a[u[s]] + ad[u[s]] @ a[g[s]] for s in range(2))
    return H, mu


def to_pauli(mat: np.ndarray) -> PauliSum:
    items = []
    for lab in itertools.product("IXYZ", repeat=N):
        p = PauliString.from_label("".join(lab))
        c = np.trace(pauli_sum_matrix(PauliSum(N, [(p, 1.0)])) @ mat) / 2**N
        if abs(c) > 1e-14:
            assert abs(c.imag) < 1e-14
            items.append((p, float(c.real)))
    return PauliSum(N, items)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path(__file__).resolve().parents[1] / "src/vcqds/data")
    args = ap.parse_args(argv)
    H, mu = build(**DEFAULTS)
    header = {"n_qubits": str(N), "ref": "1100"}
    params = ", ".join(f"{k}={v}" for k, v in DEFAULTS.items())
    args.out.mkdir(parents=True, exist_ok=True)
    for name, mat in (("cas22_hamiltonian.txt", H), ("cas22_dipole.txt", mu)):
        text = f"# synthetic CAS(2,2) test molecule ({params})\n" + format_pauli_text(to_pauli(mat), header)
        (args.out / name).write_text(text)
        print(f"wrote {args.out / name}")


if __name__ == "__main__":
    main()
