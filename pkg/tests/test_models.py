import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from oracles import (
    HEISENBERG2_EIGENVALUES,
    HEISENBERG4_GROUND_ENERGY,
    dense_label,
    dense_sum,
    expm_herm,
    heisenberg_terms,
    ising_terms,
)
from vcqds.ansatz import ansatz_apply, ansatz_apply_and_derivatives
from vcqds.models import (
    ISING_2X3_BONDS,
    ModelError,
    build_model,
    four_site_pattern,
    heisenberg_chain,
    ingest_molecular,
    ising_2x3,
    singlet,
)
from vcqds.pauli import PauliError, PauliParseError, PauliString, PauliSum
from vcqds.statevector import basis_state, expectation


def _dense(op: PauliSum) -> np.ndarray:
    return dense_sum([(p.label, c) for p, c in op])


@given(st.floats(0.1, 3), st.floats(0.1, 3))
def test_ising_hamiltonian(J, d):
    b = ising_2x3(J, d)
    terms, bonds = ising_terms(J, d)
    assert tuple(bonds) == ISING_2X3_BONDS
    np.testing.assert_allclose(b.H0.to_matrix(), dense_sum(terms), atol=1e-13)


def test_ising_bonds_match_ansatz_groups():
    b = ising_2x3()
    zz_in_ansatz = {p.label for grp in b.ansatz.groups for p in grp if "X" not in p.label}
    assert zz_in_ansatz == {p.label for p, _ in b.H0 if "X" not in p.label}
    assert len(ISING_2X3_BONDS) == 7


def test_ising_ansatz_structure():
    c = ising_2x3().ansatz
    # U_h^3 U_s U_h^3 U_s: 6 U_h blocks of 5 grouped parameters, 2 U_s blocks of 6
    assert c.n_params == 6 * 5 + 2 * 6
    # the rightmost U_s acts first
    assert c.layers[0] == "Us8" and c.layers[-1] == "Uh1"
    assert [len(g) for g in c.groups[6:11]] == [1, 2, 1, 2, 1]
    assert c.groups[6][0].label == "ZZIIII"  # Z1Z2 acts first within a U_h block


def test_ising_initial_correlation_is_one():
    b = ising_2x3()
    assert expectation(b.initial_state, b.observables["C"]) == pytest.approx(1.0)
    np.testing.assert_array_equal(ansatz_apply(b.ansatz, b.initial_state), b.initial_state)


def test_ising_no_dead_parameters_at_start():
    b = ising_2x3()
    _, d = ansatz_apply_and_derivatives(b.ansatz, b.initial_state)
    assert np.all(np.linalg.norm(d, axis=1) > 0.5)


def test_heisenberg2_spectrum_and_singlet():
    b = heisenberg_chain(2)
    np.testing.assert_allclose(np.linalg.eigvalsh(b.H0.to_matrix()), HEISENBERG2_EIGENVALUES, atol=1e-12)
    assert expectation(singlet(), b.H0) == pytest.approx(-3.0)
    np.testing.assert_array_equal(b.initial_state, singlet())
    assert b.bonds == ((0, 1),)


def test_heisenberg2_terms_commute_and_factorise():
    h = heisenberg_chain(2).H0
    u = np.eye(4, dtype=complex)
    for k in "XYZ":
        u = expm_herm(dense_label(k + k), 0.9) @ u
    np.testing.assert_allclose(u, expm_herm(h.to_matrix(), 0.9), atol=1e-12)


def test_heisenberg4_ground_state_matches_pattern():
    b = heisenberg_chain(4)
    np.testing.assert_allclose(b.H0.to_matrix(), dense_sum(heisenberg_terms(4)), atol=1e-13)
    assert expectation(b.initial_state, b.H0) == pytest.approx(HEISENBERG4_GROUND_ENERGY)
    assert abs(np.vdot(b.initial_state, four_site_pattern())) == pytest.approx(1.0, abs=1e-12)
    assert np.linalg.norm(four_site_pattern()) == pytest.approx(1.0)


@pytest.mark.parametrize("n, periodic, n_bonds", [(4, False, 3), (4, True, 4), (6, True, 6), (2, True, 1)])
def test_heisenberg_bonds(n, periodic, n_bonds):
    b = heisenberg_chain(n, periodic=periodic)
    assert len(b.bonds) == n_bonds
    total_z = PauliSum(n, [(PauliString.single(n, i, "Z"), 1.0) for i in range(n)])
    assert b.H0.commutes_with(total_z)


def test_heisenberg_rejects_single_site_and_degenerate_ground():
    with pytest.raises(ValueError):
        heisenberg_chain(1)
    # odd rings have a degenerate ground doublet, so no default initial state
    with pytest.raises(ValueError, match="degenerate"):
        heisenberg_chain(3)


def test_build_model_names():
    assert build_model("ising2x3", J=2.0).metadata["J"] == 2.0
    assert build_model("heisenberg4").n_qubits == 4
    for bad in ("heisenbergX", "potts"):
        with pytest.raises(ModelError):
            build_model(bad)


def _write(path, text):
    path.write_text(text)
    return path


def test_ingest_bundled_style_files(tmp_path):
    h = _write(tmp_path / "h.txt", "# n_qubits: 4\n# ref: 1100\n-1.0 IIII\n0.2 ZIII\n0.1 XXYY\n")
    mu = _write(tmp_path / "mu.txt", "# n_qubits: 4\n0.3 XZXI\n")
    b = ingest_molecular(h, mu)
    np.testing.assert_array_equal(b.initial_state, basis_state(4, "1100"))
    assert b.observables["dipole"].coeff(PauliString.from_label("XZXI")) == 0.3
    assert b.coupling.coeff(PauliString.from_label("XZXI")) == -0.3
    assert b.ansatz.n_params == 2 * 3


def test_ingest_errors(tmp_path):
    h = _write(tmp_path / "h.txt", "0.5 XQ\n")
    mu = _write(tmp_path / "mu.txt", "0.3 XZXI\n")
    with pytest.raises(PauliParseError, match=":1:"):
        ingest_molecular(h, mu)
    with pytest.raises(FileNotFoundError, match="nope.txt"):
        ingest_molecular(tmp_path / "nope.txt", mu)
    h = _write(tmp_path / "h.txt", "0.5 XX\n")
    with pytest.raises(ModelError, match="mismatch"):
        ingest_molecular(h, mu)
    h = _write(tmp_path / "h.txt", "# ref: 11\n0.5 XXII\n")
    with pytest.raises(ModelError):
        ingest_molecular(h, mu)
    h = _write(tmp_path / "h.txt", "1.0 IIII\n")
    z = _write(tmp_path / "z.txt", "0.0 IIII\n# n_qubits: 4\n")
    with pytest.raises(PauliError):
        ingest_molecular(h, z)
