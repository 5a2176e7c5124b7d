import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vcqds.pauli import PauliSum
from vcqds.pipeline import (
    DenseFastForward,
    KickField,
    PlanError,
    SimulationPlan,
    expectations,
    load_plan,
    run_exact_reference,
    run_hybrid,
    sample_fast_forward,
    thread_count,
    write_run,
)

COUPLING = PauliSum.from_labels({"ZI": 1.0})


def small_plan(**kw):
    base = dict(model="heisenberg2", e0=1e-3, t_total=10.0, dt_kick=0.01, dt_record=0.05)
    base.update(kw)
    return SimulationPlan(**base)


@given(st.floats(0.05, 1.0), st.floats(-1, 1).filter(lambda x: x != 0))
def test_kick_area_is_e0(gamma, e0):
    kick = KickField(e0, gamma, COUPLING, t_f=400 * gamma, center=200 * gamma)
    t = np.linspace(0, kick.t_f, 400001)
    area = np.trapezoid(kick.amplitude(t), t)
    assert area == pytest.approx(e0, rel=5e-3)


def test_kick_window_and_validation():
    kick = KickField(1.0, 0.25, COUPLING, t_f=5.0)
    assert kick.windowed(np.array([-1.0, 0.0, 5.0, 6.0])).tolist()[0] == 0.0
    assert kick.windowed(np.array([6.0]))[0] == 0.0
    assert kick.amplitude(0.0) == pytest.approx(1 / (np.pi * 0.25))
    h = kick.hamiltonian(PauliSum.from_labels({"XX": 1.0}), 0.0)
    assert h.coeff(COUPLING.strings()[0]) == pytest.approx(kick.amplitude(0.0))
    for bad in (dict(e0=np.inf), dict(gamma=0.0), dict(t_f=-1.0), dict(t_f=0.5)):
        args = dict(e0=1.0, gamma=0.25, coupling=COUPLING, t_f=5.0) | bad
        with pytest.raises(PlanError):
            KickField(**args)


def test_plan_defaults_and_t_f():
    plan = small_plan()
    assert plan.t_f == pytest.approx(5.0)  # 20 Gamma
    assert small_plan(kick_center="mid", t_total=20.0).t_f == pytest.approx(10.0)
    assert small_plan(tf=2.0).t_f == 2.0
    assert len(plan.record_times()) == 201


@pytest.mark.parametrize(
    "kw",
    [
        dict(hamiltonian_file="h.txt"),
        dict(model=None),
        dict(gamma=-1.0),
        dict(dt_kick=0.0),
        dict(e0=float("nan")),
        dict(dt_record=0.015),
        dict(t_total=1.0),
        dict(kick_center="late"),
        dict(scheme="leapfrog"),
        dict(ansatz_layers=0),
        dict(tf=1.234),
    ],
)
def test_plan_validation(kw):
    with pytest.raises(PlanError):
        small_plan(**kw).validate()


def test_file_plan_needs_dipole():
    with pytest.raises(PlanError):
        SimulationPlan(hamiltonian_file="h.txt").validate()


def test_load_plan_json_and_yaml(tmp_path):
    (tmp_path / "h.txt").write_text("0.5 XX\n")
    (tmp_path / "mu.txt").write_text("0.1 ZI\n")
    doc = dict(hamiltonian_file="h.txt", dipole_file="mu.txt", e0=0.01, t_total=20.0, seed=3, output_dir="o")
    (tmp_path / "p.json").write_text(json.dumps(doc))
    plan = load_plan(tmp_path / "p.json")
    assert plan.hamiltonian_file == str(tmp_path / "h.txt") and plan.seed == 3
    yaml_text = "\n".join(f"{k}: {v}" for k, v in doc.items())
    (tmp_path / "p.yaml").write_text(yaml_text)
    assert load_plan(tmp_path / "p.yaml") == plan


def test_load_plan_errors(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_plan(tmp_path / "none.json")
    (tmp_path / "bad.json").write_text("{not json")
    with pytest.raises(PlanError):
        load_plan(tmp_path / "bad.json")
    (tmp_path / "list.json").write_text("[1, 2]")
    with pytest.raises(PlanError):
        load_plan(tmp_path / "list.json")
    (tmp_path / "extra.json").write_text(json.dumps({"model": "heisenberg2", "colour": "blue"}))
    with pytest.raises(PlanError, match="colour"):
        load_plan(tmp_path / "extra.json")


def test_thread_count(monkeypatch):
    monkeypatch.delenv("VCQDS_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("VCQDS_THREADS", "3")
    assert thread_count() == 3
    for bad in ("zero", "0"):
        monkeypatch.setenv("VCQDS_THREADS", bad)
        with pytest.raises(PlanError):
            thread_count()


def test_threaded_sampling_is_identical():
    h = PauliSum.from_labels({"XX": 1.0, "ZI": 0.4})
    ff = DenseFastForward(h)
    psi = np.array([1, 0, 0, 0], dtype=complex)
    taus = 0.01 * np.arange(5000)
    obs = {"z": PauliSum.from_labels({"ZI": 1.0})}
    a = sample_fast_forward(ff, psi, taus, obs, threads=1)
    b = sample_fast_forward(ff, psi, taus, obs, threads=4)
    np.testing.assert_array_equal(a["z"], b["z"])


@pytest.fixture(scope="module")
def hybrid():
    plan = small_plan()
    return plan, run_hybrid(plan), run_exact_reference(plan)


def test_hybrid_conserves_total_sz(hybrid):
    _, res, _ = hybrid
    total = res.records["Sz1"] + res.records["Sz2"]
    assert np.ptp(total) <= 1e-10


def test_second_phase_is_exact_from_handoff(hybrid):
    plan, res, _ = hybrid
    late = res.times > plan.t_f + 1e-9
    bundle = plan.build()
    states = DenseFastForward(bundle.H0)(res.handoff_state, res.times[late] - plan.t_f)
    np.testing.assert_allclose(res.records["Sz1"][late], expectations(states, bundle.observables["Sz1"]), atol=1e-12)


def test_hybrid_tracks_reference(hybrid):
    _, res, exact = hybrid
    amp = np.abs(exact.records["Sz1"]).max()
    assert amp > 1e-5
    # same response scale and sign as the dense reference
    c = np.corrcoef(res.records["Sz1"], exact.records["Sz1"])[0, 1]
    assert c > 0.9


def test_zero_field_leaves_eigenstate_flat():
    res = run_hybrid(small_plan(e0=0.0))
    for vals in res.records.values():
        assert np.ptp(vals) <= 1e-12


def test_commuting_dipole_gives_no_response(tmp_path):
    (tmp_path / "h.txt").write_text("# n_qubits: 2\n-0.5 II\n")
    (tmp_path / "mu.txt").write_text("0.3 ZI\n0.2 IZ\n")
    plan = SimulationPlan(hamiltonian_file=str(tmp_path / "h.txt"), dipole_file=str(tmp_path / "mu.txt"),
                          e0=0.01, t_total=10.0)
    res = run_hybrid(plan)
    assert np.ptp(res.records["dipole"]) <= 1e-12


def test_unknown_observable():
    with pytest.raises(PlanError, match="unknown observables"):
        run_hybrid(small_plan(observables=["Sz9"]))


def test_model_without_coupling():
    with pytest.raises(PlanError, match="coupling"):
        run_hybrid(SimulationPlan(model="ising2x3", t_total=10.0))


def test_write_run_is_deterministic(hybrid, tmp_path):
    plan, res, exact = hybrid
    files = write_run(res, tmp_path / "a", exact=exact)
    names = sorted(p.name for p in files)
    assert names == sorted(["Sz1.csv", "Sz1_exact.csv", "Sz2.csv", "Sz2_exact.csv", "field.csv", "cartan.txt",
                            "vqds_diagnostics.csv", "manifest.json"])
    again = write_run(run_hybrid(plan), tmp_path / "b", exact=run_exact_reference(plan))
    for p, q in zip(sorted(files), sorted(again)):
        assert p.read_bytes() == q.read_bytes()
    man = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert man["plan"]["e0"] == plan.e0 and man["cartan"]["depth"] == 0
    # the manifest's plan reproduces the run
    rerun = run_hybrid(SimulationPlan(**man["plan"]))
    np.testing.assert_array_equal(rerun.records["Sz1"], res.records["Sz1"])


def test_reference_converges_first_order():
    plan = small_plan(t_total=5.0)
    runs = [run_exact_reference(plan, refine=r).records["Sz1"] for r in (1, 2, 4)]
    d1 = np.abs(runs[0] - runs[1]).max()
    d2 = np.abs(runs[1] - runs[2]).max()
    assert d1 <= 4 * d2 and d2 < d1


def test_phase_two_is_periodic(hybrid):
    # two-site spectrum {-3, 1, 1, 1}: every relative phase returns after 2 pi / 4
    plan, res, _ = hybrid
    bundle = plan.build()
    ff = DenseFastForward(bundle.H0)
    period = 2 * np.pi / 4
    states = ff(res.handoff_state, [0.0, period, 7 * period])
    vals = expectations(states, bundle.observables["Sz1"])
    np.testing.assert_allclose(vals, vals[0], atol=1e-8)


def test_out_of_order_sampling(hybrid):
    plan, res, _ = hybrid
    ff = DenseFastForward(plan.build().H0)
    taus = np.array([3.0, 0.5, 9.0, 1.0])
    forward = ff(res.handoff_state, np.sort(taus))
    shuffled = ff(res.handoff_state, taus)
    np.testing.assert_allclose(shuffled[np.argsort(taus)], forward, atol=1e-15)


def test_auto_regularization_scales_with_field():
    assert small_plan(e0=1e-5).regularization == pytest.approx(1e-11)
    assert small_plan(e0=0.01).regularization == 1e-8
    assert small_plan(e0=0.0).regularization == 1e-8
    assert small_plan(reg=1e-6).regularization == 1e-6
    with pytest.raises(PlanError):
        small_plan(reg=-1.0).validate()
