"""Command-line front end.

Exit codes: 0 success, 1 numerical failure, 2 input error. Failures print a one-line JSON record on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

EXIT_OK, EXIT_NUMERICAL, EXIT_INPUT = 0, 1, 2
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS", "NUMBA_NUM_THREADS")

log = logging.getLogger("vcqds")


def _cap_threads() -> None:
    # must run before numpy / numba load their thread pools
    raw = os.environ.get("VCQDS_THREADS")
    if raw and raw.isdigit() and int(raw) > 0:
        for var in _THREAD_VARS:
            os.environ.setdefault(var, raw)


def _add_model_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="plan file (JSON or YAML)")
    p.add_argument("--model", help="ising2x3, heisenberg2, heisenberg4, ...")
    p.add_argument("--hamiltonian", help="Pauli-sum Hamiltonian file")
    p.add_argument("--dipole", help="Pauli-sum dipole file")
    p.add_argument("--j", type=float, help="exchange / coupling J")
    p.add_argument("--d", type=float, help="transverse field d (Ising)")
    p.add_argument("--seed", type=int)
    p.add_argument("--output-dir")


def _add_run_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--e0", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--dt", type=float, help="VQDS step inside the kick window")
    p.add_argument("--t-total", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vcqds", description="Hybrid variational / Cartan real-time simulation.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("cartan", help="Cartan factorisation H0 = K h K^dag")
    _add_model_args(p)
    p.add_argument("--tolerance", type=float, default=1e-10)

    p = sub.add_parser("evolve", help="kick with VQDS, then fast-forward")
    _add_model_args(p)
    _add_run_args(p)
    p.add_argument("--with-exact", action="store_true", help="also write the dense reference")

    p = sub.add_parser("spectrum", help="spectra from time-series CSVs written by evolve")
    p.add_argument("--input-dir", required=True)
    p.add_argument("--kind", choices=("absorption", "susceptibility", "magnon", "plain"), default="plain")
    p.add_argument("--series", default=None, help="series name for plain/susceptibility (default: all)")
    p.add_argument("--damping", type=float, default=0.01)
    p.add_argument("--e0", type=float, help="field strength (default: from manifest)")
    p.add_argument("--shift", type=float, default=0.0, help="frequency shift applied to sigma")
    p.add_argument("--output-dir")

    for n in (2, 3, 5, 6):
        p = sub.add_parser(f"reproduce-fig{n}", help=f"bundled reference workflow {n}")
        p.add_argument("--output-dir", required=True)
        p.add_argument("--seed", type=int, default=0)
        if n in (3, 5):
            _add_run_args(p)
        if n in (3, 5, 6):
            p.add_argument("--damping", type=float)
        if n == 6:
            p.add_argument("--component", choices=("X", "Y", "Z"), default="Z", help="spin component correlated")
    return parser


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _plan_from_args(args):
    from .pipeline import PlanError, SimulationPlan, load_plan

    if args.config:
        plan = load_plan(args.config)
        if args.model or args.hamiltonian:
            raise PlanError("--config cannot be combined with --model/--hamiltonian")
    elif args.model:
        plan = SimulationPlan(model=args.model)
    elif args.hamiltonian:
        if not args.dipole:
            raise PlanError("--hamiltonian needs --dipole")
        plan = SimulationPlan(hamiltonian_file=args.hamiltonian, dipole_file=args.dipole, t_total=2000.0, e0=0.01)
    else:
        raise PlanError("give --config, --model or --hamiltonian")
    params = dict(plan.model_params)
    if args.j is not None:
        params["J"] = args.j
    if args.d is not None:
        params["d"] = args.d
    overrides = {"model_params": params, "seed": args.seed, "output_dir": args.output_dir}
    for key, attr in (("e0", "e0"), ("gamma", "gamma"), ("dt_kick", "dt"), ("t_total", "t_total")):
        overrides[key] = getattr(args, attr, None)
    return plan.replace(**overrides)


def cmd_cartan(args) -> dict:
    from .cartan import CartanOptions, factorize, save_factorization

    plan = _plan_from_args(args)
    bundle = plan.build()
    fact = factorize(bundle.H0, opts=CartanOptions(tolerance=args.tolerance, seed=plan.seed))
    report = {
        "model": bundle.name,
        "n_qubits": bundle.n_qubits,
        "closure_dim": len(fact.split.g),
        "k": len(fact.split.k_part),
        "m": len(fact.split.m_part),
        "h": len(fact.split.h_part),
        "depth": fact.depth,
        "residual": fact.residual_norm,
        "reconstruction_error": fact.reconstruction_error(bundle.H0),
        "iterations": fact.iterations,
    }
    out = Path(plan.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_factorization(out / "cartan.txt", fact)
    (out / "cartan_report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


def cmd_evolve(args) -> dict:
    from .pipeline import run_exact_reference, run_hybrid, write_run

    plan = _plan_from_args(args)
    bundle = plan.build()
    result = run_hybrid(plan, bundle=bundle)
    exact = run_exact_reference(plan, bundle=bundle) if args.with_exact else None
    written = write_run(result, plan.output_dir, exact=exact)
    return {"model": result.model, "output_dir": str(plan.output_dir), "files": sorted(p.name for p in written)}


def _manifest(input_dir: Path) -> dict:
    p = input_dir / "manifest.json"
    return json.loads(p.read_text()) if p.exists() else {}


def cmd_spectrum(args) -> dict:
    import numpy as np

    from .figures import write_peaks
    from .pipeline import PlanError
    from .spectra import (
        TimeSeries,
        absorption_cross_section,
        correlation_from_susceptibility,
        damped_dft,
        find_peaks,
        magnon_spectrum,
        polarizability,
        read_series_csv,
        susceptibility,
        write_spectrum_csv,
    )

    src = Path(args.input_dir)
    if not src.is_dir():
        raise FileNotFoundError(f"no such directory: {src}")
    out = Path(args.output_dir or src)
    out.mkdir(parents=True, exist_ok=True)
    man = _manifest(src)
    e0 = args.e0 if args.e0 is not None else man.get("plan", {}).get("e0")
    summary = {}

    def emit(name, spec, values):
        write_spectrum_csv(out / f"{name}.csv", spec)
        peaks = find_peaks(spec.omegas, values, omega_min=1e-9)
        write_peaks(out / f"{name}_peaks.csv", peaks)
        summary[name] = [{"omega": p.omega, "height": p.height, "fwhm": p.fwhm} for p in peaks[:5]]

    if args.kind == "absorption":
        d = read_series_csv(src / "dipole.csv" if args.series is None else src / f"{args.series}.csv")
        field = read_series_csv(src / "field.csv")
        alpha = polarizability(damped_dft(d.shifted(), args.damping), damped_dft(field, args.damping), e0=e0)
        sigma = absorption_cross_section(alpha, args.shift)
        write_spectrum_csv(out / "alpha.csv", alpha)
        emit("sigma", sigma, sigma.values)
    elif args.kind == "susceptibility":
        if e0 is None:
            raise PlanError("susceptibility needs --e0 or a manifest")
        names = [args.series] if args.series else sorted(
            p.stem for p in src.glob("Sz*.csv") if not p.stem.endswith("_exact")
        )
        if not names:
            raise FileNotFoundError(f"no Sz*.csv series in {src}")
        for name in names:
            chi = susceptibility(damped_dft(read_series_csv(src / f"{name}.csv").shifted(), args.damping), e0)
            emit(f"chi_{name}", chi, np.abs(chi.values))
            write_spectrum_csv(out / f"C_{name}.csv", correlation_from_susceptibility(chi))
    elif args.kind == "magnon":
        corr = {}
        for p in sorted(src.glob("corr_*_re.csv")):
            tag = p.stem.split("_")[1]
            re = read_series_csv(p)
            im = read_series_csv(src / f"corr_{tag}_im.csv")
            corr[(int(tag[:-1]) - 1, int(tag[-1]) - 1)] = TimeSeries(re.t0, re.dt, re.values + 1j * im.values)
        if not corr:
            raise FileNotFoundError(f"no corr_*_re.csv series in {src}")
        n = 1 + max(i for i, _ in corr)
        for m, (q, spec) in enumerate(magnon_spectrum(corr, np.arange(n), args.damping).items()):
            emit(f"magnon_q{m}", spec, np.abs(spec.values))
    else:
        names = [args.series] if args.series else sorted(
            p.stem for p in src.glob("*.csv") if p.read_text().startswith("t,value")
        )
        if not names:
            raise FileNotFoundError(f"no t,value series in {src}")
        for name in names:
            spec = damped_dft(read_series_csv(src / f"{name}.csv").shifted(), args.damping)
            emit(f"spectrum_{name}", spec, np.abs(spec.values))
    (out / "peaks.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return {"kind": args.kind, "peaks": {k: v[:1] for k, v in summary.items()}}


def cmd_reproduce(args) -> dict:
    from . import figures

    n = int(args.command[len("reproduce-fig") :])
    out = Path(args.output_dir)
    extra = {}
    if n == 2:
        res = figures.reproduce_fig2(out)
        report = {"max_error": {f"{k:g}": v for k, v in res["max_error"].items()}}
    elif n == 3:
        overrides = {k: v for k, v in (("e0", args.e0), ("gamma", args.gamma), ("dt_kick", args.dt),
                                       ("t_total", args.t_total), ("seed", args.seed)) if v is not None}
        if args.damping is not None:
            extra["damping"] = args.damping
        plan = figures.molecular_plan(**overrides)
        res = figures.absorption_workflow(plan, output_dir=out, **extra)
        report = {"peak": res.peaks[0].omega, "gap": res.gap, "bin": res.bin, "drift": res.drift,
                  "single_peaked": figures.single_peaked(res.peaks)}
    elif n == 5:
        overrides = {k: v for k, v in (("gamma", args.gamma), ("dt_kick", args.dt), ("seed", args.seed))
                     if v is not None}
        kw = {"e0": args.e0 if args.e0 is not None else 1e-5}
        if args.t_total is not None:
            kw["t_total"] = args.t_total
        if args.damping is not None:
            kw["damping"] = args.damping
        res = figures.reproduce_fig5(out, **kw, **overrides)
        report = {"peak": res.peak, "gap": res.gap, "bin": res.bin, "total_sz_spread": res.total_spread}
    else:
        kw = {"damping": args.damping} if args.damping is not None else {}
        res = figures.reproduce_fig6(out, seed=args.seed, component=args.component, **kw)
        report = {"peaks": {f"{q:.6f}": w for q, w in res.peaks.items()},
                  "oracle": {f"{q:.6f}": w for q, w in res.oracle.items()},
                  "bin": res.bin, "mirror_error": res.mirror_error}
    out.mkdir(parents=True, exist_ok=True)
    (out / "summary.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return report


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _classify(exc: BaseException) -> int:
    from numpy.linalg import LinAlgError

    from .cartan import CartanError
    from .pauli import ClosureCapExceeded

    if isinstance(exc, (CartanError, ClosureCapExceeded, LinAlgError, FloatingPointError, ArithmeticError)):
        return EXIT_NUMERICAL
    if isinstance(exc, (ValueError, KeyError, TypeError, OSError)):
        return EXIT_INPUT
    return EXIT_NUMERICAL


def main(argv: list[str] | None = None) -> int:
    _cap_threads()
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), format="%(levelname)s %(name)s: %(message)s")
    handler = {"cartan": cmd_cartan, "evolve": cmd_evolve, "spectrum": cmd_spectrum}.get(args.command, cmd_reproduce)
    try:
        report = handler(args)
    except Exception as exc:
        code = _classify(exc)
        record = {"error": type(exc).__name__, "message": str(exc), "exit_code": code}
        print(json.dumps(record), file=sys.stderr)
        if args.verbose:
            log.exception("command failed")
        return code
    print(json.dumps(report, indent=2, sort_keys=True, default=float))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
