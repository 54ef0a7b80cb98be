"""Batch harness: validate configs, run the propagator and both oracles, and
compare methods against named tolerances.

Exit codes: 0 success/pass, 1 tolerance failure, 2 configuration or
validation error, 3 numerical or capacity error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import RunConfig, config_hash, emit_config, parse_config, parse_raw_channels
from .errors import (
    AccuracyError,
    CapacityError,
    ConditioningError,
    ConfigurationError,
    DimensionError,
    InvalidInputError,
    LeakageError,
    MarginError,
    RangeOverflowError,
    SymmetryViolationError,
    TildeViolationError,
)
from .fock import FockSpace, density, extract_moments, integrate, state_from_spec
from .montecarlo import McConfig, estimate
from .propagator import MomentTensor, build_generator, propagate_series
from .states import initial_moments
from .symplectic import IndexScheme, VALIDATION_TOL, build_struct_matrices, mat_exp, tilde_mat

# Per-pair comparison tolerances.
FOCK_REL_TOL = 1e-4
MC_NSIGMA = 4.0
MC_NSIGMA_HARD = 6.0
MC_MIN_FRACTION = 0.95
MC_ZERO_STDERR_ATOL = 1e-10

# Floor applied to relative deviations so exact zeros in the reference do not
# amplify numerical noise: the denominator never drops below this fraction of
# the tensor's largest magnitude.
REL_FLOOR_FRACTION = 1e-8

_CONFIG_ERRORS = (
    ConfigurationError,
    DimensionError,
    InvalidInputError,
    SymmetryViolationError,
    TildeViolationError,
)
_NUMERICAL_ERRORS = (
    AccuracyError,
    CapacityError,
    ConditioningError,
    LeakageError,
    MarginError,
    RangeOverflowError,
)


def _fmt(x: float) -> str:
    return f"{x:.17g}"


def _moment_header(scheme: IndexScheme) -> str:
    cols = ["t"]
    for label in scheme.labels():
        cols.append(f"mu[{label}].re")
        cols.append(f"mu[{label}].im")
    return ",".join(cols)


def write_moment_csv(path: Path, grid, tensors, scheme: IndexScheme):
    """One row per grid time: t followed by re/im of every component, 17
    significant digits."""
    lines = [_moment_header(scheme)]
    for t, data in zip(grid, tensors):
        row = [_fmt(float(t))]
        for z in np.asarray(data).reshape(-1):
            row.append(_fmt(float(np.real(z))))
            row.append(_fmt(float(np.imag(z))))
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _metadata(cfg: RunConfig) -> dict:
    return {
        "config_hash": config_hash(cfg),
        "seed": cfg.seed,
        "versions": {
            "jumpmoments": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def run_validate(raw_config: dict) -> dict:
    """Per-channel structural residuals and spectral radii; reporting only."""
    n, raw_channels = parse_raw_channels(raw_config)
    sm = build_struct_matrices(n)
    report: dict = {"modes": n, "channels": []}
    all_valid = True
    for k, (rate, H) in enumerate(raw_channels):
        scale = 1.0 + float(np.abs(H).max(initial=0.0))
        entry: dict = {
            "channel": k,
            "rate": rate,
            "rate_positive": bool(rate > 0.0),
            "symmetry_residual": float(np.abs(H - H.T).max()),
            "tilde_residual": float(np.abs(tilde_mat(H) - H).max()),
        }
        ok = (
            entry["rate_positive"]
            and entry["symmetry_residual"] <= VALIDATION_TOL * scale
            and entry["tilde_residual"] <= VALIDATION_TOL * scale
        )
        if ok:
            S = mat_exp(1j * (sm.J @ H))
            entry["symplectic_residual"] = float(np.abs(S.T @ sm.J @ S - sm.J).max())
            entry["tilde_S_residual"] = float(np.abs(tilde_mat(S) - S).max())
            entry["spectral_radius"] = float(np.abs(np.linalg.eigvals(S)).max())
        else:
            entry["symplectic_residual"] = None
            entry["tilde_S_residual"] = None
            entry["spectral_radius"] = None
        entry["valid"] = bool(ok)
        all_valid = all_valid and ok
        report["channels"].append(entry)
    report["status"] = "valid" if all_valid else "invalid"
    return report


def _propagator_trajectory(cfg: RunConfig) -> list[np.ndarray]:
    mu0 = initial_moments(cfg.state, cfg.order)
    gen = build_generator(cfg.channels, cfg.order)
    return [mu.data for mu in propagate_series(gen, mu0, cfg.t_grid)]


def _fock_trajectory(cfg: RunConfig) -> tuple[list[np.ndarray], list[float]]:
    fs = FockSpace(cfg.n, cfg.cutoff)
    rho0 = density(state_from_spec(fs, cfg.state))
    states = integrate(fs, cfg.channels, rho0, cfg.t_grid, strict=cfg.strict)
    moments = [extract_moments(fs, st, cfg.order).data for st in states]
    return moments, [st.leakage for st in states]


def _mc_trajectory(cfg: RunConfig):
    mc = McConfig(trajectories=cfg.trajectories, seed=cfg.seed, t_grid=cfg.t_grid)
    return estimate(cfg.channels, cfg.state, cfg.order, mc)


def run_propagate(cfg: RunConfig, out_dir: Path) -> Path:
    """Evolve the configured moments and write one CSV trajectory."""
    scheme = IndexScheme(cfg.n, cfg.order)
    data = _propagator_trajectory(cfg)
    path = out_dir / "propagate.csv"
    write_moment_csv(path, cfg.t_grid, data, scheme)
    return path


def run_oracle(cfg: RunConfig, out_dir: Path) -> tuple[Path, dict]:
    """Integrate the truncated master equation and write extracted moments."""
    scheme = IndexScheme(cfg.n, cfg.order)
    moments, leakages = _fock_trajectory(cfg)
    path = out_dir / "oracle.csv"
    write_moment_csv(path, cfg.t_grid, moments, scheme)
    report = {
        "cutoff": cfg.cutoff,
        "strict": cfg.strict,
        "leakage": {_fmt(t): leak for t, leak in zip(cfg.t_grid, leakages)},
        "max_leakage": max(leakages),
    }
    (out_dir / "oracle_report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    return path, report


def run_mc(cfg: RunConfig, out_dir: Path) -> tuple[Path, Path]:
    """Run the Monte Carlo oracle; write mean moments and standard errors."""
    scheme = IndexScheme(cfg.n, cfg.order)
    estimates = _mc_trajectory(cfg)
    mean_path = out_dir / "mc.csv"
    err_path = out_dir / "mc_stderr.csv"
    write_moment_csv(mean_path, cfg.t_grid, [e.mean.data for e in estimates], scheme)
    write_moment_csv(
        err_path,
        cfg.t_grid,
        [e.stderr_re + 1j * e.stderr_im for e in estimates],
        scheme,
    )
    return mean_path, err_path


def _relative_deviation(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    floor = REL_FLOOR_FRACTION * max(float(np.abs(b).max(initial=0.0)), 1e-300)
    denom = np.maximum(np.abs(b), floor)
    return np.abs(a - b) / denom


def _compare_rel_pair(name_a, name_b, series_a, series_b, grid, scheme, out_dir):
    rows = []
    max_abs = 0.0
    max_rel = 0.0
    for t, a, b in zip(grid, series_a, series_b):
        rel = _relative_deviation(a, b)
        dev = np.abs(a - b)
        max_abs = max(max_abs, float(dev.max()))
        max_rel = max(max_rel, float(rel.max()))
        for k, label in enumerate(scheme.labels()):
            rows.append(
                ",".join(
                    [
                        _fmt(t),
                        label,
                        _fmt(a[k].real),
                        _fmt(a[k].imag),
                        _fmt(b[k].real),
                        _fmt(b[k].imag),
                        _fmt(float(dev[k])),
                        _fmt(float(rel[k])),
                    ]
                )
            )
    header = (
        f"t,component,{name_a}.re,{name_a}.im,{name_b}.re,{name_b}.im,"
        "abs_dev,rel_dev"
    )
    path = out_dir / f"compare_{name_a}_vs_{name_b}.csv"
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    passed = max_rel <= FOCK_REL_TOL
    return {
        "methods": [name_a, name_b],
        "criterion": "relative",
        "tolerance": FOCK_REL_TOL,
        "max_abs_deviation": max_abs,
        "max_rel_deviation": max_rel,
        "pass": bool(passed),
    }


def _compare_mc_pair(name_ref, series_ref, estimates, grid, scheme, out_dir):
    rows = []
    all_z = []
    for t, ref, est in zip(grid, series_ref, estimates):
        ref_mu = MomentTensor.from_array(est.mean.n, est.mean.M, ref)
        z = est.deviation_in_stderr(ref_mu, atol=MC_ZERO_STDERR_ATOL)
        all_z.append(z)
        dev = np.abs(est.mean.data - ref)
        size = scheme.size
        for k, label in enumerate(scheme.labels()):
            rows.append(
                ",".join(
                    [
                        _fmt(t),
                        label,
                        _fmt(est.mean.data[k].real),
                        _fmt(est.mean.data[k].imag),
                        _fmt(ref[k].real),
                        _fmt(ref[k].imag),
                        _fmt(float(dev[k])),
                        _fmt(float(max(z[k], z[size + k]))),
                    ]
                )
            )
    header = (
        f"t,component,mc.re,mc.im,{name_ref}.re,{name_ref}.im,"
        "abs_dev,dev_in_stderr"
    )
    path = out_dir / f"compare_{name_ref}_vs_mc.csv"
    path.write_text("\n".join([header] + rows) + "\n", encoding="utf-8")
    z = np.concatenate(all_z)
    fraction = float(np.mean(z <= MC_NSIGMA))
    worst = float(z.max())
    passed = fraction >= MC_MIN_FRACTION and worst <= MC_NSIGMA_HARD
    return {
        "methods": [name_ref, "mc"],
        "criterion": "stderr",
        "nsigma": MC_NSIGMA,
        "nsigma_hard": MC_NSIGMA_HARD,
        "min_fraction": MC_MIN_FRACTION,
        "fraction_within": fraction,
        "max_deviation_stderr": worst,
        "pass": bool(passed),
    }


def run_compare(cfg: RunConfig, out_dir: Path, methods) -> dict:
    """Run the requested methods on one grid and report per-pair verdicts.

    Pairs involving the Monte Carlo estimate are judged in standard-error
    units (>= 95% of components within 4 sigma, all within 6 sigma); the
    propagator/Fock pair is judged at relative tolerance 1e-4.
    """
    methods = list(methods)
    known = ("propagator", "fock", "mc")
    for m in methods:
        if m not in known:
            raise ConfigurationError(f"unknown method {m!r}; expected subset of {known}")
    if len(set(methods)) < 2:
        raise ConfigurationError("compare needs at least two distinct methods")
    methods = [m for m in known if m in methods]

    scheme = IndexScheme(cfg.n, cfg.order)
    grid = cfg.t_grid
    series: dict[str, list[np.ndarray]] = {}
    leak_report = None
    estimates = None
    if "propagator" in methods:
        series["propagator"] = _propagator_trajectory(cfg)
    if "fock" in methods:
        series["fock"], leakages = _fock_trajectory(cfg)
        leak_report = {"max_leakage": max(leakages)}
    if "mc" in methods:
        estimates = _mc_trajectory(cfg)
        series["mc"] = [e.mean.data for e in estimates]

    for name, data in series.items():
        write_moment_csv(out_dir / f"{name}.csv", grid, data, scheme)

    pairs = []
    if "propagator" in methods and "fock" in methods:
        pairs.append(
            _compare_rel_pair(
                "propagator", "fock", series["propagator"], series["fock"],
                grid, scheme, out_dir,
            )
        )
    for ref_name in ("propagator", "fock"):
        if ref_name in methods and "mc" in methods:
            pairs.append(
                _compare_mc_pair(ref_name, series[ref_name], estimates, grid, scheme, out_dir)
            )

    report = {
        "metadata": _metadata(cfg),
        "order": cfg.order,
        "grid": list(grid),
        "methods": methods,
        "pairs": pairs,
        "pass": bool(all(p["pass"] for p in pairs)),
    }
    if leak_report:
        report["oracle"] = leak_report
    (out_dir / "report.json").write_text(
        json.dumps(report, indent=2) + "\n", encoding="utf-8"
    )
    return report


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="jumpmoments",
        description=(
            "Moment dynamics for bosonic modes under Poisson unitary jumps: "
            "exact propagation with Fock-space and Monte Carlo cross-checks."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("validate", "report structural residuals of the configured generators"),
        ("propagate", "evolve moments exactly and write a CSV trajectory"),
        ("oracle", "integrate the truncated master equation and extract moments"),
        ("mc", "average Monte Carlo jump trajectories"),
        ("compare", "run several methods and check cross-method tolerances"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True, help="path to a JSON run configuration")
        p.add_argument("--out", default=".", help="output directory (created if missing)")
        if name != "validate":
            p.add_argument("--order", type=int, help="override the moment order M")
            p.add_argument("--tmax", type=float, help="override the final time")
            p.add_argument("--steps", type=int, help="override the number of grid steps")
        if name in ("oracle", "compare"):
            p.add_argument("--cutoff", type=int, help="override the Fock cutoff")
            p.add_argument(
                "--strict", action="store_true",
                help="treat truncation leakage above the limit as an error",
            )
        if name in ("mc", "compare"):
            p.add_argument("--trajectories", type=int, help="override the trajectory count")
            p.add_argument("--seed", type=int, help="override the random seed")
        if name == "compare":
            p.add_argument(
                "--methods", default="propagator,fock,mc",
                help="comma-separated subset of propagator,fock,mc",
            )
    return parser


def _apply_overrides(cfg: RunConfig, args: argparse.Namespace) -> RunConfig:
    return cfg.override(
        order=getattr(args, "order", None),
        t_max=getattr(args, "tmax", None),
        steps=getattr(args, "steps", None),
        cutoff=getattr(args, "cutoff", None),
        trajectories=getattr(args, "trajectories", None),
        seed=getattr(args, "seed", None),
        strict=True if getattr(args, "strict", False) else None,
    )


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    out_dir = Path(args.out)

    try:
        if args.command == "validate":
            try:
                with open(args.config, "r", encoding="utf-8") as fh:
                    raw = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                print(f"error: cannot parse config: {exc}", file=sys.stderr)
                return 2
            report = run_validate(raw)
            for entry in report["channels"]:
                print(f"channel {entry['channel'] + 1}: rate={entry['rate']}")
                print(f"  symmetry residual    {entry['symmetry_residual']:.3e}")
                print(f"  tilde residual       {entry['tilde_residual']:.3e}")
                if entry["valid"]:
                    print(f"  symplectic residual  {entry['symplectic_residual']:.3e}")
                    print(f"  tilde(S) residual    {entry['tilde_S_residual']:.3e}")
                    print(f"  spectral radius      {entry['spectral_radius']:.7f}")
            print(f"status: {report['status']}")
            out_dir.mkdir(parents=True, exist_ok=True)
            (out_dir / "validation.json").write_text(
                json.dumps(report, indent=2) + "\n", encoding="utf-8"
            )
            return 0 if report["status"] == "valid" else 2

        cfg = _apply_overrides(parse_config(args.config), args)
        out_dir.mkdir(parents=True, exist_ok=True)

        if args.command == "propagate":
            path = run_propagate(cfg, out_dir)
            print(f"wrote {path}")
            return 0
        if args.command == "oracle":
            path, report = run_oracle(cfg, out_dir)
            print(f"wrote {path} (max leakage {report['max_leakage']:.3e})")
            return 0
        if args.command == "mc":
            mean_path, err_path = run_mc(cfg, out_dir)
            print(f"wrote {mean_path} and {err_path}")
            return 0
        if args.command == "compare":
            methods = [m.strip() for m in args.methods.split(",") if m.strip()]
            report = run_compare(cfg, out_dir, methods)
            for pair in report["pairs"]:
                a, b = pair["methods"]
                verdict = "pass" if pair["pass"] else "FAIL"
                if pair["criterion"] == "relative":
                    print(
                        f"{a} vs {b}: max relative deviation "
                        f"{pair['max_rel_deviation']:.3e} "
                        f"(tolerance {pair['tolerance']:g}) -> {verdict}"
                    )
                else:
                    print(
                        f"{a} vs {b}: {pair['fraction_within'] * 100:.1f}% within "
                        f"{pair['nsigma']:g} stderr, worst "
                        f"{pair['max_deviation_stderr']:.2f} stderr -> {verdict}"
                    )
            print(f"overall: {'pass' if report['pass'] else 'FAIL'}")
            return 0 if report["pass"] else 1
    except _CONFIG_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except _NUMERICAL_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    raise AssertionError(f"unhandled command {args.command!r}")


def entry():
    sys.exit(main())


if __name__ == "__main__":
    entry()
