"""Command-line front end.

Subcommands compute the closed-form bounds, evaluate single
estimators, run the RMSE-versus-N experiment to CSV, check estimator
efficiency, and run the package self-tests. Every file output gets a
sibling key=value manifest sufficient to reproduce it byte-for-byte.

Exit codes: 0 ok, 1 selftest failure, 2 domain error, 3 numerical
non-convergence, 4 I/O failure.
"""

from __future__ import annotations

import argparse
import hashlib
import math
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__
from .engine import equality_check, tblb
from .errors import (
    DegenerateFit,
    DomainError,
    NonConvergent,
    NonFiniteIntegrand,
    NotNaturalParameter,
    SingularQ,
    UnsupportedRegime,
)
from .expfam import (
    make_gaussian_conjugate,
    posterior_quantile_grid,
    scalar_efficiency_test,
)
from .gaussvar import (
    CaseParams,
    bcrb,
    ecrb,
    log_joint_t,
    make_model,
    map_estimate,
    mmse_estimate,
    score,
    t_grid_expectation,
    tbcrb,
)
from .montecarlo import ExperimentConfig, run_experiment

EXIT_OK = 0
EXIT_SELFTEST = 1
EXIT_DOMAIN = 2
EXIT_NONCONVERGENT = 3
EXIT_IO = 4

CSV_HEADER = (
    "N,rmse_map,se_map,rmse_mmse,se_mmse,rmse_ml,se_ml,"
    "sqrt_bcrb,sqrt_tbcrb,sqrt_ecrb,sqrt_mmse_theory"
)

WORKERS_ENV = "COVBOUNDS_WORKERS"


def csvnum(x: float) -> str:
    """17 significant digits: round-trips a float64 exactly."""
    return format(float(x), ".17g")


def humnum(x: float) -> str:
    return format(float(x), ".6g")


@dataclass(frozen=True)
class RunManifest:
    command: str
    params: dict
    seed: int | None
    wall_time_s: float
    sha256: str

    def to_text(self) -> str:
        lines = [
            f"command={self.command}",
            f"artifact_version={__version__}",
        ]
        for key in sorted(self.params):
            lines.append(f"{key}={self.params[key]}")
        if self.seed is not None:
            lines.append(f"seed={self.seed}")
        lines.append(f"wall_time_s={self.wall_time_s:.3f}")
        lines.append(f"sha256={self.sha256}")
        return "\n".join(lines) + "\n"


def write_with_manifest(out_path: str, payload: str, command: str,
                        params: dict, seed: int | None,
                        wall_time_s: float) -> None:
    data = payload.encode()
    out = Path(out_path)
    out.write_bytes(data)
    manifest = RunManifest(
        command=command,
        params=params,
        seed=seed,
        wall_time_s=wall_time_s,
        sha256=hashlib.sha256(data).hexdigest(),
    )
    Path(str(out) + ".manifest").write_text(manifest.to_text())


def _resolve_workers(flag_value) -> int:
    if flag_value is not None:
        n = int(flag_value)
    else:
        env = os.environ.get(WORKERS_ENV)
        if env is None:
            return 1
        try:
            n = int(env)
        except ValueError:
            raise DomainError(
                f"{WORKERS_ENV} must be an integer, got {env!r}"
            ) from None
    if n < 1:
        raise DomainError(f"workers must be >= 1, got {n}")
    return n


# config file support: one key=value per line, keys mirror the long
# flags of the subcommand; values only fill flags the user left unset
_CONVERTERS = {
    "a": float,
    "N": int,
    "t": float,
    "which": str,
    "estimator": str,
    "trials": int,
    "seed": int,
    "workers": int,
    "out": str,
    "model": str,
    "prior-var": float,
    "noise-var": float,
    "probes": lambda s: [float(v) for v in s.replace(",", " ").split()],
    "csv": lambda s: s.strip().lower() in ("1", "true", "yes", "on"),
    "tests-dir": str,
}

_DEST = {
    "N": "n",
    "prior-var": "prior_var",
    "noise-var": "noise_var",
    "tests-dir": "tests_dir",
}


def _read_config(path: str) -> dict:
    out = {}
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DomainError(f"config line is not key=value: {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        if key not in _CONVERTERS:
            raise DomainError(f"unknown config key {key!r}")
        try:
            out[_DEST.get(key, key)] = _CONVERTERS[key](value.strip())
        except ValueError as exc:
            raise DomainError(f"bad config value for {key}: {exc}") from None
    return out


def _merge_config(args: argparse.Namespace, defaults: dict) -> None:
    """Fill unset flags from --config, then from hard defaults."""
    config = _read_config(args.config) if getattr(args, "config", None) else {}
    for dest, hard in defaults.items():
        if getattr(args, dest, None) is None:
            value = config.get(dest, hard)
            setattr(args, dest, value)
    for dest in config:
        if dest not in defaults:
            raise DomainError(
                f"config key {dest!r} does not apply to this command"
            )


def _require(args: argparse.Namespace, names) -> None:
    for name in names:
        if getattr(args, name, None) is None:
            raise DomainError(f"missing required option --{name}")


def cmd_bounds(args) -> int:
    _merge_config(args, {"a": None, "n": None, "which": "all",
                         "csv": None, "out": None})
    _require(args, ("a", "n"))
    p = CaseParams(a=float(args.a), n=int(args.n))
    which = args.which
    if which not in ("bcrb", "tbcrb", "ecrb", "all"):
        raise DomainError(f"unknown bound selector {which!r}")
    names = ("bcrb", "tbcrb", "ecrb") if which == "all" else (which,)
    # closed forms are exact; the tbcrb value is adaptive quadrature
    # run at this relative tolerance
    quad_rel = {"bcrb": 0.0, "ecrb": 0.0, "tbcrb": 1e-9}
    values = {}
    for name in names:
        values[name] = {"bcrb": bcrb, "tbcrb": tbcrb, "ecrb": ecrb}[name](p)
    lines = []
    if args.csv:
        lines.append("which,value,sqrt_value,quad_rel_tol")
        for name in names:
            v = values[name]
            lines.append(
                f"{name},{csvnum(v)},{csvnum(math.sqrt(v))},{quad_rel[name]:g}"
            )
    else:
        for name in names:
            v = values[name]
            tol = "exact" if quad_rel[name] == 0.0 else f"rel<={quad_rel[name]:g}"
            lines.append(
                f"{name}  value={humnum(v)}  sqrt={humnum(math.sqrt(v))}  "
                f"quad_err={tol}"
            )
    payload = "\n".join(lines) + "\n"
    sys.stdout.write(payload)
    if args.out:
        write_with_manifest(
            args.out, payload, "bounds",
            {"a": args.a, "N": args.n, "which": which,
             "csv": bool(args.csv)},
            seed=None, wall_time_s=0.0,
        )
    return EXIT_OK


def cmd_estimate(args) -> int:
    _merge_config(args, {"a": None, "n": None, "t": None,
                         "estimator": None})
    _require(args, ("a", "n", "t", "estimator"))
    p = CaseParams(a=float(args.a), n=int(args.n))
    t = float(args.t)
    if t < 0.0:
        raise DomainError(f"t must be >= 0, got {t}")
    gamma = 2.0 * t / p.n
    kind = args.estimator
    if kind == "map":
        value = float(map_estimate(p, gamma))
    elif kind == "ml":
        value = gamma
    elif kind == "mmse":
        value = mmse_estimate(p, t)
    else:
        raise DomainError(f"unknown estimator {kind!r}")
    sys.stdout.write(
        f"estimator={kind} a={humnum(p.a)} N={p.n} t={humnum(t)} "
        f"gamma={humnum(gamma)} estimate={humnum(value)}\n"
    )
    return EXIT_OK


def cmd_fig1(args) -> int:
    _merge_config(args, {"a": 3.0, "trials": 20000, "seed": 20220419,
                         "out": None, "workers": None})
    _require(args, ("out",))
    parent = Path(args.out).resolve().parent
    if not parent.is_dir() or not os.access(parent, os.W_OK):
        raise OSError(f"output directory {parent} is not writable")
    workers = _resolve_workers(args.workers)
    cfg = ExperimentConfig(
        a=float(args.a),
        n_list=tuple(2 ** k for k in range(1, 14)),
        trials=int(args.trials),
        seed=int(args.seed),
        estimators=("map", "ml", "mmse"),
    )
    start = time.perf_counter()
    rows = run_experiment(cfg, workers=workers)
    wall = time.perf_counter() - start
    lines = [CSV_HEADER]
    for row in rows:
        cells = [str(row.n)]
        for name in ("map", "mmse", "ml"):
            cells.append(csvnum(row.rmse[name]))
            cells.append(csvnum(row.se[name]))
        cells += [
            csvnum(row.sqrt_bcrb),
            csvnum(row.sqrt_tbcrb),
            csvnum(row.sqrt_ecrb),
            csvnum(row.sqrt_mmse_theory),
        ]
        lines.append(",".join(cells))
    payload = "\n".join(lines) + "\n"
    write_with_manifest(
        args.out, payload, "fig1",
        {"a": args.a, "trials": args.trials, "workers": workers},
        seed=int(args.seed), wall_time_s=wall,
    )
    sys.stdout.write(
        f"wrote {args.out} ({len(rows)} rows) in {wall:.1f}s\n"
    )
    return EXIT_OK


def _case_study_report(a: float, n: int, probes) -> list:
    p = CaseParams(a=a, n=n)
    b, tb = bcrb(p), tbcrb(p)
    if probes is None:
        scale = p.n / 4.0
        probes = [0.3 * scale, 0.7 * scale, 1.2 * scale, 2.0 * scale]
    lines = [f"model=case-study a={humnum(a)} N={n}"]
    eq = equality_check(make_model(p), probes)
    lines.append(
        f"equality_check: {eq.verdict} (max deviation {humnum(eq.max_deviation)})"
    )
    all_eff = True
    for t in probes:
        grid = posterior_quantile_grid(
            lambda th: log_joint_t(p, th, t), 1e-9, 1.0 - 1e-9
        )
        rep = scalar_efficiency_test(
            lambda th: score(p, th, t), lambda th: np.asarray(th, float), grid
        )
        all_eff &= rep.is_efficient
        lines.append(
            f"probe t={humnum(t)}: deviation={humnum(rep.deviation)} "
            f"efficient={'yes' if rep.is_efficient else 'no'}"
        )
    lines.append(
        f"bcrb={humnum(b)} tbcrb={humnum(tb)} gap={humnum(tb - b)}"
    )
    if all_eff and eq.verdict == "equal":
        lines.append("verdict: efficient; TBCRB=BCRB=MMSE")
    else:
        lines.append("verdict: not efficient; TBCRB>BCRB")
    return lines


def _conjugate_report(prior_var: float, noise_var: float, n: int,
                      probes) -> list:
    gc = make_gaussian_conjugate(prior_var=prior_var, noise_var=noise_var, n=n)
    sd = math.sqrt(n * n * prior_var + n * noise_var)
    if probes is None:
        probes = [-1.5 * sd, -0.5 * sd, 0.5 * sd, 1.5 * sd]
    lines = [
        f"model=gaussian-conjugate N={n} prior_var={humnum(prior_var)} "
        f"noise_var={humnum(noise_var)}"
    ]
    eq = equality_check(gc.model(), probes)
    lines.append(
        f"equality_check: {eq.verdict} (max deviation {humnum(eq.max_deviation)})"
    )
    all_eff = True
    sig = math.sqrt(gc.posterior_var)
    for s in probes:
        m = gc.posterior_mean(s)
        grid = posterior_quantile_grid(
            lambda th: gc.log_joint(s, th), m - 9.0 * sig, m + 9.0 * sig
        )
        rep = scalar_efficiency_test(
            lambda th: gc.score(s, th), lambda th: np.asarray(th, float), grid
        )
        all_eff &= rep.is_efficient
        lines.append(
            f"probe s={humnum(s)}: deviation={humnum(rep.deviation)} "
            f"efficient={'yes' if rep.is_efficient else 'no'}"
        )
    rep = tblb(gc.model(), gc.s_expectation(), tol=1e-10)
    tb = float(rep.bound[0, 0])
    b = float(rep.diagnostics["classical_bound"][0, 0])
    lines.append(
        f"tbcrb={humnum(tb)} bcrb={humnum(b)} mmse={humnum(gc.posterior_var)} "
        f"gap={humnum(tb - b)}"
    )
    if all_eff and eq.verdict == "equal":
        lines.append("verdict: efficient; TBCRB=BCRB=MMSE")
    else:
        lines.append("verdict: not efficient; TBCRB>BCRB")
    return lines


def cmd_check_efficiency(args) -> int:
    _merge_config(args, {"model": None, "a": None, "n": None,
                         "prior_var": None, "noise_var": None,
                         "probes": None})
    _require(args, ("model",))
    if args.model == "case-study":
        _require(args, ("a", "n"))
        lines = _case_study_report(float(args.a), int(args.n), args.probes)
    elif args.model == "gaussian-conjugate":
        prior_var = 1.0 if args.prior_var is None else float(args.prior_var)
        noise_var = 1.0 if args.noise_var is None else float(args.noise_var)
        n = 4 if args.n is None else int(args.n)
        lines = _conjugate_report(prior_var, noise_var, n, args.probes)
    else:
        raise DomainError(f"unknown model {args.model!r}")
    sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


_SELFTEST_SUITES = (
    "test_quadrature.py",
    "test_specfun.py",
    "test_model.py",
    "test_engine.py",
    "test_gaussvar.py",
    "test_expfam.py",
    "test_montecarlo.py",
)


def cmd_selftest(args) -> int:
    _merge_config(args, {"tests_dir": None})
    if args.tests_dir is not None:
        tests = Path(args.tests_dir)
    else:
        tests = Path(__file__).resolve().parents[2] / "tests"
        if not tests.is_dir():
            tests = Path.cwd() / "tests"
    if not tests.is_dir():
        sys.stderr.write(
            f"selftest: no tests directory at {tests}; pass --tests-dir\n"
        )
        return EXIT_SELFTEST
    try:
        import pytest
    except ImportError:
        sys.stderr.write("selftest: pytest is required (pip install pytest)\n")
        return EXIT_SELFTEST
    failures = 0
    total_start = time.perf_counter()
    for suite in _SELFTEST_SUITES:
        path = tests / suite
        if not path.is_file():
            sys.stdout.write(f"suite {suite}: MISSING\n")
            failures += 1
            continue
        start = time.perf_counter()
        rc = pytest.main(["-q", "--no-header", "-p", "no:cacheprovider",
                          str(path)])
        elapsed = time.perf_counter() - start
        status = "pass" if rc == 0 else f"FAIL (pytest exit {rc})"
        sys.stdout.write(f"suite {suite}: {status} in {elapsed:.1f}s\n")
        failures += int(rc != 0)
    total = time.perf_counter() - total_start
    verdict = "PASS" if failures == 0 else f"FAIL ({failures} suites)"
    sys.stdout.write(f"selftest: {verdict} in {total:.1f}s\n")
    return EXIT_OK if failures == 0 else EXIT_SELFTEST


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="covbounds",
        description=(
            "Bayesian lower bounds on estimator MSE, estimators, and "
            "the RMSE-versus-N experiment for the Gaussian-variance model"
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(sp):
        sp.add_argument("--config", metavar="FILE",
                        help="key=value file mirroring the flags; flags win")

    sp = sub.add_parser("bounds", help="closed-form and quadrature bounds")
    sp.add_argument("--a", type=float)
    sp.add_argument("--N", dest="n", type=int)
    sp.add_argument("--which", choices=("bcrb", "tbcrb", "ecrb", "all"))
    sp.add_argument("--csv", action="store_true", default=None)
    sp.add_argument("--out", metavar="FILE")
    add_config(sp)
    sp.set_defaults(func=cmd_bounds)

    sp = sub.add_parser("estimate", help="evaluate one estimator at one t")
    sp.add_argument("--a", type=float)
    sp.add_argument("--N", dest="n", type=int)
    sp.add_argument("--t", type=float)
    sp.add_argument("--estimator", choices=("map", "ml", "mmse"))
    add_config(sp)
    sp.set_defaults(func=cmd_estimate)

    sp = sub.add_parser("fig1", help="RMSE-versus-N experiment to CSV")
    sp.add_argument("--a", type=float)
    sp.add_argument("--trials", type=int)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", metavar="FILE")
    sp.add_argument("--workers", type=int,
                    help=f"worker processes (or ${WORKERS_ENV}); "
                         "never changes output bytes")
    add_config(sp)
    sp.set_defaults(func=cmd_fig1)

    sp = sub.add_parser("check-efficiency",
                        help="equality condition and efficiency probes")
    sp.add_argument("--model", choices=("case-study", "gaussian-conjugate"))
    sp.add_argument("--a", type=float)
    sp.add_argument("--N", dest="n", type=int)
    sp.add_argument("--prior-var", dest="prior_var", type=float)
    sp.add_argument("--noise-var", dest="noise_var", type=float)
    sp.add_argument("--probes", type=float, nargs="+")
    add_config(sp)
    sp.set_defaults(func=cmd_check_efficiency)

    sp = sub.add_parser("selftest", help="run the package test suites")
    sp.add_argument("--tests-dir", dest="tests_dir", metavar="DIR")
    add_config(sp)
    sp.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UnsupportedRegime, DomainError, DegenerateFit,
            NotNaturalParameter) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_DOMAIN
    except (NonConvergent, NonFiniteIntegrand, SingularQ) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_NONCONVERGENT
    except OSError as exc:
        sys.stderr.write(f"i/o error: {exc}\n")
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
