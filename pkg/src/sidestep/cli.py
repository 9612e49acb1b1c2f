"""Config-driven batch driver.

Subcommands: run, analyze, certify, report.  A JSON experiment config with
schema field "sidestep-config/1" selects the model, dimension grid, sample
counts, and pipeline parameters; unknown fields are rejected.  Outputs are
plot-ready CSV files plus short text summaries; identical config and seed
produce byte-identical files.

Exit codes: 0 success, 2 config error, 3 numeric failure, 4 missing input,
5 certificate failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import (
    ConfigError,
    IllConditionedError,
    MissingInputError,
    PreconditionError,
    SidestepError,
)
from .estimation import (
    DETECT_K_MIN,
    TraceTable,
    detect_bases,
    estimate_C_ell,
    fit_expansion,
    mc_expected_trace,
)
from .models import (
    LiftConfig,
    LiftModel,
    Plant,
    PlantedConfig,
    PlantedModel,
    sample_seed,
    trace_horizon,
)
from .polyexp import Polyexponential
from .shiftops import annihilator
from .theorem import (
    certify_markov,
    certify_real_trace_bound,
    exceptional_params,
    verify_exceptional_bound,
)

SCHEMA = "sidestep-config/1"

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_MISSING = 4
EXIT_CERTIFICATE = 5


def _require(cond: bool, field: str, message: str) -> None:
    if not cond:
        raise ConfigError(message, field)


def _check_keys(obj: dict, allowed: set[str], path: str) -> None:
    for key in obj:
        if key not in allowed:
            raise ConfigError(f"unknown field {key!r}", path)


def _plants(raw, path: str) -> tuple[Plant, ...]:
    out = []
    for i, p in enumerate(raw):
        here = f"{path}[{i}]"
        _require(isinstance(p, dict), here, "plant must be an object")
        _check_keys(p, {"ell", "amplitude", "level"}, here)
        for key in ("ell", "amplitude", "level"):
            _require(key in p, f"{here}.{key}", "required field missing")
        out.append(Plant(float(p["ell"]), float(p["amplitude"]), int(p["level"])))
    return tuple(out)


class Experiment:
    """Validated experiment configuration."""

    def __init__(self, raw: dict):
        _require(isinstance(raw, dict), "", "config must be a JSON object")
        _check_keys(
            raw,
            {
                "schema",
                "seed",
                "model",
                "n_grid",
                "m",
                "k_max",
                "fit",
                "detect",
                "estimate",
                "certify",
                "out_dir",
            },
            "",
        )
        _require(raw.get("schema") == SCHEMA, "schema", f"must be {SCHEMA!r}")
        _require("seed" in raw, "seed", "required field missing")
        _require("model" in raw, "model", "required field missing")
        _require("n_grid" in raw, "n_grid", "required field missing")
        _require("m" in raw, "m", "required field missing")
        self.seed = int(raw["seed"])
        grid = raw["n_grid"]
        _require(
            isinstance(grid, list) and len(grid) >= 1,
            "n_grid",
            "must be a nonempty list",
        )
        self.n_grid = tuple(int(n) for n in grid)
        _require(
            all(b > a for a, b in zip(self.n_grid, self.n_grid[1:])),
            "n_grid",
            "must be strictly increasing",
        )
        self.m = int(raw["m"])
        _require(self.m >= 2, "m", "must be >= 2")

        model = raw["model"]
        _require(isinstance(model, dict), "model", "must be an object")
        kind = model.get("kind")
        _require(kind in ("planted", "lift"), "model.kind", "must be planted or lift")
        try:
            if kind == "planted":
                _check_keys(
                    model,
                    {"kind", "lambda0", "lambda1", "fixed_part", "plants"},
                    "model",
                )
                for key in ("lambda0", "lambda1"):
                    _require(key in model, f"model.{key}", "required field missing")
                cfg = PlantedConfig(
                    float(model["lambda0"]),
                    float(model["lambda1"]),
                    self.n_grid,
                    tuple(float(x) for x in model.get("fixed_part", [])),
                    _plants(model.get("plants", []), "model.plants"),
                )
                self.model = PlantedModel(cfg)
            else:
                _check_keys(
                    model,
                    {"kind", "base_adjacency", "hashimoto", "lambda0", "lambda1"},
                    "model",
                )
                _require(
                    "base_adjacency" in model,
                    "model.base_adjacency",
                    "required field missing",
                )
                cfg = LiftConfig(
                    np.array(model["base_adjacency"], dtype=int),
                    self.n_grid,
                    bool(model.get("hashimoto", True)),
                    float(model.get("lambda0", 0.0)),
                    float(model.get("lambda1", 0.0)),
                )
                self.model = LiftModel(cfg)
        except ConfigError:
            raise
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc), "model") from exc

        horizon = trace_horizon(self.n_grid[0])
        self.k_max = int(raw.get("k_max", min(20, horizon)))
        _require(
            1 <= self.k_max <= horizon,
            "k_max",
            f"must lie in 1..K(min n)={horizon}",
        )

        fit = raw.get("fit", {})
        _check_keys(fit, {"r"}, "fit")
        self.fit_r = int(fit.get("r", 2))
        _require(self.fit_r >= 1, "fit.r", "must be >= 1")
        if "fit" in raw:
            _require(
                len(self.n_grid) >= self.fit_r + 1,
                "fit.r",
                "needs at least r+1 grid points",
            )

        detect = raw.get("detect", {})
        _check_keys(detect, {"max_bases"}, "detect")
        self.max_bases = int(detect.get("max_bases", 4))
        _require(self.max_bases >= 1, "detect.max_bases", "must be >= 1")
        if "detect" in raw:
            window = self.k_max - DETECT_K_MIN + 1
            _require(
                window >= 2 * self.max_bases + 2,
                "detect.max_bases",
                f"detection window {window} < 2*max_bases+2",
            )

        est = raw.get("estimate", {})
        _check_keys(est, {"theta"}, "estimate")
        self.theta = float(est.get("theta", 0.3))
        _require(self.theta > 0, "estimate.theta", "must be positive")

        cert = raw.get("certify", None)
        self.certify = None
        if cert is not None:
            _check_keys(cert, {"D", "L", "epsilon", "alpha", "theta"}, "certify")
            d = int(cert.get("D", 2))
            _require(d >= 0 and d % 2 == 0, "certify.D", "must be even and >= 0")
            eps = float(cert.get("epsilon", 0.5))
            _require(eps > 0, "certify.epsilon", "must be positive")
            alpha = float(cert.get("alpha", 1.0))
            _require(alpha > 0, "certify.alpha", "must be positive")
            self.certify = {
                "D": d,
                "L": tuple(float(x) for x in cert.get("L", [])),
                "epsilon": eps,
                "alpha": alpha,
                "theta": float(cert["theta"]) if "theta" in cert else None,
            }

        self.out_dir = raw.get("out_dir", "out")


def load_experiment(path: str | Path) -> Experiment:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", str(path)) from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", str(path)) from exc
    return Experiment(raw)


def _fmt(value) -> str:
    """Shortest round-trip decimal form for reproducible CSV output."""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    lines = [",".join(header)]
    lines += [",".join(_fmt(v) for v in row) for row in rows]
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def _trace_path(out: Path, n: int) -> Path:
    return out / f"trace_n{n}.csv"


def cmd_run(exp: Experiment, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    summary_rows = []
    for n in exp.n_grid:
        table = mc_expected_trace(exp.model, n, exp.k_max, exp.m, exp.seed)
        _write_csv(
            _trace_path(out, n),
            ["n", "k", "mean", "stderr"],
            [
                (n, int(k), m, s)
                for k, m, s in zip(table.ks, table.means, table.stderrs)
            ],
        )
        # cross-k covariance of the means, needed for detection significance
        cov_rows = [
            (int(table.ks[i]), int(table.ks[j]), table.covariance[i, j])
            for i in range(len(table.ks))
            for j in range(i, len(table.ks))
        ]
        _write_csv(out / f"trace_cov_n{n}.csv", ["k_row", "k_col", "cov"], cov_rows)
        dim = exp.model.sample(n, sample_seed(exp.seed, n, 0)).n
        summary_rows.append((n, exp.m, exp.k_max, dim))
        if exp.model.kind == "lift":
            rows = []
            for i in range(exp.m):
                s = exp.model.sample(n, sample_seed(exp.seed, n, i))
                rows += [
                    (i, z.real, z.imag) for z in np.asarray(s.eigenvalues)
                ]
            _write_csv(out / f"spectra_n{n}.csv", ["sample_id", "re", "im"], rows)
    _write_csv(
        out / "run_summary.csv",
        ["n", "m", "k_max", "spectrum_size"],
        summary_rows,
    )
    print(f"run: wrote trace tables for {len(exp.n_grid)} dimensions to {out}")
    return EXIT_OK


def _load_tables(exp: Experiment, out: Path) -> list[TraceTable]:
    tables = []
    for n in exp.n_grid:
        path = _trace_path(out, n)
        if not path.exists():
            raise MissingInputError(f"missing run output {path}; run 'run' first")
        ks, means, ses = [], [], []
        with open(path, "r", encoding="utf-8") as fh:
            next(fh)
            for line in fh:
                _, k, mean, se = line.strip().split(",")
                ks.append(int(k))
                means.append(float(mean))
                ses.append(float(se))
        cov = None
        cov_path = out / f"trace_cov_n{n}.csv"
        if cov_path.exists():
            cov = np.zeros((len(ks), len(ks)))
            with open(cov_path, "r", encoding="utf-8") as fh:
                next(fh)
                for line in fh:
                    ki, kj, value = line.strip().split(",")
                    i = int(ki) - ks[0]
                    j = int(kj) - ks[0]
                    cov[i, j] = float(value)
                    cov[j, i] = float(value)
        tables.append(
            TraceTable(n, np.array(ks), np.array(means), np.array(ses), exp.m, cov)
        )
    return tables


def cmd_analyze(exp: Experiment, out: Path) -> int:
    tables = _load_tables(exp, out)
    est = fit_expansion(tables, exp.fit_r)
    _write_csv(
        out / "expansion.csv",
        ["k"] + [f"c{i}" for i in range(est.r)] + ["residual"],
        [
            (int(k), *est.coeffs[row], est.residuals[row])
            for row, k in enumerate(est.ks)
        ],
    )
    lam0, lam1 = exp.model.lambda0, exp.model.lambda1
    est_d = est.restrict(DETECT_K_MIN)
    levels = [
        detect_bases(
            est_d.level(i),
            est_d.ks,
            lam0,
            lam1,
            exp.max_bases,
            level=i,
            noise_cov=est_d.level_covariance(i),
        )
        for i in range(est.r)
    ]
    j = next((i for i, found in enumerate(levels) if found), None)
    base_rows = [
        (d.level, d.ell, d.amplitude, d.residual) for found in levels for d in found
    ]
    _write_csv(out / "bases.csv", ["level", "ell", "amplitude", "residual"], base_rows)

    lines = []
    c_rows = []
    if j is None:
        lines.append(
            f"no larger bases up to level r-1; O(n^-j) regime holds for j <= {est.r - 1}"
        )
    else:
        for det in levels[j]:
            ce = estimate_C_ell(
                exp.model, det.ell, j, exp.theta, exp.n_grid, exp.m, exp.seed
            )
            for n, val in ce.per_n:
                c_rows.append((det.ell, n, val))
            c_rows.append((det.ell, 0, ce.extrapolated))
            lines.append(f"j={j}, ℓ≈{det.ell:.2f}, C≈{ce.extrapolated:.1f}")
    _write_csv(out / "c_ell.csv", ["ell", "n", "scaled_count"], c_rows)
    # detected polyexponential parts, one record list per level
    polyexp_records = {
        f"level_{i}": Polyexponential.from_terms(
            {d.ell: [d.amplitude] for d in found}
        ).to_records()
        for i, found in enumerate(levels)
        if found
    }
    (out / "detected_polyexp.json").write_text(
        json.dumps(polyexp_records, indent=1, sort_keys=True) + "\n",
        encoding="utf-8",
        newline="\n",
    )
    text = "\n".join(lines) + "\n"
    (out / "analysis.txt").write_text(text, encoding="utf-8", newline="\n")
    print(text, end="")
    return EXIT_OK


def cmd_certify(exp: Experiment, out: Path) -> int:
    if exp.certify is None:
        raise ConfigError("certify section required for the certify command", "certify")
    tables = _load_tables(exp, out)
    cert_cfg = exp.certify
    lam0 = exp.model.lambda0
    d = cert_cfg["D"]
    bases = cert_cfg["L"]
    eps = cert_cfg["epsilon"]
    alpha = cert_cfg["alpha"]
    params = exceptional_params(lam0, exp.model.lambda1, eps, alpha)
    theta = cert_cfg["theta"]
    if theta is None:
        theta = params.theta0_for(max(2, d), max(1, len(bases)))

    rows = []
    failures = []

    # Markov-type filter certificates, one per dimension.
    for n, table in zip(exp.n_grid, tables):
        k_target = params.even_k_near(n)
        k_cap = exp.k_max - d * max(1, len(bases))
        k = max(2, min(k_target, k_cap - (k_cap % 2)))
        count = min(exp.m, 200)
        weight = 1.0 / count
        samples = [
            dataclasses.replace(
                exp.model.sample(n, sample_seed(exp.seed, n, i)), weight=weight
            )
            for i in range(count)
        ]
        cert = certify_markov(samples, d, bases, theta, eps, k, n, lam0)
        rows.append(
            ("markov", n, k, cert.lhs, cert.rhs, cert.slack, cert.passed)
        )
        if not cert.passed:
            failures.append(("markov", n, cert.slack))

    # Exceptional-eigenvalue decay across the grid.
    report = verify_exceptional_bound(
        exp.model, params, bases, theta, exp.n_grid, exp.m, exp.seed
    )
    for row in report.rows:
        rows.append(
            (
                "exceptional",
                row["n"],
                0,
                row["eout"],
                row["threshold"],
                row["margin"],
                row["ok"],
            )
        )
    if not report.passed:
        worst = report.worst_row()
        failures.append(("exceptional", worst["n"], worst["margin"]))

    # Growth envelope for the annihilated trace sequences.
    est = fit_expansion(tables, exp.fit_r)
    envelope = certify_real_trace_bound(
        exp.model, tables, bases, d, exp.fit_r, est
    )
    for row in envelope.rows:
        rows.append(
            (
                "real-trace",
                row["n"],
                row["k"],
                row["value"],
                row["envelope"] + row["floor"],
                row["slack"],
                row["slack"] >= -1e-9 * row["scale"],
            )
        )
    if not envelope.passed:
        failures.append(
            ("real-trace", envelope.worst["n"], envelope.worst["slack"])
        )

    _write_csv(
        out / "certificates.csv",
        ["kind", "n", "k", "lhs", "rhs", "slack", "passed"],
        rows,
    )
    lines = [f"certificates: {len(rows)} checks, {len(failures)} failing groups"]
    if d >= 1 and bases:
        ann = annihilator(d, bases)
        lines.append(
            "annihilator coefficients: "
            + "["
            + ", ".join(_fmt(c.real) for c in ann.coeffs)
            + "]"
        )
    if report.flagged:
        lines.append(
            "flagged eigenvalue locations outside region: "
            + ", ".join(str(x) for x in report.flagged[:5])
        )
    if failures:
        worst = min(failures, key=lambda f: f[2])
        lines.append(
            f"FAIL: worst slack {worst[2]:.6g} ({worst[0]} at n={worst[1]})"
        )
    else:
        lines.append("PASS: all certificates hold")
    text = "\n".join(lines) + "\n"
    (out / "certify.txt").write_text(text, encoding="utf-8", newline="\n")
    print(text, end="")
    return EXIT_CERTIFICATE if failures else EXIT_OK


def cmd_report(exp: Experiment, out: Path) -> int:
    pieces = []
    for name in ("run_summary.csv", "analysis.txt", "certify.txt"):
        path = out / name
        if path.exists():
            pieces.append(f"== {name} ==\n{path.read_text(encoding='utf-8')}")
    if not pieces:
        raise MissingInputError(f"no outputs found in {out}")
    text = "\n".join(pieces)
    (out / "report.txt").write_text(text, encoding="utf-8", newline="\n")
    print(text, end="")
    return EXIT_OK


def _threads_from(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("SIDESTEP_THREADS")
    return int(env) if env else 1


def main(argv: Sequence[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="sidestep",
        description="Run, analyze, and certify random-spectrum trace experiments.",
    )
    parser.add_argument("command", choices=["run", "analyze", "certify", "report"])
    parser.add_argument("--config", required=True, help="experiment config path")
    parser.add_argument("--seed", type=int, default=None, help="override config seed")
    parser.add_argument("--out", default=None, help="override output directory")
    parser.add_argument(
        "--threads",
        type=int,
        default=None,
        help="worker threads (reserved; execution is currently serial)",
    )
    args = parser.parse_args(argv)

    try:
        exp = load_experiment(args.config)
        if args.seed is not None:
            exp.seed = args.seed
        threads = _threads_from(args)
        if threads < 1:
            raise ConfigError("threads must be >= 1", "--threads")
        out = Path(args.out) if args.out else Path(exp.out_dir)
        handler = {
            "run": cmd_run,
            "analyze": cmd_analyze,
            "certify": cmd_certify,
            "report": cmd_report,
        }[args.command]
        return handler(exp, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except PreconditionError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except MissingInputError as exc:
        print(f"missing input: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except (IllConditionedError, SidestepError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except Exception as exc:  # contract allows no exit codes beyond 0/2/3/4/5
        print(f"numeric failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
