"""Command-line front end: run scenarios, analyze records, Monte Carlo studies.

Subcommands
-----------
run        --scenario PATH --out PATH [--seed-override INT]
analyze    --record PATH --nmax N --out PATH
montecarlo --scenario PATH --runs N --checkpoints k1,k2,... --out PATH
           [--seed-override INT]

Exit codes: 0 success; 2 parse/validation failure; 3 numerical
degeneracy; 4 record shorter than the requested analysis window;
5 Monte Carlo scenario with parameter-change segments.

Output files are CSV with numeric fields rendered at 17 significant
digits, which round-trips float64 exactly.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys

import numpy as np

from . import analysis, sim
from .estimator import EstimatorConfig
from .forgetting import (
    Constant,
    Geometric,
    Harmonic,
    ResidualSaturation,
    Schedule,
    WindowedRms,
)
from .linalg import DegeneracyError, InvalidInputError

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_DEGENERATE = 3
EXIT_SHORT_RECORD = 4
EXIT_CHANGE_SEGMENTS = 5


class ScenarioFileError(ValueError):
    """Scenario file failed to parse or validate; message names the field."""


def _fmt(x: float) -> str:
    return f"{float(x):.17g}"


def _require_keys(obj: dict, path: str, required: set, optional: set = frozenset()):
    if not isinstance(obj, dict):
        raise ScenarioFileError(f"{path}: expected an object")
    unknown = set(obj) - required - optional
    if unknown:
        raise ScenarioFileError(f"{path}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ScenarioFileError(f"{path}: missing keys {sorted(missing)}")


_POLICY_PARAMS = {
    "constant": {"lambda"},
    "residual_saturation": {"eta", "gamma"},
    "windowed_rms": {"eta", "gamma", "tau"},
    "harmonic": set(),
    "geometric": {"gamma"},
    "schedule": {"values"},
}


def _parse_policy(obj: dict):
    _require_keys(obj, "policy", {"kind", "params"})
    kind = obj["kind"]
    if kind not in _POLICY_PARAMS:
        raise ScenarioFileError(
            f"policy.kind: unknown kind {kind!r}; expected one of {sorted(_POLICY_PARAMS)}"
        )
    params = obj["params"]
    _require_keys(params, "policy.params", _POLICY_PARAMS[kind])
    try:
        if kind == "constant":
            return Constant(lam=float(params["lambda"]))
        if kind == "residual_saturation":
            return ResidualSaturation(eta=float(params["eta"]), gamma=float(params["gamma"]))
        if kind == "windowed_rms":
            return WindowedRms(
                eta=float(params["eta"]),
                gamma=float(params["gamma"]),
                tau=int(params["tau"]),
            )
        if kind == "harmonic":
            return Harmonic()
        if kind == "geometric":
            return Geometric(gamma=float(params["gamma"]))
        return Schedule(values=tuple(float(v) for v in params["values"]))
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ScenarioFileError(f"policy.params: {exc}") from exc


def load_scenario(path: str) -> sim.Scenario:
    """Parse and validate a scenario file, rejecting unknown keys."""
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ScenarioFileError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ScenarioFileError(
            f"{path}: malformed JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}"
        ) from exc

    _require_keys(doc, "scenario", {"plant", "noise", "input", "horizon", "policy", "estimator"})
    _require_keys(doc["plant"], "plant", {"segments", "na", "nb"})
    _require_keys(doc["noise"], "noise", {"variance", "seed"})
    _require_keys(doc["input"], "input", {"seed"})
    _require_keys(doc["estimator"], "estimator", {"theta0"}, optional={"P0_diag", "P0_full"})

    est_obj = doc["estimator"]
    if ("P0_diag" in est_obj) == ("P0_full" in est_obj):
        raise ScenarioFileError("estimator: provide exactly one of P0_diag or P0_full")

    try:
        plant = sim.PlantSpec(
            segments=tuple((int(s), list(map(float, t))) for s, t in doc["plant"]["segments"]),
            na=int(doc["plant"]["na"]),
            nb=int(doc["plant"]["nb"]),
        )
        noise = sim.NoiseModel(
            variance=float(doc["noise"]["variance"]), seed=int(doc["noise"]["seed"])
        )
        policy = _parse_policy(doc["policy"])
        theta0 = np.asarray(est_obj["theta0"], dtype=float)
        if "P0_diag" in est_obj:
            P0 = np.diag(np.asarray(est_obj["P0_diag"], dtype=float))
        else:
            P0 = np.asarray(est_obj["P0_full"], dtype=float)
        config = EstimatorConfig(theta0=theta0, P0=P0, n=theta0.shape[0], p=1)
        return sim.Scenario(
            plant=plant,
            noise=noise,
            input_seed=int(doc["input"]["seed"]),
            horizon=int(doc["horizon"]),
            policy=policy,
            estimator_config=config,
        )
    except ScenarioFileError:
        raise
    except (InvalidInputError, TypeError, ValueError) as exc:
        raise ScenarioFileError(f"{path}: {exc}") from exc


def write_trace_csv(trace: sim.Trace, path: str) -> None:
    n = trace.theta_est.shape[1]
    header = (
        ["k"]
        + [f"theta_{i + 1}" for i in range(n)]
        + ["beta", "rho", "residual_norm", "error_norm", "y", "u"]
    )
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for k in range(len(trace)):
            row = (
                [str(int(trace.k[k]))]
                + [_fmt(v) for v in trace.theta_est[k]]
                + [
                    _fmt(trace.beta[k]),
                    _fmt(trace.rho[k]),
                    _fmt(trace.residual_norm[k]),
                    _fmt(trace.error_norm[k]),
                    _fmt(trace.y[k]),
                    _fmt(trace.u[k]),
                ]
            )
            w.writerow(row)


def read_record(path: str):
    """Read an analysis record: regressors phi_k and rates beta_k.

    Two accepted layouts:
      * a trace CSV written by the run subcommand (theta_*/y/u columns);
        regressors are reconstructed from the y and u columns with
        na = nb = n/2 and zero pre-history;
      * a plain record with columns phi_1..phi_n and an optional beta
        column (beta defaults to 1).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file")
        rows = [row for row in reader if row]
    cols = {name: i for i, name in enumerate(header)}

    if "y" in cols and "u" in cols:
        n = sum(1 for name in header if name.startswith("theta_"))
        if n == 0 or n % 2 != 0:
            raise InvalidInputError(
                f"{path}: cannot reconstruct regressors from a trace with {n} parameters"
            )
        na = nb = n // 2
        ys = np.array([float(r[cols["y"]]) for r in rows])
        us = np.array([float(r[cols["u"]]) for r in rows])
        betas = np.array([float(r[cols["beta"]]) for r in rows])
        T = len(rows)
        phis = np.zeros((T, n))
        for k in range(T):
            for i in range(na):
                phis[k, i] = ys[k - 1 - i] if k - 1 - i >= 0 else 0.0
            for i in range(nb):
                phis[k, na + i] = us[k - 1 - i] if k - 1 - i >= 0 else 0.0
        return phis, betas

    phi_cols = [name for name in header if name.startswith("phi_")]
    if not phi_cols:
        raise InvalidInputError(
            f"{path}: expected either a trace CSV or phi_1..phi_n columns"
        )
    phi_idx = [cols[f"phi_{i + 1}"] for i in range(len(phi_cols))]
    phis = np.array([[float(r[i]) for i in phi_idx] for r in rows])
    if "beta" in cols:
        betas = np.array([float(r[cols["beta"]]) for r in rows])
    else:
        betas = np.ones(len(rows))
    return phis, betas


def cmd_run(scenario_path: str, output_path: str, seed_override: int | None = None) -> int:
    try:
        scenario = load_scenario(scenario_path)
    except ScenarioFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if seed_override is not None:
        scenario = sim.Scenario(
            plant=scenario.plant,
            noise=sim.NoiseModel(scenario.noise.variance, seed_override),
            input_seed=seed_override + 1,
            horizon=scenario.horizon,
            policy=scenario.policy,
            estimator_config=scenario.estimator_config,
        )
    try:
        trace = sim.run_scenario(scenario)
    except DegeneracyError as exc:
        print(f"error: numerical degeneracy: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    write_trace_csv(trace, output_path)
    summary = f"final error_norm = {trace.error_norm[-1]:.6g}"
    changes = scenario.plant.change_steps
    if changes:
        rk = sim.reconvergence_step(trace, changes[0])
        if rk is None:
            summary += "; no reconvergence (error_norm < 0.05 sustained 5 steps) observed"
        else:
            summary += f"; reconverged {rk - changes[0]} steps after the change at k = {changes[0]}"
    print(summary)
    return EXIT_OK


def cmd_analyze(record_path: str, n_max: int, output_path: str) -> int:
    try:
        phis, betas = read_record(record_path)
    except (InvalidInputError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if len(phis) < n_max + 2:
        print(
            f"error: record of length {len(phis)} is shorter than N_max + 2 = {n_max + 2}",
            file=sys.stderr,
        )
        return EXIT_SHORT_RECORD

    profile = analysis.persistency_profile(list(phis), n_max)
    rhos = list(np.cumprod(betas))
    with open(output_path, "w", newline="") as fh:
        w = csv.writer(fh)
        if profile is None:
            w.writerow(["persistent", "N", "alpha", "beta_ub"])
            w.writerow(["false", "", "", ""])
            print(f"not persistent up to N_max = {n_max}")
            return EXIT_OK
        w.writerow(["persistent", "N", "alpha", "beta_ub"])
        w.writerow(["true", str(profile.N), _fmt(profile.alpha), _fmt(profile.beta_ub)])
        N = profile.N
        j_max = (len(rhos) - N - 1) // (N + 1)
        seq = analysis.consistency_sequences(rhos, N, j_max)
        upper, lower = analysis.consistency_ratios(seq)
        w.writerow([])
        w.writerow(["j", "s_l", "s_u", "q_l", "q_u", "ratio_upper", "ratio_lower"])
        for j in range(j_max + 1):
            w.writerow(
                [
                    str(j),
                    _fmt(seq.s_l[j]),
                    _fmt(seq.s_u[j]),
                    _fmt(seq.q_l[j]),
                    _fmt(seq.q_u[j]),
                    "" if j == 0 else _fmt(upper[j]),
                    _fmt(lower[j]),
                ]
            )

    # Trend diagnostic: is the sufficient-condition ratio still decreasing
    # toward 0 over the final quartile of the record?
    tail = [u for u in upper[1:] if np.isfinite(u)]
    q = max(2, len(tail) // 4)
    final_q = tail[-q:]
    decreasing = all(a >= b for a, b in zip(final_q, final_q[1:])) and final_q[-1] < final_q[0]
    print(
        "persistent: N = {}, alpha = {:.6g}, beta_ub = {:.6g}".format(
            profile.N, profile.alpha, profile.beta_ub
        )
    )
    if decreasing:
        print("sufficient consistency condition trend holds: upper ratio decreasing toward 0")
    else:
        print("sufficient consistency condition trend does NOT hold on this record")
    return EXIT_OK


def cmd_montecarlo(
    scenario_path: str,
    runs: int,
    checkpoints,
    output_path: str,
    seed_override: int | None = None,
) -> int:
    try:
        scenario = load_scenario(scenario_path)
    except ScenarioFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    if scenario.plant.change_steps:
        print(
            "error: Monte Carlo study requires a constant-parameter plant "
            "(scenario has change segments)",
            file=sys.stderr,
        )
        return EXIT_CHANGE_SEGMENTS
    if not scenario.noise.variance > 0:
        print("error: Monte Carlo study requires positive noise variance", file=sys.stderr)
        return EXIT_PARSE
    try:
        result = sim.monte_carlo_variance(
            scenario,
            runs,
            checkpoints,
            master_seed=0 if seed_override is None else seed_override,
        )
    except InvalidInputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE

    # Analytic covariance bracketing evaluated on replicate 0's record.
    bounds = {}
    profile = analysis.persistency_profile(list(result.reference_phis), N_max=8)
    if profile is not None and result.rhos:
        N = profile.N
        j_max = (len(result.rhos) - N - 1) // (N + 1)
        seq = analysis.consistency_sequences(result.rhos, N, j_max)
        v = scenario.noise.variance
        for c in result.checkpoints:
            try:
                bounds[c] = analysis.variance_bounds(profile, v, v, seq, c)
            except InvalidInputError:
                pass

    with open(output_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["checkpoint", "lam_min", "lam_max", "se_min", "se_max", "bound_lower", "bound_upper"]
        )
        for ci, c in enumerate(result.checkpoints):
            b = bounds.get(c)
            w.writerow(
                [
                    str(c),
                    _fmt(result.lam_min[ci]),
                    _fmt(result.lam_max[ci]),
                    _fmt(result.se_min[ci]),
                    _fmt(result.se_max[ci]),
                    _fmt(b.lower) if b else "",
                    _fmt(b.upper) if b else "",
                ]
            )
    for ci, c in enumerate(result.checkpoints):
        print(
            f"checkpoint {c}: lam_min = {result.lam_min[ci]:.6g}, "
            f"lam_max = {result.lam_max[ci]:.6g}"
        )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vrfrls",
        description="Variable-rate-forgetting RLS scenario runner and analyzer",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="simulate a scenario and write a trace CSV")
    p_run.add_argument("--scenario", required=True, help="scenario JSON path")
    p_run.add_argument("--out", required=True, help="output trace CSV path")
    p_run.add_argument("--seed-override", type=int, default=None)

    p_an = sub.add_parser("analyze", help="persistency/consistency analysis of a record")
    p_an.add_argument("--record", required=True, help="trace CSV or phi/beta record CSV")
    p_an.add_argument("--nmax", type=int, required=True, help="largest window length to try")
    p_an.add_argument("--out", required=True, help="output CSV path")

    p_mc = sub.add_parser("montecarlo", help="sampling-covariance study across seeds")
    p_mc.add_argument("--scenario", required=True)
    p_mc.add_argument("--runs", type=int, required=True)
    p_mc.add_argument(
        "--checkpoints", required=True, help="comma-separated step checkpoints"
    )
    p_mc.add_argument("--out", required=True)
    p_mc.add_argument("--seed-override", type=int, default=None)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args.scenario, args.out, args.seed_override)
    if args.command == "analyze":
        return cmd_analyze(args.record, args.nmax, args.out)
    try:
        checkpoints = [int(c) for c in args.checkpoints.split(",") if c]
    except ValueError:
        print(f"error: bad --checkpoints value {args.checkpoints!r}", file=sys.stderr)
        return EXIT_PARSE
    return cmd_montecarlo(args.scenario, args.runs, checkpoints, args.out, args.seed_override)


if __name__ == "__main__":
    sys.exit(main())
