"""Command-line experiment runner.

Every subcommand writes a JSON summary (with the relevant bound and a verdict)
and per-sample CSV rows. Exit status is 0 when every bound holds, 1 when one
is violated beyond its statistical slack and 2 on usage errors.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import report
from .attacks import AttackSpecError, adversary_from_spec
from .metrology import (
    SOURCE_KINDS,
    EstimationConfig,
    measure_bias,
    perturbed_source,
    phase_encoding,
    prepare_ghz,
    run_estimation,
)
from .protocols import (
    CODES,
    DEFAULT_KEY_SAMPLES,
    EXHAUSTIVE_PRIVACY_QUBITS,
    EXHAUSTIVE_SOUNDNESS_QUBITS,
    end_to_end_secure_estimation,
    privacy_eve_view,
    soundness_lhs,
    theorem3_resources,
)
from .states import DensityMatrix, random_density_matrix, random_pure_state
from .twirl import KINDS, distinct_pairs, twirl_residuals

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2
TWIRL_TOL = 1e-8
PRIVACY_EXACT_TOL = 1e-9
PRIVACY_MC_TOL = 0.02


class UsageError(ValueError):
    pass


def _sampling(value: str) -> str | int:
    if value in ("exhaustive", "auto"):
        return value
    try:
        n = int(value)
    except ValueError:
        raise argparse.ArgumentTypeError("expected 'exhaustive', 'auto' or a sample count") from None
    if n < 2:
        raise argparse.ArgumentTypeError("sample count must be at least 2")
    return n


def _probability(value: str) -> float:
    v = float(value)
    if not 0 <= v <= 1:
        raise argparse.ArgumentTypeError("expected a probability in [0, 1]")
    return v


# -- handlers ---------------------------------------------------------------

def cmd_privacy(args, rng):
    rows, results = [], []
    for m in args.m:
        sampling = args.sampling
        if sampling == "auto":
            sampling = "exhaustive" if m <= EXHAUSTIVE_PRIVACY_QUBITS[args.code] else DEFAULT_KEY_SAMPLES
        state = random_pure_state(m, rng) if args.input == "random" else DensityMatrix.basis("0" * m)
        _, dist = privacy_eve_view(args.code, state, sampling, rng=rng)
        tol = args.tolerance
        if tol is None:
            tol = PRIVACY_EXACT_TOL if sampling == "exhaustive" else PRIVACY_MC_TOL
        res = {
            "code": args.code,
            "m": m,
            "sampling": str(sampling),
            "privacy_distance": dist,
            "tolerance": tol,
            "verdict": "pass" if dist <= tol else "fail",
        }
        results.append(res)
        rows.append(dict(res))
    return rows, results


def _probe(kind: str, n: int, rng) -> DensityMatrix:
    if kind == "ghz":
        return prepare_ghz(n)
    if kind == "plus":
        v = np.ones(1 << n) / math.sqrt(1 << n)
        return DensityMatrix.from_vector(v)
    return random_pure_state(n, rng)


def cmd_soundness(args, rng):
    rows, results = [], []
    probe = _probe(args.probe, args.n, rng)
    enc = phase_encoding(args.n, args.theta)
    for t in args.t:
        m = args.n + t
        for spec in args.adversary:
            adv = adversary_from_spec(spec, m)
            sampling = args.key_sampling
            if sampling == "auto":
                sampling = "exhaustive" if m <= EXHAUSTIVE_SOUNDNESS_QUBITS[args.code] else DEFAULT_KEY_SAMPLES
            res = soundness_lhs(args.code, args.n, t, probe, enc, adv, sampling, rng=rng)
            results.append(
                {
                    "code": args.code,
                    "n": args.n,
                    "t": t,
                    "adversary": spec,
                    "key_sampling": str(sampling),
                    "soundness_lhs": res.value,
                    "standard_error": res.standard_error,
                    "literal_value": res.literal_value,
                    "acceptance": res.acceptance,
                    "delta_bound": res.bound,
                    "verdict": "pass" if res.within_bound else "fail",
                }
            )
            for i, v in enumerate(res.per_sample):
                rows.append({"t": t, "adversary": spec, "sample": i, "value": float(v)})
    return rows, results


def cmd_bias(args, rng):
    window = tuple(args.window) if args.window else (0.0, math.pi / args.n)
    cfg = EstimationConfig(
        n=args.n, nu=args.nu, theta_true=args.theta, window=window, repetitions=args.reps,
        allow_small_nu=args.allow_small_nu,
    )
    ideal = cfg.ideal_state()
    rows, results = [], []
    for source in args.source:
        for eps in args.eps:
            seed = int(rng.integers(2**63))
            src = perturbed_source(source, ideal, cfg.observable, eps, cfg.nu)
            b = measure_bias(src, cfg, seed, eps)
            results.append(
                {
                    "source": source,
                    "eps": eps,
                    "beta": b.beta,
                    "beta_se": b.beta_se,
                    "beta_bound": b.beta_bound,
                    "gamma": b.gamma,
                    "gamma_se": b.gamma_se,
                    "gamma_bound": b.gamma_bound,
                    "verdict": "pass" if b.within_bounds else "fail",
                }
            )
            for r in range(cfg.repetitions):
                rows.append(
                    {
                        "source": source,
                        "eps": eps,
                        "repetition": r,
                        "theta_hat_ideal": b.ideal.estimates[r],
                        "theta_hat_perturbed": b.perturbed.estimates[r],
                    }
                )
    return rows, results


def cmd_ghz(args, rng):
    rows, results = [], []
    for n in args.n:
        window = (0.0, math.pi / n)
        cfg = EstimationConfig(
            n=n, nu=args.nu, theta_true=args.theta, window=window, repetitions=args.reps,
            allow_small_nu=args.allow_small_nu,
        )
        res = run_estimation(DensityMatrix(cfg.ideal_state(), validate=False), cfg, rng)
        formula = 1.0 / (args.nu * n * n)
        rel = abs(res.empirical_mse / formula - 1)
        results.append(
            {
                "n": n,
                "nu": args.nu,
                "theta": args.theta,
                "repetitions": args.reps,
                "empirical_mse": res.empirical_mse,
                "mse_standard_error": res.mse_standard_error,
                "mean_estimate": res.mean_estimate,
                "formula_mse": formula,
                "relative_error": rel,
                "tolerance": args.tolerance,
                "verdict": "pass" if rel <= args.tolerance else "fail",
            }
        )
        for r in range(args.reps):
            rows.append({"n": n, "repetition": r, "theta_hat": res.estimates[r], "mean_outcome": res.mean_outcomes[r]})
    return rows, results


def cmd_secure_estimate(args, rng):
    t_trap, t_cliff = theorem3_resources(args.n, args.nu, args.alpha)
    t = args.t if args.t is not None else (t_trap if args.code == "trap" else t_cliff)
    adv = adversary_from_spec(args.adversary, args.n + t)
    rep = end_to_end_secure_estimation(
        args.code, args.n, t, args.nu, args.theta, adv, rng, alpha=args.alpha, repetitions=args.reps
    )
    verdict = rep.within_bounds
    result = {
        "code": args.code,
        "n": args.n,
        "t": t,
        "nu": args.nu,
        "alpha": args.alpha,
        "adversary": args.adversary,
        "p_acc": rep.acceptance_rate,
        "delta": rep.delta,
        "beta": rep.beta,
        "beta_se": rep.beta_se,
        "beta_bound": rep.beta_bound,
        "gamma": rep.gamma,
        "gamma_se": rep.gamma_se,
        "gamma_bound": rep.gamma_bound,
        "bounds_apply": rep.bounds_apply,
        "verdict": "not-applicable" if verdict is None else ("pass" if verdict else "fail"),
    }
    rows = [
        {
            "repetition": r,
            "accepted": int(rep.accepted_counts[r]),
            "theta_hat": rep.estimation.estimates[r],
            "theta_hat_ideal": rep.ideal.estimates[r],
        }
        for r in range(args.reps)
    ]
    return rows, [result]


def cmd_huang(args, rng):
    from .huang import HuangConfig, eve_monte_carlo, eve_precision, run_huang

    eve = "absent" if args.eve == "absent" else "undetectable_attack"
    rows, results = [], []
    for n in args.n:
        for p_c in args.p_c:
            cfg = HuangConfig(n, args.p_a, p_c, args.theta, args.rounds)
            run = run_huang(cfg, eve, transcripts=True, rng=rng, correction=args.correction)
            res = {"n": n, "p_a": args.p_a, "p_c": p_c, "theta": args.theta, "rounds": args.rounds,
                   "eve": eve, "correction": args.correction, "detections": run.detection_count}
            ok = run.detection_count == 0
            if eve == "undetectable_attack" and p_c > 0 and args.reps >= 2:
                est = eve_monte_carlo(cfg, args.reps, rng)
                mse = float(np.mean((est - args.theta) ** 2))
                formula = eve_precision(cfg)
                rel = abs(mse / formula - 1)
                res.update(eve_mse=mse, eve_formula_mse=formula, relative_error=rel, tolerance=args.tolerance)
                ok = ok and rel <= args.tolerance
            res["verdict"] = "pass" if ok else "fail"
            results.append(res)
            for i, tr in enumerate(run.transcripts):
                rows.append({"n": n, "p_c": p_c, "round": i, **vars(tr)})
    return rows, results


def cmd_twirl(args, rng):
    rows, results = [], []
    for kind in args.kind:
        for m in args.m:
            states = [random_density_matrix(m, rng) for _ in range(args.states)]
            res = twirl_residuals(kind, m, states)
            worst = float(res.max()) if res.size else 0.0
            results.append(
                {
                    "kind": kind,
                    "m": m,
                    "pairs": int(res.shape[0]),
                    "states": args.states,
                    "max_residual": worst,
                    "tolerance": TWIRL_TOL,
                    "verdict": "pass" if worst <= TWIRL_TOL else "fail",
                }
            )
            for (q1, q2), r in zip(distinct_pairs(m), res):
                rows.append({"kind": kind, "m": m, "q1": q1.label(), "q2": q2.label(), "max_residual": float(r.max())})
    return rows, results


HANDLERS = {
    "privacy": cmd_privacy,
    "soundness": cmd_soundness,
    "bias": cmd_bias,
    "ghz": cmd_ghz,
    "secure-estimate": cmd_secure_estimate,
    "huang": cmd_huang,
    "twirl": cmd_twirl,
}


# -- parser -----------------------------------------------------------------

def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed for every random draw")
    common.add_argument("--out-dir", default=None, help="write <command>.csv and <command>.json here")
    common.add_argument("--format", choices=("csv", "json"), default="json", help="what to print on stdout")
    common.add_argument("--config", default=None, help="JSON (or TOML on Python 3.11+) file of option defaults")

    parser = argparse.ArgumentParser(prog="secure-metrology", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    subs = {}

    p = sub.add_parser("privacy", parents=[common], help="key-averaged view of the eavesdropper")
    p.add_argument("--code", choices=CODES, required=True)
    p.add_argument("--m", type=int, nargs="+", required=True)
    p.add_argument("--sampling", type=_sampling, default="auto")
    p.add_argument("--input", choices=("random", "zero"), default="random")
    p.add_argument("--tolerance", type=float, default=None)
    subs["privacy"] = p

    p = sub.add_parser("soundness", parents=[common], help="key-averaged accepted-but-wrong weight")
    p.add_argument("--code", choices=CODES, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--t", type=int, nargs="+", required=True)
    p.add_argument("--adversary", nargs="+", default=["identity"])
    p.add_argument("--key-sampling", type=_sampling, default="auto")
    p.add_argument("--theta", type=float, default=0.3)
    p.add_argument("--probe", choices=("ghz", "plus", "random"), default="ghz")
    subs["soundness"] = p

    p = sub.add_parser("bias", parents=[common], help="paired Monte Carlo biases against their bounds")
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--nu", type=int, default=1000)
    p.add_argument("--theta", type=float, default=0.3)
    p.add_argument("--eps", type=float, nargs="+", default=[0.01, 0.05, 0.1])
    p.add_argument("--source", choices=SOURCE_KINDS, nargs="+", default=["mixed"])
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--window", type=float, nargs=2, default=None)
    p.add_argument("--allow-small-nu", action="store_true")
    subs["bias"] = p

    p = sub.add_parser("ghz", parents=[common], help="GHZ phase estimation precision")
    p.add_argument("--n", type=int, nargs="+", default=[4])
    p.add_argument("--nu", type=int, default=10_000)
    p.add_argument("--theta", type=float, default=0.3)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--tolerance", type=float, default=0.15)
    p.add_argument("--allow-small-nu", action="store_true")
    subs["ghz"] = p

    p = sub.add_parser("secure-estimate", parents=[common], help="estimation through a secured channel")
    p.add_argument("--code", choices=CODES, required=True)
    p.add_argument("--n", type=int, default=2)
    p.add_argument("--t", type=int, default=None, help="flag count (default: the resource formula)")
    p.add_argument("--nu", type=int, default=100)
    p.add_argument("--theta", type=float, default=None)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--reps", type=int, default=50)
    p.add_argument("--adversary", default="weak-pauli:0.01")
    subs["secure-estimate"] = p

    p = sub.add_parser("huang", parents=[common], help="undetectable attack on the randomized remote protocol")
    p.add_argument("--n", type=int, nargs="+", default=[2])
    p.add_argument("--p-a", type=_probability, default=0.5)
    p.add_argument("--p-c", type=_probability, nargs="+", default=[0.8])
    p.add_argument("--theta", type=float, default=0.4)
    p.add_argument("--rounds", type=int, default=10_000)
    p.add_argument("--reps", type=int, default=200)
    p.add_argument("--eve", choices=("absent", "attack"), default="attack")
    p.add_argument("--correction", choices=("flip", "literal"), default="flip")
    p.add_argument("--tolerance", type=float, default=0.15)
    subs["huang"] = p

    p = sub.add_parser("twirl", parents=[common], help="exhaustive twirl cancellation residuals")
    p.add_argument("--kind", choices=KINDS, nargs="+", default=list(KINDS))
    p.add_argument("--m", type=int, nargs="+", default=[1, 2])
    p.add_argument("--states", type=int, default=20)
    subs["twirl"] = p

    p = sub.add_parser("plot-data", parents=[common], help="tidy CSV series from JSON summaries")
    p.add_argument("reports", nargs="+", help="JSON summaries written by other subcommands")
    subs["plot-data"] = p
    return parser, subs


def load_config(path: str) -> dict:
    text = Path(path).read_text()
    if path.endswith(".toml"):
        try:
            import tomllib
        except ModuleNotFoundError:
            raise UsageError("TOML config files need Python 3.11+; use JSON instead") from None
        data = tomllib.loads(text)
    else:
        data = json.loads(text)
    if not isinstance(data, dict):
        raise UsageError("config file must hold a mapping of option names to values")
    return {k.replace("-", "_"): v for k, v in data.items()}


def _apply_config(argv: list[str], parser, subs) -> None:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    pre.add_argument("command", nargs="?")
    known, _ = pre.parse_known_args(argv)
    if not known.config or known.command not in subs:
        return
    cfg = load_config(known.config)
    sp = subs[known.command]
    dests = {a.dest for a in sp._actions}
    unknown = sorted(set(cfg) - dests)
    if unknown:
        raise UsageError(f"unknown config keys for {known.command}: {', '.join(unknown)}")
    for action in sp._actions:
        if action.dest in cfg:
            action.required = False
    sp.set_defaults(**cfg)


def _emit(args, name: str, rows: list[dict], summary: dict) -> None:
    if args.out_dir:
        report.write_report(args.out_dir, name, rows, summary)
    if args.format == "json":
        sys.stdout.write(report.summary_to_json(summary))
    else:
        sys.stdout.write(report.rows_to_csv(rows))


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        _apply_config(argv, parser, subs)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_PASS

    if args.command == "plot-data":
        try:
            reports = [json.loads(Path(p).read_text()) for p in args.reports]
            rows = report.emit_plot_data(reports)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_USAGE
        if args.out_dir:
            out = Path(args.out_dir)
            out.mkdir(parents=True, exist_ok=True)
            (out / "plot_data.csv").write_text(report.rows_to_csv(rows))
        sys.stdout.write(report.rows_to_csv(rows))
        return EXIT_PASS

    if args.command == "secure-estimate" and args.theta is None:
        args.theta = math.pi / (4 * args.n)
    rng = np.random.default_rng(args.seed)
    try:
        rows, results = HANDLERS[args.command](args, rng)
    except (ValueError, AttackSpecError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    passed = all(r["verdict"] != "fail" for r in results)
    params = {k: v for k, v in vars(args).items() if k not in ("out_dir", "format", "config")}
    summary = {"command": args.command, "parameters": params, "results": results,
               "verdict": "pass" if passed else "fail"}
    _emit(args, args.command, rows, summary)
    return EXIT_PASS if passed else EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
