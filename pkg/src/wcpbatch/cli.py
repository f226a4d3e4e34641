"""Command-line interface with reproducible, config-driven runs.

Every subcommand resolves its parameters from an optional ``key = value``
config file overridden by flags, embeds the resolved configuration in its
output artifact (comment header for CSV, a "config" object for JSON), and
prints a short human-readable summary to stdout.  Re-running a command from
the config embedded in one of its artifacts reproduces the artifact byte for
byte.  Exit codes: 0 success, 2 parameter error, 3 infeasible request.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from pathlib import Path

from . import analysis, bounds, games, protocol
from .estimation import (
    ProtocolViolationError,
    accepted_counts,
    coefficients,
    reference_t,
    statistic_t,
)
from .numerics import InfeasibleError, ParameterError, RngStream
from .qubits import IDENTITY, sample_group_element

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_INFEASIBLE = 3

_CONFIG_ONLY = {"config", "out", "out_dir", "transcript"}


def _parse_config_file(path: str) -> dict:
    """Read `key = value` lines; '#' starts a comment, blank lines ignored."""
    values: dict[str, str] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParameterError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _coerce(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            continue
    return value


def _apply_config(
    parser: argparse.ArgumentParser,
    subparsers: dict[str, argparse.ArgumentParser],
    argv: list[str],
) -> argparse.Namespace:
    """Parse argv with config-file values as subcommand defaults (flags win)."""
    probe = argparse.ArgumentParser(add_help=False)
    probe.add_argument("--config")
    known, _ = probe.parse_known_args(argv)
    command = next((tok for tok in argv if tok in subparsers), None)
    if known.config and command:
        sub = subparsers[command]
        file_values = _parse_config_file(known.config)
        file_values.pop("command", None)  # embedded headers carry it; positional here
        actions = {a.dest: a for a in sub._actions}
        for key, raw in file_values.items():
            if key not in actions:
                raise ParameterError(f"unknown config key {key!r} in {known.config}")
            action = actions[key]
            value = action.type(raw) if callable(action.type) else _coerce(raw)
            sub.set_defaults(**{key: value})
            action.required = False  # satisfied by the config file
    return parser.parse_args(argv)


def _config_dict(args: argparse.Namespace, command: str) -> dict:
    cfg = {
        k: v
        for k, v in sorted(vars(args).items())
        if k not in _CONFIG_ONLY and not k.startswith("_") and v is not None and k != "func"
    }
    return {"command": command, **cfg}


def _config_header(cfg: dict) -> str:
    return "".join(f"# {key} = {value}\n" for key, value in cfg.items())


def _render_csv(columns, rows, cfg: dict) -> str:
    buf = io.StringIO()
    buf.write(_config_header(cfg))
    writer = csv.DictWriter(buf, fieldnames=list(columns), lineterminator="\r\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row)
    return buf.getvalue()


def _render_json(payload: dict, cfg: dict) -> str:
    return json.dumps({"config": cfg, **payload}, indent=2) + "\n"


def _emit(content: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(content)
        return
    try:
        Path(out).write_text(content)
    except OSError as exc:
        raise ParameterError(f"cannot write output path {out}: {exc}") from exc


def _add_common(p: argparse.ArgumentParser, *, fmt: bool = True) -> None:
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--out", help="artifact path (default: artifact to stdout)")
    if fmt:
        p.add_argument("--format", choices=("csv", "json"), default="csv",
                       help="artifact format")


def _add_two_intensity(p: argparse.ArgumentParser) -> None:
    p.add_argument("--nu", type=float, required=True, help="low pulse intensity")
    p.add_argument("--nu-prime", type=float, required=True, help="high pulse intensity")


def _add_slack(p: argparse.ArgumentParser) -> None:
    p.add_argument("--delta", type=float, required=True, help="batch-size slack")
    p.add_argument("--delta0", type=float, required=True, help="estimation margin Delta0")
    p.add_argument("--delta0-small", type=float, required=True, help="hypergeometric slack delta_0")
    p.add_argument("--delta0-small-prime", type=float, required=True)
    p.add_argument("--gamma0", type=float, required=True, help="two-photon count slack gamma_0")
    p.add_argument("--gamma0-prime", type=float, required=True)


def _slack_from(args) -> bounds.SlackParams:
    return bounds.SlackParams(
        delta=args.delta,
        delta0=args.delta0,
        delta0_small=args.delta0_small,
        delta0_small_prime=args.delta0_small_prime,
        gamma0=args.gamma0,
        gamma0_prime=args.gamma0_prime,
    )


def _batch_size(args, coeffs) -> int:
    if getattr(args, "k", None) is not None:
        return args.k
    if getattr(args, "delta", None) is not None:
        k, _ = bounds.batch_size_for(coeffs, args.eta, args.n, args.delta)
        return k
    raise ParameterError("provide either --k or --delta to fix the batch size")


# --------------------------------------------------------------------------
# subcommand implementations


def cmd_coeffs(args) -> int:
    cfg = _config_dict(args, "coeffs")
    c = coefficients(args.nu, args.nu_prime)
    row = {
        "nu": c.nu, "nu_prime": c.nu_prime,
        "a": c.a, "b": c.b, "c": c.c,
        "a_prime": c.a_prime, "b_prime": c.b_prime, "c_prime": c.c_prime,
        "discriminant": c.discriminant,
    }
    content = (_render_json(row, cfg) if args.format == "json"
               else _render_csv(row.keys(), [row], cfg))
    print(f"coefficients at (nu={c.nu:g}, nu'={c.nu_prime:g}): "
          f"c={c.c:.8g} c'={c.c_prime:.8g} bc'-b'c={c.discriminant:.8g}")
    _emit(content, args.out)
    return EXIT_OK


def cmd_bounds(args) -> int:
    cfg = _config_dict(args, "bounds")
    c = coefficients(args.nu, args.nu_prime)
    slack = _slack_from(args)
    budget = bounds.epsilon_ac(c, args.eta, args.n, slack,
                               m_union_factor=args.m_union_factor)
    payload = budget.to_dict(coeffs=c, eta=args.eta, n_pulses=args.n, slack=slack)
    if args.format == "json":
        content = _render_json(payload, cfg)
    else:
        flat = {k: (v if not isinstance(v, dict) else v["value"]) for k, v in payload.items()
                if k != "violated"}
        flat["log_eps_AC"] = payload["eps_AC"]["log_value"]
        content = _render_csv(flat.keys(), [flat], cfg)
    ok = budget.constraints_satisfied
    print(f"eps_corr={budget.eps_corr.value:.6g} eps_sec={budget.eps_sec.value:.6g} "
          f"eps_AC={budget.eps_ac.value:.6g} (log {budget.eps_ac.log_value:.6g}) "
          f"constraints_satisfied={ok}")
    _emit(content, args.out)
    return EXIT_OK if ok else EXIT_INFEASIBLE


_RECEIVERS = {
    "honest": protocol.HonestReceiver,
    "first-k": protocol.FirstKReceiver,
    "pns": protocol.PnsReceiver,
}


def cmd_simulate(args) -> int:
    cfg = _config_dict(args, "simulate")
    c = coefficients(args.nu, args.nu_prime)
    k = _batch_size(args, c)
    params = protocol.ProtocolParams.two_intensity(
        args.nu, args.nu_prime, args.eta, args.n, k, delta0=args.delta0
    )
    receiver_cls = _RECEIVERS[args.receiver]
    t_ref = reference_t(c, args.eta, args.n)
    rows = []
    first_transcript = None
    for i in range(args.runs):
        run_rng = RngStream(args.seed, i)
        if args.targets == "identity":
            targets = [IDENTITY] * k
        else:
            target_rng = run_rng.child(3)
            targets = [sample_group_element(target_rng) for _ in range(k)]
        tr = protocol.run_with_receiver(params, targets, receiver_cls(), run_rng)
        if first_transcript is None:
            first_transcript = tr
        ideal = protocol.ideal_batch(targets).states
        row = {
            "run": i,
            "acked": tr.ack is not None,
            "P": "", "P_prime": "", "T": "", "t": t_ref,
            "estimator_accepted": tr.corrections is not None if tr.ack is not None else "",
            "aborted": tr.aborted,
            "matches_ideal": (tr.output == list(ideal)) if tr.output is not None else "",
        }
        if tr.ack is not None:
            unpermuted = tr.sender_state.permutation[tr.ack]
            counts = accepted_counts(unpermuted, params.intensity_array, c)
            row["P"], row["P_prime"] = counts.p_low, counts.p_high
            row["T"] = statistic_t(counts, c)
        rows.append(row)
    columns = ("run", "acked", "P", "P_prime", "T", "t", "estimator_accepted",
               "aborted", "matches_ideal")
    content = (_render_json({"runs": rows}, cfg) if args.format == "json"
               else _render_csv(columns, rows, cfg))
    aborts = sum(1 for r in rows if r["aborted"])
    exact = sum(1 for r in rows if r["matches_ideal"] is True)
    print(f"{args.runs} runs with receiver={args.receiver}: "
          f"{aborts} aborted, {exact} matched the ideal batch exactly")
    _emit(content, args.out)
    if args.transcript and first_transcript is not None:
        Path(args.transcript).write_text(first_transcript.to_jsonl())
        print(f"first transcript -> {args.transcript}")
    return EXIT_OK


def _game_common(args, command: str):
    cfg = _config_dict(args, command)
    c = coefficients(args.nu, args.nu_prime)
    k = _batch_size(args, c)
    params = protocol.ProtocolParams.two_intensity(args.nu, args.nu_prime, args.eta,
                                                   args.n, k)
    workers = args.threads if args.threads else (os.cpu_count() or 1)
    return cfg, params, workers


def _emit_game_stats(args, cfg, params, stats) -> None:
    row = stats.csv_row(params, args.delta0)
    content = (_render_json(row, cfg) if args.format == "json"
               else _render_csv(row.keys(), [row], cfg))
    low, high = stats.wilson()
    name = f" [{stats.adversary}]" if stats.adversary else ""
    print(f"{stats.game}{name}: {stats.hits}/{stats.trials} "
          f"(rate {stats.rate:.6g}, 99.9% Wilson [{low:.6g}, {high:.6g}])")
    _emit(content, args.out)


def cmd_game_cor(args) -> int:
    cfg, params, workers = _game_common(args, "game-cor")
    stats = games.run_game_cor_trials(params, args.delta0, args.trials, args.seed,
                                      workers=workers)
    _emit_game_stats(args, cfg, params, stats)
    return EXIT_OK


def cmd_game_sim(args) -> int:
    cfg, params, workers = _game_common(args, "game-sim")
    if args.adversary == "beta":
        adversary = games.adversary_beta(args.beta)
    elif args.adversary == "honest_mimic":
        adversary = games.adversary_honest_mimic(
            args.adversary_eta if args.adversary_eta is not None else args.eta
        )
    else:
        adversary = games.adversary_pns_greedy()
    stats = games.run_game_sim_trials(params, args.delta0, adversary, args.trials,
                                      args.seed, workers=workers)
    _emit_game_stats(args, cfg, params, stats)
    return EXIT_OK


def cmd_optimize(args) -> int:
    cfg = _config_dict(args, "optimize")
    result = analysis.optimize(
        args.eta, args.n,
        alpha=None if args.free_alpha else args.alpha,
        eps_target=args.eps_target,
    )
    content = _render_json(result.to_dict(), cfg)
    print(f"optimize(eta={args.eta:g}, N={args.n}): converged={result.converged} "
          f"eps_AC={result.budget.eps_ac.value:.6g} "
          f"(log {result.budget.eps_ac.log_value:.6g}) "
          f"nu={result.best_intensities[0]:.6g} nu'={result.best_intensities[1]:.6g}")
    _emit(content, args.out)
    return EXIT_OK if result.converged else EXIT_INFEASIBLE


def cmd_scaling(args) -> int:
    cfg = _config_dict(args, "scaling")
    etas = [float(v) for v in str(args.etas).split(",") if v]
    workers = args.threads if args.threads else (os.cpu_count() or 1)
    fit = analysis.scaling_sweep(etas, args.eps_target, args.alpha, workers=workers)
    if args.format == "json":
        content = _render_json(fit.to_dict(), cfg)
    else:
        rows = [{"eta": e, "n_min": n, "slope": fit.slope, "intercept": fit.intercept,
                 "r_squared": fit.r_squared} for e, n in fit.grid]
        content = _render_csv(("eta", "n_min", "slope", "intercept", "r_squared"),
                              rows, cfg)
    print(f"scaling fit over {len(fit.grid)} points: slope={fit.slope:.4f} "
          f"r^2={fit.r_squared:.5f}; infeasible etas: {list(fit.infeasible) or 'none'}")
    _emit(content, args.out)
    return EXIT_OK


def cmd_nustar(args) -> int:
    cfg = _config_dict(args, "nustar")
    if args.mode == "point":
        point = analysis.nu_star_point(args.eta0, args.alpha)
        row = {
            "eta0": point.eta0, "alpha": point.alpha,
            "nu_star_glmo": point.nu_star_glmo, "nu_star_dkl": point.nu_star_dkl,
            "winner": point.winner, "glmo_multiple_roots": point.glmo_multiple_roots,
        }
        content = (_render_json(row, cfg) if args.format == "json"
                   else _render_csv(row.keys(), [row], cfg))
        print(f"eta0={point.eta0:g} alpha={point.alpha:g}: "
              f"nu*_GLMO={point.nu_star_glmo:.6g} nu*_DKL={point.nu_star_dkl:.6g} "
              f"winner={point.winner}")
        _emit(content, args.out)
        return EXIT_OK
    workers = args.threads if args.threads else (os.cpu_count() or 1)
    table = analysis.figure_data(args.mode, eta0=args.eta0, alpha=args.alpha,
                                 workers=workers)
    content = (_render_json({"rows": list(table.rows)}, cfg) if args.format == "json"
               else _render_csv(table.columns, table.rows, cfg))
    print(f"{args.mode}: {len(table.rows)} rows")
    _emit(content, args.out)
    return EXIT_OK


def cmd_figures(args) -> int:
    cfg = _config_dict(args, "figures")
    out_dir = Path(args.out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ParameterError(f"cannot create output directory {out_dir}: {exc}") from exc
    workers = args.threads if args.threads else (os.cpu_count() or 1)
    for mode in ("fig_eta", "fig_alpha", "density"):
        table = analysis.figure_data(mode, eta0=args.eta0, alpha=args.alpha,
                                     workers=workers)
        content = _render_csv(table.columns, table.rows, {**cfg, "mode": mode})
        (out_dir / f"{mode}.csv").write_text(content)
        print(f"{mode}: {len(table.rows)} rows -> {out_dir / (mode + '.csv')}")
    return EXIT_OK


# --------------------------------------------------------------------------
# parser assembly


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="wcpbatch",
        description="Multi-intensity weak-coherent-pulse batch preparation toolkit",
    )
    subparsers: dict[str, argparse.ArgumentParser] = {}
    base = parser.add_subparsers(dest="command", required=True)

    def add(name: str, **kwargs) -> argparse.ArgumentParser:
        p = base.add_parser(name, **kwargs)
        subparsers[name] = p
        return p

    p = add("coeffs", help="photon-number coefficients of an intensity pair")
    _add_common(p)
    _add_two_intensity(p)
    p.set_defaults(func=cmd_coeffs)

    p = add("bounds", help="closed-form finite-size error budget")
    _add_common(p)
    _add_two_intensity(p)
    p.add_argument("--eta", type=float, required=True, help="channel transmittance")
    p.add_argument("--n", type=int, required=True, help="number of pulses N")
    _add_slack(p)
    p.add_argument("--m-union-factor", type=float, default=32.0,
                   help="union-bound multiplicity on the M term (set 1 for the bare form)")
    p.set_defaults(func=cmd_bounds)

    p = add("simulate", help="protocol runs against a chosen receiver")
    _add_common(p)
    _add_two_intensity(p)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, help="batch size (or derive it with --delta)")
    p.add_argument("--delta", type=float, help="batch-size slack fixing K")
    p.add_argument("--delta0", type=float, required=True, help="estimation margin")
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--receiver", choices=sorted(_RECEIVERS), default="honest")
    p.add_argument("--targets", choices=("random", "identity"), default="random")
    p.add_argument("--transcript", help="save the first run's transcript as JSONL")
    p.set_defaults(func=cmd_simulate)

    for name, fn in (("game-cor", cmd_game_cor), ("game-sim", cmd_game_sim)):
        p = add(name, help=f"Monte Carlo {name.replace('-', ' ')} trials")
        _add_common(p)
        _add_two_intensity(p)
        p.add_argument("--eta", type=float, required=True)
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--k", type=int)
        p.add_argument("--delta", type=float)
        p.add_argument("--delta0", type=float, required=True)
        p.add_argument("--trials", type=int, default=20000)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--threads", type=int, default=0,
                       help="worker count; 0 = all cores (results are identical either way)")
        if name == "game-sim":
            p.add_argument("--adversary", choices=("pns", "beta", "honest_mimic"),
                           default="pns")
            p.add_argument("--beta", type=float, default=0.5,
                           help="two-photon acknowledgement ratio for --adversary beta")
            p.add_argument("--adversary-eta", type=float,
                           help="mimicked transmittance (default: --eta)")
        p.set_defaults(func=fn)

    p = add("optimize", help="minimize the error budget over slacks and intensities")
    _add_common(p, fmt=False)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, default=0.5, help="fixed ratio nu/nu'")
    p.add_argument("--free-alpha", action="store_true", help="optimize alpha as well")
    p.add_argument("--eps-target", type=float, help="stop refining once at or below this")
    p.set_defaults(func=cmd_optimize, format="json")

    p = add("scaling", help="minimal pulse count vs transmittance and its slope")
    _add_common(p)
    p.add_argument("--etas", default="0.1,0.05,0.02,0.01,0.005",
                   help="comma-separated transmittance grid (each in (0, 0.2])")
    p.add_argument("--eps-target", type=float, default=1e-6)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=0, help="worker count; 0 = all cores")
    p.set_defaults(func=cmd_scaling)

    p = add("nustar", help="maximal-intensity comparison tables")
    _add_common(p)
    p.add_argument("--mode", choices=("point", "fig_eta", "fig_alpha", "density"),
                   default="point")
    p.add_argument("--eta0", type=float, default=0.2, help="channel transmittance lower bound")
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=0, help="worker count; 0 = all cores")
    p.set_defaults(func=cmd_nustar)

    p = add("figures", help="write all three comparison tables as CSV")
    p.add_argument("--config", help="key = value file; flags override its entries")
    p.add_argument("--out-dir", default="figures", help="directory for the CSV tables")
    p.add_argument("--eta0", type=float, default=0.2)
    p.add_argument("--alpha", type=float, default=0.5)
    p.add_argument("--threads", type=int, default=0, help="worker count; 0 = all cores")
    p.set_defaults(func=cmd_figures)

    return parser, subparsers


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subparsers = build_parser()
    try:
        args = _apply_config(parser, subparsers, argv)
        return args.func(args)
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ParameterError, ProtocolViolationError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARAMETER


if __name__ == "__main__":
    sys.exit(main())
