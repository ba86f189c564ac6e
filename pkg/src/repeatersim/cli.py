"""Command-line surface.

Subcommands bind the library modules to machine-readable CSV/JSON reports.
Every command is deterministic given (config, seed) and emits byte-stable
output; numeric formatting honours the configured precision (significant
digits).  Exit codes: 0 success, 2 configuration, 3 numeric failure,
4 infeasible request.

Units: lengths in multiples of the attenuation length, times in seconds,
rates in 1/s.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import applications, config, ensemble, montecarlo, scaling
from .config import Config, ConfigError
from .protocol import ChainStallError, chain
from .scaling import InfeasibleError

SCHEMA_VERSION = 1

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3
EXIT_INFEASIBLE = 4


def _fmt(value, precision: int):
    if isinstance(value, bool) or not isinstance(value, (int, float, np.floating)):
        return value
    if isinstance(value, (int, np.integer)):
        return int(value)
    return float(f"{float(value):.{precision}g}")


def _round_tree(obj, precision: int):
    if isinstance(obj, dict):
        return {k: _round_tree(v, precision) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_tree(v, precision) for v in obj]
    return _fmt(obj, precision)


def _resolve_path(path: str) -> str:
    outdir = os.environ.get("REPEATERSIM_OUTDIR")
    if outdir and not os.path.isabs(path):
        return os.path.join(outdir, path)
    return path


def _write(text: str, path: str):
    if path:
        path = _resolve_path(path)
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def emit_json(payload: dict, cfg: Config, path: str):
    payload = {"schema_version": SCHEMA_VERSION, **payload}
    text = json.dumps(_round_tree(payload, cfg.output.precision),
                      indent=2, sort_keys=True)
    _write(text + "\n", path)


def emit_csv(header, rows, cfg: Config, path: str):
    prec = cfg.output.precision
    lines = [f"# schema_version={SCHEMA_VERSION}", ",".join(header)]
    for row in rows:
        lines.append(",".join(
            str(_fmt(v, prec)) if isinstance(v, (int, float, np.floating)) else str(v)
            for v in row))
    _write("\n".join(lines) + "\n", path)


def emit_table(header, rows, summary: dict, cfg: Config, args):
    """Write one logical table as CSV or as a JSON record list."""
    if args.format == "csv":
        emit_csv(header, rows, cfg, args.out)
    else:
        payload = {"rows": [dict(zip(header, row)) for row in rows], **summary}
        emit_json(payload, cfg, args.out)


# ---------------------------------------------------------------------------
# per-command summaries (also the sweep row source)


def rates_summary(cfg: Config) -> dict:
    rates = ensemble.effective_rates(cfg.ensemble)
    fs = ensemble.free_space_snr(cfg.free_space.density, cfg.free_space.sample_length,
                                 cfg.free_space.wavenumber)
    return {
        "kappa_prime": rates.kappa_prime,
        "gamma_s_prime": rates.gamma_s_prime,
        "snr": rates.snr,
        "squeeze": rates.squeeze,
        "excitation_prob": rates.excitation_prob,
        "bad_cavity_ratio": rates.bad_cavity_ratio,
        "adiabatic_marginal": rates.adiabatic_marginal,
        "optical_depth": fs.optical_depth,
        "superradiance_risk": fs.superradiance_risk,
    }


def cmd_rates(cfg: Config, args) -> int:
    summary = rates_summary(cfg)
    if args.format == "csv":
        emit_csv(list(summary), [list(summary.values())], cfg, args.out)
    else:
        emit_json(summary, cfg, args.out)
    return EXIT_OK


def cmd_dynamics(cfg: Config, args) -> int:
    rates = ensemble.effective_rates(cfg.ensemble)
    t_end = args.t_max if args.t_max is not None else 0.05 / rates.kappa_prime
    grid = np.linspace(0.0, t_end, args.points)
    pops = ensemble.integrate_master_equation(cfg.ensemble, args.modes,
                                              args.cutoff, grid)
    rows = []
    for k in range(len(grid)):
        noise = pops.per_noise_mode[k]
        ratio = pops.collective[k] / noise if noise > 0 else math.nan
        rows.append((grid[k], pops.collective[k], noise, ratio))
    path = args.out or "dynamics.csv"
    emit_csv(("t", "pop_collective", "pop_noise_mode", "ratio"), rows, cfg, path)
    analytic = ((rates.kappa_prime + rates.gamma_s_prime) / rates.gamma_s_prime
                if rates.gamma_s_prime > 0 else math.inf)
    extracted = pops.rate_ratio()
    deviation = abs(extracted / analytic - 1.0) if math.isfinite(analytic) else 0.0
    print(f"extracted rate ratio {extracted:.6g} vs analytic {analytic:.6g} "
          f"(deviation {100 * deviation:.2f}%)")
    return EXIT_OK


def chain_summary(cfg: Config) -> dict:
    rows = chain(cfg.repeater, channel_phase=cfg.applications.phase)
    last = rows[-1]
    return {"levels": last.level, "length": last.length,
            "vacuum_coeff": last.vacuum_coeff, "success_prob": last.success_prob,
            "fidelity_deficit": last.fidelity_deficit, "time_s": last.elapsed_time}


def cmd_chain(cfg: Config, args) -> int:
    rows = chain(cfg.repeater, channel_phase=cfg.applications.phase)
    table = [(r.level, r.length, r.vacuum_coeff, r.success_prob,
              r.fidelity_deficit, r.elapsed_time) for r in rows]
    emit_table(("i", "L_i", "c_i", "p_i", "dF_i", "T_i"), table,
               chain_summary(cfg), cfg, args)
    return EXIT_OK


def scaling_summary(cfg: Config) -> dict:
    best = scaling.optimize_segment(cfg.repeater, cfg.scaling.total_length,
                                    objective="compositional",
                                    df_target=cfg.scaling.target_infidelity,
                                    n_max=cfg.scaling.n_max)
    direct = math.exp(cfg.scaling.total_length / cfg.repeater.attenuation_length)
    return {"L_over_Latt": cfg.scaling.total_length,
            "best_n": best.n_star, "best_L0_over_Latt": best.l0_star,
            "best_ratio": best.value, "ratio_direct": direct,
            "advantage": direct / best.value}


def cmd_scaling(cfg: Config, args) -> int:
    total = cfg.scaling.total_length
    latt = cfg.repeater.attenuation_length
    direct = math.exp(total / latt)
    eta_s = cfg.repeater.swap_efficiency
    rows = []
    for n in range(1, cfg.scaling.n_max + 1):
        l0 = total / 2 ** n
        trial = cfg.repeater.with_(segment_length=l0, levels=n)
        try:
            comp = scaling.total_time(trial, cfg.scaling.target_infidelity,
                                      cfg.scaling.per_connection_dark,
                                      cfg.scaling.asym).ratio
        except (InfeasibleError, ChainStallError, OverflowError):
            continue
        case = "high_eta" if eta_s >= 1.0 else "general"
        try:
            closed = scaling.closed_form_time(trial, case)
        except (ValueError, OverflowError):
            closed = math.nan
        rows.append((total / latt, l0 / latt, n, comp, closed, direct))
    if not rows:
        raise InfeasibleError("no feasible segmentation for the scaling table")
    emit_table(("L_over_Latt", "L0_over_Latt", "n", "ratio_compositional",
                "ratio_closed_form", "ratio_direct"), rows,
               scaling_summary(cfg), cfg, args)
    return EXIT_OK


def optimize_summary(cfg: Config, args) -> dict:
    best = scaling.optimize_segment(cfg.repeater, cfg.scaling.total_length,
                                    objective=args.objective, m=args.m,
                                    df_target=cfg.scaling.target_infidelity,
                                    n_max=cfg.scaling.n_max)
    return {"objective": args.objective, "L0_star": best.l0_star,
            "n_star": best.n_star, "value": best.value}


def cmd_optimize(cfg: Config, args) -> int:
    summary = optimize_summary(cfg, args)
    if args.format == "csv":
        emit_csv(list(summary), [list(summary.values())], cfg, args.out)
    else:
        emit_json(summary, cfg, args.out)
    return EXIT_OK


def chsh_summary(cfg: Config) -> dict:
    c_n = cfg.applications.vacuum_coeff
    phi = cfg.applications.phase
    eta_a = cfg.repeater.app_efficiency
    e_matrix = []
    settings = []
    coinc = None
    for psi_l in (0.0, math.pi / 2):
        row = []
        for psi_r in (math.pi / 4, 3 * math.pi / 4):
            res = applications.correlation(
                c_n, phi, applications.MeasurementSetting(psi_l, psi_r), eta_a)
            row.append(res.value)
            settings.append([psi_l, psi_r])
            coinc = res.coincidence_prob
        e_matrix.append(row)
    value = abs(e_matrix[0][0] + e_matrix[1][0] + e_matrix[1][1] - e_matrix[0][1])
    return {"settings": settings, "E_matrix": e_matrix, "chsh": value,
            "coincidence_prob": coinc}


def cmd_chsh(cfg: Config, args) -> int:
    summary = chsh_summary(cfg)
    if args.format == "csv":
        emit_csv(("chsh", "coincidence_prob"),
                 [(summary["chsh"], summary["coincidence_prob"])], cfg, args.out)
    else:
        emit_json(summary, cfg, args.out)
    return EXIT_OK


def cmd_teleport(cfg: Config, args) -> int:
    qubit = applications.PolarizationQubit.from_bloch(args.bloch_theta, args.bloch_phi)
    res = applications.teleport(qubit, cfg.applications.vacuum_coeff,
                                cfg.repeater.app_efficiency,
                                phi=cfg.applications.phase)
    emit_json({
        "bloch_theta": args.bloch_theta, "bloch_phi": args.bloch_phi,
        "success_prob": res.success_prob, "output_fidelity": res.output_fidelity,
        "pattern_prob": res.pattern_prob, "confirm_prob": res.confirm_prob,
    }, cfg, args.out)
    return EXIT_OK


def cmd_ekert(cfg: Config, args) -> int:
    seed = args.seed if args.seed is not None else cfg.trials.seed
    rounds = args.rounds if args.rounds is not None else cfg.applications.rounds
    stats = applications.ekert_simulation(cfg.applications.vacuum_coeff,
                                          cfg.applications.phase,
                                          cfg.repeater.app_efficiency,
                                          rounds, seed)
    emit_json({
        "rounds": stats.rounds, "key_length": stats.sifted_length,
        "qber": stats.qber, "coincidence_rate": stats.coincidence_rate,
        "seed": stats.seed,
    }, cfg, args.out)
    return EXIT_OK


def cmd_montecarlo(cfg: Config, args) -> int:
    trials = cfg.trials
    if args.seed is not None:
        trials = montecarlo.TrialConfig(args.seed, trials.n_trials, trials.policy,
                                        trials.threads)
    if args.trials is not None:
        trials = montecarlo.TrialConfig(trials.seed, args.trials, trials.policy,
                                        trials.threads)
    if args.policy is not None:
        trials = montecarlo.TrialConfig(trials.seed, trials.n_trials, args.policy,
                                        trials.threads)
    if args.threads is not None:
        trials = montecarlo.TrialConfig(trials.seed, trials.n_trials, trials.policy,
                                        args.threads)
    level = args.level if args.level is not None else cfg.repeater.levels
    est = montecarlo.estimate(cfg.repeater, level, trials)
    if args.trace_csv:
        times = montecarlo.chain_times(cfg.repeater, level, trials)
        emit_csv(("trial", "time_s"), list(enumerate(times)), cfg, args.trace_csv)
    emit_json({
        "params_echo": {
            "excitation_prob": cfg.repeater.excitation_prob,
            "pulse_time": cfg.repeater.pulse_time,
            "local_efficiency": cfg.repeater.local_efficiency,
            "swap_efficiency": cfg.repeater.swap_efficiency,
            "dark_prob": cfg.repeater.dark_prob,
            "segment_length": cfg.repeater.segment_length,
            "levels": level,
        },
        "n_trials": est.n_trials, "seed": est.seed, "policy": est.policy,
        "backend": est.backend, "threads": trials.threads,
        "mean_s": est.mean, "stddev_s": est.stddev, "ci95_s": est.ci95,
        "analytic_Tn_s": est.analytic_t_n, "ratio": est.vs_analytic_ratio,
    }, cfg, args.out)
    return EXIT_OK


SWEEP_SUMMARIES = {
    "rates": lambda cfg, args: rates_summary(cfg),
    "chain": lambda cfg, args: chain_summary(cfg),
    "scaling": lambda cfg, args: scaling_summary(cfg),
    "optimize": optimize_summary,
    "chsh": lambda cfg, args: chsh_summary(cfg),
}

COMMANDS = {
    "rates": cmd_rates,
    "dynamics": cmd_dynamics,
    "chain": cmd_chain,
    "scaling": cmd_scaling,
    "optimize": cmd_optimize,
    "chsh": cmd_chsh,
    "teleport": cmd_teleport,
    "ekert": cmd_ekert,
    "montecarlo": cmd_montecarlo,
}


def _parse_sweep(spec: str):
    try:
        key, rng = spec.split("=", 1)
        lo, hi, steps = rng.split(":")
        lo, hi, steps = float(lo), float(hi), int(steps)
    except ValueError as exc:
        raise ConfigError(f"sweep spec {spec!r}: expected key=a:b:steps") from exc
    if steps < 1:
        raise ConfigError("sweep needs at least one step")
    return key, np.linspace(lo, hi, steps)


def _run_sweep(name: str, raw: dict, args) -> int:
    if name not in SWEEP_SUMMARIES:
        raise ConfigError(f"--sweep is not supported for {name}")
    key, values = _parse_sweep(args.sweep)
    if "." not in key:
        raise ConfigError(f"{key}: sweep keys use section.key form")
    section, field = key.split(".", 1)
    if section not in config.SCHEMA or field not in config.SCHEMA[section]:
        raise ConfigError(f"{key}: unknown key")
    is_int = config.SCHEMA[section][field][0] is int
    header = None
    rows = []
    cfg0 = None
    for v in values:
        text = str(int(round(v))) if is_int else repr(float(v))
        cfg = config.from_raw(config.set_raw(raw, key, text))
        cfg0 = cfg0 or cfg
        summary = SWEEP_SUMMARIES[name](cfg, args)
        summary = {k: s for k, s in summary.items()
                   if isinstance(s, (int, float, bool, str, np.floating))}
        if header is None:
            header = [key] + list(summary)
        rows.append([int(text) if is_int else float(text)]
                    + [summary[k] for k in header[1:]])
    emit_csv(header, rows, cfg0, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="repeatersim",
        description="Ensemble-based quantum repeater simulator. Units: lengths "
                    "in attenuation lengths, times in seconds, rates in 1/s.")
    parser.add_argument("--config", help="INI config file (strict schema)")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--format", choices=("json", "csv"), default=None)
        p.add_argument("--out", default="", help="output file (default stdout)")
        p.add_argument("--sweep", default=None,
                       help="section.key=a:b:steps sweep table")
        return p

    add("rates", "effective interaction rates and free-space optical depth")
    p = add("dynamics", "integrate the heating master equation, write a time series")
    p.add_argument("--modes", type=int, default=4)
    p.add_argument("--cutoff", type=int, default=2)
    p.add_argument("--t-max", type=float, default=None)
    p.add_argument("--points", type=int, default=120)
    add("chain", "per-level doubling-chain table")
    add("scaling", "communication-time ratios over segment counts")
    p = add("optimize", "best segment length for a channel")
    p.add_argument("--objective", choices=("compositional", "closed_form", "power_law"),
                   default="compositional")
    p.add_argument("--m", type=float, default=None, help="power-law exponent")
    add("chsh", "four-setting correlation combination")
    p = add("teleport", "post-selected teleportation figures")
    p.add_argument("--bloch-theta", type=float, default=math.pi / 2)
    p.add_argument("--bloch-phi", type=float, default=0.0)
    p = add("ekert", "sampled key-distribution run")
    p.add_argument("--rounds", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p = add("montecarlo", "sampled waiting-time statistics")
    p.add_argument("--level", type=int, default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--policy", choices=montecarlo.POLICIES, default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--trace-csv", default="", help="optional per-trial CSV")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        raw = (config.parse_raw(open(args.config, encoding="utf-8").read())
               if args.config else config.default_raw())
        cfg = config.from_raw(raw)
        if args.format is None:
            args.format = cfg.output.format
        if not args.out and cfg.output.path:
            args.out = cfg.output.path
        if getattr(args, "sweep", None):
            return _run_sweep(args.command, raw, args)
        return COMMANDS[args.command](cfg, args)
    except OSError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleError as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (ChainStallError, ArithmeticError, RuntimeError, ValueError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
