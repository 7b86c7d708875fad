"""Command-line front end for the ``tns`` subcommands.

Usage::

    tns free-energy --dim 2 --L 10 --chi 4 --temps 2.1:2.4:0.05
    tns free-energy --dim 2 --L 2 --chi 16 --temps 3.33 --check-brute
    tns observables --dim 2 --L 8 --chi 4 --temps 1.5,2.269,3.0
    tns disorder --L 2 --chi 8 --temps 1.0 --realizations 10 --seed 1
    tns disorder --L 2 --temps 1.0 --realization results/realizations/seed_1.json
    tns selftest
    tns selftest --filter svd

    tns --manifest results/free-energy.json

Every run writes ``<out>/<command>.csv`` and ``<out>/<command>.json``
(rows plus the manifest needed to repeat the run). Exit codes: 0 success,
1 numerical or resource failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from ._version import __version__
from .config import log, validate_config
from .engine import TnsConfig
from .logging_setup import run_context
from .metrics import RunMetrics
from .models import (
    DISTRIBUTIONS,
    IsingSpec,
    ferromagnetic_couplings,
    gauge_transform,
    load_disorder,
    random_gauge,
    sample_ea_couplings,
    save_disorder,
)
from .network import LogScalar, ResourceLimitError
from .report import (
    build_manifest,
    format_selftest,
    format_summary,
    format_table,
    load_manifest,
    now_iso,
    write_csv,
    write_json,
)
from .settings import VARIANTS, TnsSettings, get_settings

# ── Argument types ───────────────────────────────────────────────────────────


def parse_temps(text: str) -> list[float]:
    """``"2.1:2.4:0.05"`` (inclusive range) or ``"1.5,2.0,3.0"``."""
    try:
        if ":" in text:
            parts = [float(p) for p in text.split(":")]
            if len(parts) != 3 or not parts[2] > 0 or parts[1] < parts[0]:
                raise ValueError(text)
            start, stop, step = parts
            count = int(math.floor((stop - start) / step + 1e-9)) + 1
            temps = [round(start + k * step, 12) for k in range(count)]
        else:
            temps = [float(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"cannot parse temperatures {text!r}; use a,b,c or start:stop:step") from None
    if not temps:
        raise argparse.ArgumentTypeError("no temperatures given")
    bad = [t for t in temps if not (math.isfinite(t) and t > 0)]
    if bad:
        raise argparse.ArgumentTypeError(f"temperatures must be finite and > 0, got {bad}")
    return temps


class UsageError(ValueError):
    """Flags are individually valid but do not fit together."""


# ── Shared plumbing ──────────────────────────────────────────────────────────


def _load_config_file(path: str | None) -> dict:
    if not path:
        return {}
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config file must hold a JSON object")
    return doc


def _resolve(args: argparse.Namespace) -> tuple[TnsSettings, TnsConfig]:
    """defaults < environment < config file < flags."""
    stored = getattr(args, "settings", None)
    settings = get_settings(**stored) if stored else get_settings(**_load_config_file(args.config))
    if args.command != "disorder" and getattr(args, "seed", None) is not None:
        if args.seed < 0:
            raise UsageError(f"--seed must be >= 0, got {args.seed}")
        settings = settings.model_copy(update={"als_seed": args.seed})
    validate_config(settings)
    overrides = {key: getattr(args, key) for key in ("chi", "variant", "threads") if getattr(args, key, None) is not None}
    cfg = TnsConfig.from_settings(settings, **overrides)
    if cfg.chi != settings.chi:
        validate_config(settings.model_copy(update={"chi": cfg.chi}))
    return settings, cfg


def _args_dict(args: argparse.Namespace) -> dict:
    skip = {"manifest", "settings"}
    return {k: v for k, v in vars(args).items() if k not in skip}


def _out_dir(args: argparse.Namespace, settings: TnsSettings) -> Path:
    return Path(args.out or settings.output_dir)


def _emit(
    args: argparse.Namespace,
    settings: TnsSettings,
    cfg: TnsConfig,
    rows: list[dict],
    diagnostics: list,
    started_at: str,
    seeds: dict,
    header: dict,
    summary: dict | None = None,
) -> None:
    out = _out_dir(args, settings)
    config = {"args": _args_dict(args), "settings": settings.model_dump(), "tns": dataclasses.asdict(cfg)}
    manifest = build_manifest(args.command, config, __version__, seeds, rows, diagnostics, started_at, summary=summary)
    csv_path = write_csv(out / f"{args.command}.csv", args.command, rows)
    json_path = write_json(out / f"{args.command}.json", manifest)
    print(format_table(args.command, rows, header))
    if summary:
        print(format_summary(summary))
    print(f"wrote {csv_path} and {json_path}")


def _rel_gap(a: LogScalar, b: LogScalar) -> float:
    if a.sign != b.sign:
        return math.inf
    return abs(a.log_abs - b.log_abs) / max(abs(b.log_abs), 1e-300)


def _check_brute_size(dim: int, L: int) -> None:
    from .reference import MAX_BRUTE_SPINS

    n_sites = (2**L) ** dim
    if n_sites > MAX_BRUTE_SPINS:
        raise UsageError(f"--check-brute needs at most {MAX_BRUTE_SPINS} spins, the lattice has {n_sites}")


def _metrics(args: argparse.Namespace, settings: TnsSettings) -> RunMetrics:
    m = RunMetrics(_out_dir(args, settings) / "metrics.jsonl")
    m.flag("command", args.command)
    return m


# ── Subcommands ──────────────────────────────────────────────────────────────


def cmd_free_energy(args: argparse.Namespace) -> int:
    """log Z and f per site along a temperature sweep."""
    from .coarsegrain2d import free_energy_run
    from .reference import CURVES, brute_force

    settings, cfg = _resolve(args)
    if args.check_brute:
        _check_brute_size(args.dim, args.L)
    field = args.field if args.field is not None else 0.0
    metrics = _metrics(args, settings)
    started_at = now_iso()

    rows, diagnostics = [], []
    for T in args.temps:
        beta = 1.0 / T
        spec = IsingSpec(dim=args.dim, L=args.L, beta=beta, field=field)
        with run_context(command="free-energy", T=T):
            result = free_energy_run(spec, cfg.chi, cfg, metrics)
        f_site = result.free_energy_per_site
        delta_f = None
        if spec.dim == 2 and field == 0.0 and f_site is not None:
            exact = CURVES["free_energy"](beta)
            delta_f = abs(f_site - exact) / abs(exact)
        delta_brute = _rel_gap(result.log_z, brute_force(spec)) if args.check_brute else None
        rows.append(
            {
                "dim": spec.dim,
                "L": spec.L,
                "chi": cfg.chi,
                "variant": cfg.variant,
                "T": T,
                "beta": beta,
                "log_Z": result.log_z.log_abs,
                "log_Z_per_site": result.log_z_per_site,
                "f_site": f_site,
                "delta_f": delta_f,
                "delta_brute": delta_brute,
                "seconds_per_iteration": result.seconds_per_iteration,
            }
        )
        diagnostics.append({"T": T, "levels": result.diagnostics()})
        metrics.score(f"f_site@T={T:g}", f_site)

    metrics.finalize()
    header = {"dim": args.dim, "L": args.L, "chi": cfg.chi, "variant": cfg.variant, "field": field}
    _emit(args, settings, cfg, rows, diagnostics, started_at, {"als_seed": cfg.als.rng_seed}, header)
    return 0


def cmd_observables(args: argparse.Namespace) -> int:
    """Internal energy and magnetization by impurity runs."""
    from .coarsegrain2d import observables_run
    from .reference import CURVES

    settings, cfg = _resolve(args)
    field_m = args.field if args.field is not None else settings.field_m
    if not field_m > 0:
        raise UsageError(f"--field must be > 0 for the magnetization, got {field_m}")
    metrics = _metrics(args, settings)
    started_at = now_iso()

    rows, diagnostics = [], []
    for T in args.temps:
        beta = 1.0 / T
        spec = IsingSpec(dim=args.dim, L=args.L, beta=beta)
        with run_context(command="observables", T=T):
            result = observables_run(spec, cfg.chi, cfg, field_m=field_m, metrics=metrics)
        exact_2d = spec.dim == 2
        rows.append(
            {
                "dim": spec.dim,
                "L": spec.L,
                "chi": cfg.chi,
                "T": T,
                "beta": beta,
                "field": field_m,
                "u_tns": result.observables.get("u"),
                "u_exact": CURVES["internal_energy"](beta) if exact_2d else None,
                "m_tns": result.observables.get("m"),
                "m_plus_exact": CURVES["magnetization"](beta) if exact_2d else None,
            }
        )
        diagnostics.append({"T": T, "levels": result.diagnostics()})

    metrics.finalize()
    header = {"dim": args.dim, "L": args.L, "chi": cfg.chi, "field (m)": field_m}
    _emit(args, settings, cfg, rows, diagnostics, started_at, {"als_seed": cfg.als.rng_seed}, header)
    return 0


def _realization(args: argparse.Namespace, seed: int) -> IsingSpec:
    """Couplings of one realization at β = 0; the sweep re-targets β."""
    if args.realization:
        return load_disorder(args.realization, 0.0)
    base = IsingSpec(dim=args.dim, L=args.L, beta=0.0, seed=seed)
    if args.ferro:
        couplings = ferromagnetic_couplings(base)
    else:
        couplings = sample_ea_couplings(base, args.distribution, seed)
    return dataclasses.replace(base, couplings=couplings)


def cmd_disorder(args: argparse.Namespace) -> int:
    """Edwards–Anderson realizations: log Z and q per seed and temperature."""
    from .coarsegrain2d import disordered_run
    from .coarsegrain3d import MAX_DISORDER_SIDE
    from .reference import brute_force

    if args.realization and args.ferro:
        raise UsageError("--realization and --ferro are mutually exclusive")
    if args.realizations < 1:
        raise UsageError(f"--realizations must be >= 1, got {args.realizations}")
    settings, cfg = _resolve(args)
    if args.realization:
        seeds = [_realization(args, 0).seed]
    else:
        first = args.seed if args.seed is not None else 0
        seeds = list(range(first, first + args.realizations))
    field = args.field if args.field is not None else settings.field_m
    metrics = _metrics(args, settings)
    out = _out_dir(args, settings)
    started_at = now_iso()

    rows, diagnostics = [], []
    for seed in seeds:
        realization = _realization(args, seed)
        if realization.dim == 3 and realization.n > MAX_DISORDER_SIDE:
            raise UsageError(f"3D disordered runs are limited to n <= {MAX_DISORDER_SIDE}")
        if args.check_brute:
            _check_brute_size(realization.dim, realization.L)
        if not args.realization:
            save_disorder(realization, out / "realizations" / f"seed_{seed}.json")
        for T in args.temps:
            spec = dataclasses.replace(realization, beta=1.0 / T, field=field)
            if args.gauge_seed is not None:
                spec = gauge_transform(spec, random_gauge(spec, args.gauge_seed))
            with run_context(command="disorder", seed=seed, T=T, gauge_seed=args.gauge_seed):
                result = disordered_run(spec, cfg.chi, cfg, metrics=metrics)
            delta_brute = _rel_gap(result.log_z, brute_force(spec)) if args.check_brute else None
            rows.append(
                {
                    "seed": seed,
                    "distribution": spec.couplings.distribution,
                    "dim": spec.dim,
                    "L": spec.L,
                    "chi": cfg.chi,
                    "T": T,
                    "beta": spec.beta,
                    "log_Z": result.log_z.log_abs,
                    "q": result.q,
                    "delta_brute": delta_brute,
                }
            )
            diagnostics.append({"seed": seed, "T": T, "levels": result.diagnostics()})

    summary: dict = {"realizations": len(seeds)}
    for T in args.temps:
        qs = np.array([r["q"] for r in rows if r["T"] == T], dtype=float)
        stderr = float(np.std(qs, ddof=1) / math.sqrt(len(qs))) if len(qs) > 1 else 0.0
        summary[f"q_mean@T={T:g}"] = float(np.mean(qs))
        summary[f"q_stderr@T={T:g}"] = stderr
        metrics.score(f"q_mean@T={T:g}", float(np.mean(qs)))

    metrics.finalize()
    run_seeds = {"seeds": seeds, "gauge_seed": args.gauge_seed, "als_seed": cfg.als.rng_seed}
    header = {"dim": rows[0]["dim"], "L": rows[0]["L"], "chi": cfg.chi, "field": field}
    _emit(args, settings, cfg, rows, diagnostics, started_at, run_seeds, header, summary)
    return 0


def cmd_selftest(args: argparse.Namespace) -> int:
    """Oracle and invariant checks; exit 0 iff all pass."""
    from .selftest import GROUPS, run_selftest

    results = run_selftest(args.filter, perturb=args.debug_flip_sign)
    if not results:
        raise UsageError(f"no check matches {args.filter!r}; groups are {', '.join(GROUPS)}")
    print(format_selftest(r.as_dict() for r in results))
    if args.out:
        rows = [r.as_dict() for r in results]
        manifest = build_manifest("selftest", {"args": _args_dict(args)}, __version__, {}, rows, [], now_iso())
        write_json(Path(args.out) / "selftest.json", manifest)
    return 0 if all(r.ok for r in results) else 1


# ── Parser ───────────────────────────────────────────────────────────────────


def _add_run_options(p: argparse.ArgumentParser) -> None:
    p.add_argument("--dim", type=int, choices=[2, 3], default=2, help="Lattice dimension.")
    p.add_argument("--L", dest="L", type=int, default=4, help="Levels; the torus side is 2**L.")
    p.add_argument("--chi", type=int, default=None, help="Bond dimension (default: TNS_CHI).")
    p.add_argument("--temps", type=parse_temps, required=True, help="T list 'a,b,c' or range 'start:stop:step'.")
    p.add_argument("--variant", choices=list(VARIANTS), default=None, help="Skeletonization variant.")
    p.add_argument("--field", type=float, default=None, help="External field B.")
    p.add_argument("--out", default=None, help="Output directory (default: TNS_OUTPUT_DIR).")
    p.add_argument(
        "--seed",
        type=int,
        default=None,
        help="ALS restart seed (default: TNS_ALS_SEED); for disorder, the first realization seed (default 0).",
    )
    p.add_argument("--threads", type=int, default=None, help="Worker threads for per-cell work.")
    p.add_argument("--config", default=None, help="JSON config file (TnsSettings field names).")
    p.add_argument("--verbose", action="store_true", help="Per-level diagnostics on stderr.")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tns",
        description="Tensor network skeletonization for 2D/3D Ising models.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--manifest", default=None, help="Re-run the command stored in a results JSON.")

    sub = parser.add_subparsers(dest="command")

    p_free = sub.add_parser("free-energy", help="Free energy per site over a temperature sweep.")
    _add_run_options(p_free)
    p_free.add_argument("--check-brute", action="store_true", help="Compare log Z with brute force (small lattices).")

    p_obs = sub.add_parser("observables", help="Internal energy and magnetization.")
    _add_run_options(p_obs)

    p_dis = sub.add_parser("disorder", help="Edwards–Anderson realizations and q.")
    _add_run_options(p_dis)
    p_dis.add_argument("--realizations", type=int, default=1, help="Number of seeds, starting at --seed.")
    p_dis.add_argument("--distribution", choices=list(DISTRIBUTIONS), default="pm1", help="Coupling distribution.")
    p_dis.add_argument("--ferro", action="store_true", help="All couplings +1.")
    p_dis.add_argument("--gauge-seed", type=int, default=None, help="Apply a random gauge transform.")
    p_dis.add_argument("--realization", default=None, help="Load couplings from a realization JSON.")
    p_dis.add_argument("--check-brute", action="store_true", help="Compare log Z with brute force (small lattices).")

    p_self = sub.add_parser("selftest", help="Run the oracle and invariant checks.")
    p_self.add_argument("--filter", default=None, help="Only checks whose group or name contains this.")
    p_self.add_argument("--out", default=None, help="Also write selftest.json here.")
    p_self.add_argument("--verbose", action="store_true")
    p_self.add_argument("--debug-flip-sign", action="store_true", help=argparse.SUPPRESS)

    return parser


def _from_manifest(path: str) -> argparse.Namespace:
    doc = load_manifest(path)
    args = argparse.Namespace(**doc["config"].get("args", {}))
    args.command = doc["command"]
    args.settings = doc["config"].get("settings")
    args.manifest = path
    return args


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    dispatch = {
        "free-energy": cmd_free_energy,
        "observables": cmd_observables,
        "disorder": cmd_disorder,
        "selftest": cmd_selftest,
    }

    try:
        if args.manifest:
            if args.command:
                raise UsageError("--manifest replaces the subcommand; give one or the other")
            args = _from_manifest(args.manifest)
        fn = dispatch.get(args.command)
        if fn is None:
            parser.print_help()
            return 2
        if getattr(args, "verbose", False):
            log.setLevel(logging.DEBUG)
        if args.command != "selftest" and getattr(args, "threads", None) is not None and args.threads < 1:
            raise UsageError(f"--threads must be >= 1, got {args.threads}")
        return fn(args)
    except (ResourceLimitError, ArithmeticError, np.linalg.LinAlgError) as e:
        print(f"[error] {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, OSError) as e:
        print(f"[error] {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
