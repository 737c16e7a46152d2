"""Command-line front end.

Every subcommand writes CSV/JSON (and, unless ``--no-plots``, PNG figures)
into the output directory and prints a short summary.  The output directory
is ``--out``, else ``$POSBRIDGE_OUT``, else ``./posbridge-out``; nothing else
is read from the environment.

Exit status: 0 all verdicts pass, 1 a check failed, 2 usage or configuration
error, 3 a numerical guard tripped.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .errors import PosBridgeError
from .report import DiagnosticReport, dump_json, version_stamp
from .steps import make_step_law

OUT_ENV = "POSBRIDGE_OUT"
EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_GUARD = 0, 1, 2, 3


class UsageError(Exception):
    pass


def parse_law(text: str):
    """Preset name, ``"-1:1/4,0:1/2,1:1/4"`` pairs, or a JSON object."""
    text = text.strip()
    if text.startswith("{"):
        return make_step_law(json.loads(text))
    if ":" in text:
        pairs = []
        for part in text.split(","):
            k, _, p = part.partition(":")
            pairs.append((int(k), p.strip()))
        return make_step_law(pairs)
    try:
        return make_step_law(text)
    except KeyError as e:
        raise UsageError(str(e)) from None


def read_config(path) -> dict[str, str]:
    """``key = value`` lines; ``#`` starts a comment.  Keys use the long flag
    names with ``-`` or ``_``."""
    out = {}
    with open(path) as fh:
        for i, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{i}: expected key=value")
            k, v = (s.strip() for s in line.split("=", 1))
            out[k.replace("-", "_")] = v
    return out


def _int_list(text: str) -> list[int]:
    return [int(float(t)) for t in text.replace(";", ",").split(",") if t.strip()]


def _bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"not a boolean: {text!r}")


# ---------------------------------------------------------------------------
# parser


def _common(p: argparse.ArgumentParser, law: bool = True) -> None:
    g = p.add_argument_group("common")
    if law:
        g.add_argument("--law", default="lazy", help="preset name, 'k:p,...' pairs or a JSON object")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--workers", type=int, default=1, help="threads for Monte Carlo chunks; results do not depend on it")
    g.add_argument("--no-plots", dest="no_plots", action="store_true", default=False)
    g.add_argument("--out", default=None, help=f"output directory (default ${OUT_ENV} or ./posbridge-out)")
    g.add_argument("--config", default=None, help="key=value file; flags given on the command line win")


def build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(prog="posbridge", description="Exact and desk-scale checks for random walks conditioned to stay positive.")
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True
    subs = {}

    p = sub.add_parser("kernel", help="tabulate the killed kernel")
    _common(p)
    p.add_argument("--n", type=int, default=10)
    p.add_argument("--xmax", type=int, default=10)
    p.add_argument("--ymax", type=int, default=None)
    p.add_argument("--strictness", choices=("weak", "strict"), default="weak")
    subs["kernel"] = p

    p = sub.add_parser("renewal", help="tabulate the renewal functions")
    _common(p)
    p.add_argument("--xmax", type=int, default=100)
    p.add_argument("--direction", choices=("descending", "ascending"), default="descending")
    subs["renewal"] = p

    p = sub.add_parser("identities", help="exact identity suite")
    _common(p)
    p.add_argument("--nmax", type=int, default=20, help="largest n for duality")
    p.add_argument("--cyclic-max", dest="cyclic_max", type=int, default=30)
    p.add_argument("--xmax", type=int, default=20)
    p.add_argument("--Nmax", dest="N_max", type=int, default=15)
    p.add_argument("--vmax", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-10)
    subs["identities"] = p

    p = sub.add_parser("sample-bridge", help="sample positive bridges")
    _common(p)
    p.add_argument("--N", type=int, default=8)
    p.add_argument("--x", type=int, default=0)
    p.add_argument("--y", type=int, default=0)
    p.add_argument("--samples", type=int, default=10)
    p.add_argument("--strictness", choices=("weak", "strict"), default="weak")
    p.add_argument("--record", type=_int_list, default=None, help="times to keep (default all)")
    subs["sample-bridge"] = p

    p = sub.add_parser("verify-llt", help="local limit theorem ratios")
    _common(p)
    p.add_argument("--n-list", dest="n_list", type=_int_list, default=[1000, 5000, 10000])
    p.add_argument("--small-n-list", dest="small_n_list", type=_int_list, default=[5000, 10000, 20000])
    p.add_argument("--tail-n-list", dest="tail_n_list", type=_int_list, default=[1000, 5000, 10000])
    p.add_argument("--c", type=float, default=1.0)
    subs["verify-llt"] = p

    p = sub.add_parser("stone", help="interval sandwich bounds for a walk with a density")
    _common(p, law=False)
    p.add_argument("--density", choices=("gaussian", "pareto"), default="gaussian")
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--kbar", type=int, default=2)
    p.add_argument("--delta", type=float, default=0.25)
    p.add_argument("--halvings", type=int, default=3)
    p.add_argument("--h", type=float, default=1 / 256)
    p.add_argument("--L", type=float, default=12.0)
    p.add_argument("--mc-paths", dest="mc_paths", type=int, default=1_000_000)
    p.add_argument("--alpha-prime", dest="alpha_prime", type=float, default=1.5)
    subs["stone"] = p

    p = sub.add_parser("verify-invariance", help="invariance principle harness")
    _common(p)
    p.add_argument("--N", type=int, default=4096)
    p.add_argument("--eps", type=float, default=0.5)
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--strictness", choices=("weak", "strict"), default="strict")
    p.add_argument("--uniff-N", dest="uniff_N", type=_int_list, default=[256, 1024, 4096])
    p.add_argument("--uniff-eps", dest="uniff_eps", type=float, default=0.25)
    subs["verify-invariance"] = p
    return parser, subs


def _apply_config(argv: list[str], parser, subs) -> argparse.Namespace:
    args = parser.parse_args(argv)
    if not args.config:
        return args
    cfg = read_config(args.config)
    sp = subs[args.command]
    dests = {}
    for a in sp._actions:
        dests[a.dest] = a
        for o in a.option_strings:
            dests[o.lstrip("-").replace("-", "_")] = a
    unknown = sorted(set(cfg) - set(dests) - {"config"})
    if unknown:
        raise UsageError(f"unknown config keys for {args.command}: {', '.join(unknown)}")
    conv = {}
    for k, v in cfg.items():
        if k == "config":
            continue
        act = dests[k]
        k = act.dest
        if isinstance(act, argparse._StoreTrueAction):
            conv[k] = _bool(v)
        elif act.type is not None:
            try:
                conv[k] = act.type(v)
            except (TypeError, ValueError) as e:
                raise UsageError(f"bad value for {k}: {v!r} ({e})") from None
        else:
            conv[k] = v
        if act.choices is not None and conv[k] not in act.choices:
            raise UsageError(f"{k} must be one of {sorted(act.choices)}")
    sp.set_defaults(**conv)
    # re-parse so that explicit flags override the file
    return parser.parse_args(argv)


# ---------------------------------------------------------------------------
# subcommands


def _out_dir(args) -> Path:
    d = Path(args.out or os.environ.get(OUT_ENV) or "posbridge-out")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _config_of(args) -> dict:
    d = {k: v for k, v in vars(args).items() if k not in ("out", "workers")}
    if "law" in d and not isinstance(d["law"], str):
        d["law"] = d["law"].to_dict()
    return d


def _emit(rep: DiagnosticReport, out: Path, stem: str, args) -> int:
    rep.config = dict(rep.config, cli=_config_of(args))
    rep.to_csv(out / f"{stem}.csv")
    rep.to_json(out / f"{stem}.json")
    for name, ok in rep.verdicts.items():
        print(f"{'PASS' if ok else 'FAIL'}  {name}")
    for c in rep.checks():
        g = rep.gaps(c)
        print(f"      {c}: max gap {g.max():.3g} (final {g[-1]:.3g})")
    for n in rep.notes:
        print(f"      {n}")
    print(f"wrote {out / stem}.csv, {out / stem}.json")
    return EXIT_PASS if rep.passed else EXIT_FAIL


def cmd_kernel(args, out: Path) -> int:
    from .kernels import q_plus

    t = q_plus(args.law, args.n, args.xmax, args.ymax, args.strictness)
    t.to_csv(out / "kernel.csv")
    dump_json({"config": _config_of(args), "stamp": version_stamp(), "y_max": t.y_max, "max_leak": float(t.leak.max())}, out / "kernel.json")
    print(f"kernel n={args.n} x<= {args.xmax} y<= {t.y_max} ({args.strictness}); max leak {float(t.leak.max()):.3g}")
    print(f"wrote {out / 'kernel.csv'}")
    return EXIT_PASS


def cmd_renewal(args, out: Path) -> int:
    from .fluctuation import renewal_for

    r = renewal_for(args.law, args.direction, args.xmax)
    r.to_csv(out / "renewal.csv")
    dump_json({"config": _config_of(args), "stamp": version_stamp(), "zeta": r.zeta}, out / "renewal.json")
    print(f"renewal ({args.direction}) x<= {args.xmax}; zeta = {r.zeta!r}; V(1) = {float(r.V[1])!r}")
    print(f"wrote {out / 'renewal.csv'}")
    return EXIT_PASS


def cmd_identities(args, out: Path) -> int:
    from .suites import identity_suite

    rep = identity_suite(args.law, args.nmax, args.xmax, args.N_max, args.cyclic_max, args.vmax, args.tol)
    return _emit(rep, out, "identities", args)


def cmd_sample_bridge(args, out: Path) -> int:
    from .samplers import sample_bridges

    b = sample_bridges(args.law, args.x, args.y, args.N, args.samples, args.strictness, args.seed, record=args.record, workers=args.workers)
    b.config = dict(b.config, cli=_config_of(args), stamp=version_stamp())
    b.to_csv(out / "bridge.csv")
    summ = b.summary()
    summ["config"] = b.config
    dump_json(summ, out / "bridge.json")
    floor = 0 if args.strictness == "weak" else 1
    if len(b.times) == args.N + 1:
        ok = bool((b.values[:, 1:-1] >= floor).all())
    else:
        ok = bool((b.path_min >= min(floor, args.x, args.y)).all())
    print(f"{'PASS' if ok else 'FAIL'}  constraint ({len(b)} bridges {args.x} -> {args.y}, N={args.N}, {args.strictness})")
    print(f"      max normalisation residual {b.max_norm_residual:.3g}")
    print(f"wrote {out / 'bridge.csv'}, {out / 'bridge.json'}")
    return EXIT_PASS if ok else EXIT_FAIL


def cmd_verify_llt(args, out: Path) -> int:
    from .suites import llt_suite

    rep = llt_suite(args.law, args.n_list, args.small_n_list, args.tail_n_list, args.c)
    if not args.no_plots:
        from .plotting import ratio_plot

        ratio_plot(rep, out / "llt.png", [c for c in rep.checks() if c != "C_minus_round"])
    return _emit(rep, out, "llt", args)


def cmd_stone(args, out: Path) -> int:
    from .suites import stone_suite

    rep, traces, mcs = stone_suite(
        args.density, args.n, args.kbar, delta0=args.delta, halvings=args.halvings, h=args.h, L=args.L,
        mc_paths=args.mc_paths, seed=args.seed, alpha_prime=args.alpha_prime,
    )
    for i, tr in enumerate(traces):
        tr.to_csv(out / f"stone_trace_{i}.csv")
    if not args.no_plots:
        from .plotting import sandwich_plot

        for i, (tr, mc) in enumerate(zip(traces, mcs)):
            sandwich_plot(tr, out / f"stone_trace_{i}.png", mc)
    return _emit(rep, out, "stone", args)


def cmd_verify_invariance(args, out: Path) -> int:
    from .invariance import marginal_csv
    from .suites import invariance_suite

    rep, samples, control = invariance_suite(
        args.law, args.N, args.eps, args.samples, args.seed, uniff_N=args.uniff_N, uniff_eps=args.uniff_eps,
        strictness=args.strictness, workers=args.workers,
    )
    marginal_csv(samples, out / "invariance_marginal.csv")
    if not args.no_plots:
        from .plotting import gap_plot, marginal_plot

        from .steps import norming

        marginal_plot(samples, args.eps, out / "invariance_marginal.png", control, a_N=norming(args.law, None, args.N))
        gap_plot([(r.n, r.observed) for r in rep.rows if r.check_name == "uniff_gap"], out / "invariance_uniff.png")
    return _emit(rep, out, "invariance", args)


COMMANDS = {
    "kernel": cmd_kernel,
    "renewal": cmd_renewal,
    "identities": cmd_identities,
    "sample-bridge": cmd_sample_bridge,
    "verify-llt": cmd_verify_llt,
    "stone": cmd_stone,
    "verify-invariance": cmd_verify_invariance,
}


def _error(code: str, msg: str, status: int) -> int:
    print(json.dumps({"error": code, "message": msg, "exit_status": status}), file=sys.stderr)
    return status


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser, subs = build_parser()
    try:
        args = _apply_config(argv, parser, subs)
    except SystemExit as e:  # argparse already printed the usage message
        return int(e.code) if isinstance(e.code, int) else EXIT_USAGE
    except (UsageError, OSError) as e:
        return _error("usage", str(e), EXIT_USAGE)
    try:
        if getattr(args, "workers", 1) < 1:
            raise UsageError("--workers must be >= 1")
        if hasattr(args, "law"):
            args.law = parse_law(args.law) if isinstance(args.law, str) else args.law
        out = _out_dir(args)
        return COMMANDS[args.command](args, out)
    except UsageError as e:
        return _error("usage", str(e), EXIT_USAGE)
    except PosBridgeError as e:
        return _error(e.code, str(e), e.exit_status)
    except ValueError as e:
        return _error("invalid_value", str(e), EXIT_USAGE)
    except (FloatingPointError, OverflowError, ZeroDivisionError) as e:
        return _error("numerical", str(e), EXIT_GUARD)


if __name__ == "__main__":
    sys.exit(main())
