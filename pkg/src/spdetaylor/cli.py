"""Command-line interface: tree calculus queries, simulation, convergence.

Subcommands:

* ``spdetaylor trees`` — derive woods along expansion paths, list active
  nodes, compute convergence orders, render forests (ASCII or DOT).
* ``spdetaylor simulate`` — integrate one trajectory per configured scheme
  and write each as a CSV file.
* ``spdetaylor converge`` — run a Monte Carlo order study and write the
  report artifacts (per-scheme CSV tables, text summary, SVG log-log plot).

Exit codes are stable: 0 success, 1 configuration or runtime error,
2 invalid tree operation, 3 assertion failure (``--assert`` with a measured
slope outside its acceptance window).

Both run commands echo the effective configuration (after command-line
overrides) into the output directory as ``config.toml``; its SHA-256 digest
is printed as the config file hash.  Reruns with the same configuration and
seed produce byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import csv
import sys
from pathlib import Path

import numpy as np

from .config import (
    Config,
    ConfigError,
    build_model,
    build_u0,
    canonical_text,
    config_hash,
    load_config,
)
from .evaluator import build_path_record, identity_check
from .harness import ExperimentSpec, emit, global_order, local_order
from .schemes import integrate
from .trees import (
    TreeError,
    active_nodes,
    derive_wood,
    parse_derivation_path,
    render,
    wood_order,
    wood_w0,
)

__all__ = ["main"]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spdetaylor",
        description=(
            "Stochastic-tree Taylor expansions for semilinear parabolic "
            "SPDEs: symbolic wood operations, one-step schemes, and Monte "
            "Carlo convergence studies."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    trees = sub.add_parser(
        "trees", help="symbolic operations on stochastic woods"
    )
    tsub = trees.add_subparsers(dest="tree_command", required=True)
    specs = [
        ("derive", "derive a wood along an expansion path and print it"),
        ("acn", "list the active-node addresses of a derived wood"),
        ("order", "convergence order of a derived wood for given exponents"),
        ("render", "render a derived wood (ascii or dot)"),
    ]
    for name, help_text in specs:
        p = tsub.add_parser(name, help=help_text)
        p.add_argument(
            "--path",
            required=True,
            help="expansion path such as \"(2,1),(4,1)\"; \"\" is the root wood",
        )
        if name == "order":
            p.add_argument("--gamma", type=float, required=True)
            p.add_argument("--delta", type=float, required=True)
        if name == "render":
            p.add_argument(
                "--format", choices=("ascii", "dot"), default="ascii"
            )

    simulate = sub.add_parser(
        "simulate", help="integrate one trajectory per scheme, write CSVs"
    )
    _add_run_flags(simulate)

    converge = sub.add_parser(
        "converge", help="Monte Carlo order study, write report artifacts"
    )
    _add_run_flags(converge)
    converge.add_argument(
        "--assert",
        dest="assert_",
        action="store_true",
        help=(
            "exit 3 if any measured slope with an acceptance window falls "
            "outside it"
        ),
    )
    converge.add_argument(
        "--identity-check",
        action="store_true",
        help=(
            "append an expansion-identity residual and quadrature bound "
            "for the root wood to the summary"
        ),
    )
    return parser


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="path to a TOML config")
    p.add_argument(
        "--seed", type=int, default=None, help="override experiment.seed"
    )
    p.add_argument(
        "--threads", type=int, default=None, help="override experiment.threads"
    )
    p.add_argument("--out", default=None, help="override output.dir")


def _load_effective(args) -> Config:
    if args.seed is not None and not 0 <= args.seed < 2**64:
        raise ConfigError("--seed must fit in 64 bits")
    if args.threads is not None and args.threads < 1:
        raise ConfigError("--threads must be >= 1")
    cfg = load_config(args.config)
    return cfg.with_overrides(
        seed=args.seed, threads=args.threads, out=args.out
    )


def _check_scheme_support(cfg: Config) -> None:
    if not cfg.experiment.time_integrals:
        needy = [s.value for s in cfg.schemes if s.needs_time_integrals]
        if needy:
            raise ConfigError(
                f"{', '.join(needy)} requires time-integral sampling; "
                "set experiment.time_integrals = true"
            )


# ---------------------------------------------------------------------------
# trees


def _cmd_trees(args) -> int:
    try:
        w = derive_wood(parse_derivation_path(args.path))
        if args.tree_command == "derive":
            sys.stdout.write(render(w, "ascii"))
            acn = active_nodes(w)
            addresses = ", ".join(f"({i},{j})" for i, j in acn)
            print(f"active nodes: {addresses or 'none'}")
        elif args.tree_command == "acn":
            for i, j in active_nodes(w):
                print(f"({i},{j})")
        elif args.tree_command == "order":
            order, witness = wood_order(w, args.gamma, args.delta)
            print(f"order = {float(order)!r} (attained by tree t{witness})")
        else:
            sys.stdout.write(render(w, args.format))
        return 0
    except (TreeError, ValueError) as exc:
        print(f"spdetaylor trees: {exc}", file=sys.stderr)
        return 2


# ---------------------------------------------------------------------------
# simulate


def _write_trajectory(path: Path, traj: np.ndarray, T: float) -> None:
    M = traj.shape[0] - 1
    h = T / M
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["step", "t"] + [f"y{i}" for i in range(1, traj.shape[1] + 1)]
        )
        for k in range(M + 1):
            writer.writerow(
                [k, repr(k * h)] + [repr(float(v)) for v in traj[k]]
            )


def _cmd_simulate(args) -> int:
    cfg = _load_effective(args)
    _check_scheme_support(cfg)
    model = build_model(cfg.model)
    u0 = build_u0(cfg.model, model)
    exp = cfg.experiment
    out = Path(cfg.output.dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for scheme in cfg.schemes:
        # One generator per scheme, all keyed identically, so schemes with
        # matching noise requirements see the same increments.
        rng = np.random.Generator(np.random.Philox(key=[exp.seed, 0]))
        traj = integrate(scheme, model, u0, exp.t_final, exp.steps, rng)
        path = out / f"trajectory_{scheme.value}.csv"
        _write_trajectory(path, traj, exp.t_final)
        written.append(path)
    echo = out / "config.toml"
    echo.write_text(canonical_text(cfg))
    written.append(echo)
    print(f"seed = {exp.seed}")
    print(f"config file hash = {config_hash(cfg)}")
    for p in written:
        print(f"wrote {p}")
    return 0


# ---------------------------------------------------------------------------
# converge


def _identity_lines(model, u0, exp) -> list[str]:
    M0 = exp.ladder[0] if exp.ladder else 16
    h = exp.t_final / M0
    substeps = 512
    rng = np.random.Generator(np.random.Philox(key=[exp.seed, 0]))
    record = build_path_record(model, u0, h, substeps, rng)
    res = identity_check(wood_w0(), (2, 1), model, record, 0.0, h)
    return [
        "identity check: root wood vs its expansion at (2,1) over "
        f"[0, {h:g}] ({substeps} substeps)",
        f"  residual = {float(res.residual):.6e}",
        f"  quadrature bound = {float(res.quad_estimate):.6e}",
        f"  increment norm = {float(res.du_norm):.6e}",
    ]


def _cmd_converge(args) -> int:
    cfg = _load_effective(args)
    _check_scheme_support(cfg)
    model = build_model(cfg.model)
    u0 = build_u0(cfg.model, model)
    exp = cfg.experiment
    spec = ExperimentSpec(
        model=model,
        u0=u0,
        schemes=cfg.schemes,
        ladder=exp.ladder,
        paths=exp.paths,
        seed=exp.seed,
        mode=exp.mode,
        T=exp.t_final,
        threads=exp.threads,
        reference=exp.reference,
        p=exp.p,
    )
    result = local_order(spec) if exp.mode == "local" else global_order(spec)
    out = Path(cfg.output.dir)
    files = emit(result, out, formats=cfg.output.formats)
    if args.identity_check:
        lines = _identity_lines(model, u0, exp)
        with (out / "summary.txt").open("a") as fh:
            fh.write("\n".join(lines) + "\n")
        for line in lines:
            print(line)
    echo = out / "config.toml"
    echo.write_text(canonical_text(cfg))
    files.append(echo)
    print(f"seed = {exp.seed}")
    print(f"config file hash = {config_hash(cfg)}")
    for rep in result.reports:
        print(
            f"{rep.scheme.value}: slope {rep.slope:.4f} "
            f"+/- {rep.ci95:.4f} (95% CI)"
        )
    for p in files:
        print(f"wrote {p}")
    if args.assert_:
        failures = [
            rep
            for rep in result.reports
            if rep.window is not None
            and not rep.window[0] <= rep.slope <= rep.window[1]
        ]
        if failures:
            for rep in failures:
                print(
                    f"assertion failed: {rep.scheme.value} slope "
                    f"{rep.slope:.4f} outside window "
                    f"[{rep.window[0]}, {rep.window[1]}]",
                    file=sys.stderr,
                )
            return 3
        print("assertions passed")
    return 0


# ---------------------------------------------------------------------------


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 1
        return 0 if code == 0 else 1
    if args.command == "trees":
        return _cmd_trees(args)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        return _cmd_converge(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"spdetaylor {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
