"""
``lsl-lab`` command line.

    lsl-lab verify|scan|gram|solve CONFIG [--eps ...] [--lambda ...] [--out ...] [--seed ...]

Exit codes: 0 all checks passed, 1 an identity check failed, 2 usage or
configuration error, 3 numerical conditioning (ill-conditioned solve or a
vanishing Fredholm determinant).
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .config import ConfigError, ExperimentConfig, load_config, override
from .errors import ConditioningError, InvalidArgumentError
from .hilbert import SeparablePotential
from .lsl import fredholm, solve, t_column
from .report import write_report
from .verify import epsilon_scan, identity_suite, moller_gram

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_CONDITIONING = 0, 1, 2, 3

VERIFY_HEADER = ("lemma_id", "eps", "n", "k", "E_n", "E_k", "residual", "tolerance", "passed")
SCAN_HEADER = ("eps", "n", "k", "E_n", "E_k", "d_nk", "A_re", "A_im", "I_re", "I_im", "gw_gap")
GRAM_HEADER = ("eps", "i", "j", "re", "im")
GRAM_JSON_HEADER = ("eps", "deviation", "re", "im")
SOLVE_HEADER = ("eps", "i", "k", "psi_re", "psi_im", "T_re", "T_im")
SOLVE_FREDHOLM = ("fredholm_re", "fredholm_im")


def _meta(command: str, cfg: ExperimentConfig, grid) -> dict:
    p = cfg.potential
    return {
        "command": command,
        "version": __version__,
        "N": grid.size,
        "kmax": cfg.grid.kmax,
        "scheme": cfg.grid.scheme,
        "potential": p.kind,
        "lambda": p.coupling,
        "beta": p.beta,
        "sigma": p.sigma,
        "profile": p.profile,
        "seed": cfg.seed,
        "route": cfg.route,
        "eps_list": list(cfg.eps_list),
    }


def cmd_verify(cfg: ExperimentConfig) -> int:
    grid = cfg.build_grid()
    V = cfg.build_potential(grid)
    pairs = cfg.resolve_pairs(grid)
    route = cfg.route if cfg.route != "auto" else "ls-solve"
    rows = []
    for eps in cfg.eps_list:
        try:
            reports = identity_suite(grid, V, eps, pairs, seed=cfg.seed, route=route, gram=cfg.gram)
        except ConditioningError as exc:
            exc.eps = eps if exc.eps is None else exc.eps
            raise
        for r in reports:
            c = r.context
            rows.append({
                "lemma_id": r.lemma_id, "eps": eps, "n": c["n"], "k": c["k"],
                "E_n": c["E_n"], "E_k": c["E_k"],
                "residual": r.residual, "tolerance": r.tolerance, "passed": r.passed,
            })
    meta = _meta("verify", cfg, grid)
    meta["pairs"] = [list(p) for p in pairs]
    write_report(cfg.output_format, VERIFY_HEADER, rows, meta, cfg.output_path)
    failed = [r for r in rows if not r["passed"]]
    print(f"verify: {len(rows)} checks, {len(failed)} failed", file=sys.stderr)
    for r in failed:
        print(
            f"  FAIL {r['lemma_id']} eps={r['eps']:.3g} n={r['n']} k={r['k']} "
            f"residual={r['residual']:.3e} > {r['tolerance']:.0e}",
            file=sys.stderr,
        )
    return EXIT_FAIL if failed else EXIT_OK


def cmd_scan(cfg: ExperimentConfig) -> int:
    grid = cfg.build_grid()
    V = cfg.build_potential(grid)
    pairs = cfg.resolve_pairs(grid)
    records = epsilon_scan(grid, V, cfg.eps_list, pairs, route=cfg.route)
    rows = []
    for rec in sorted(records, key=lambda r: -r.eps):
        for p in sorted(rec.pairs, key=lambda p: (p.n, p.k)):
            rows.append({
                "eps": rec.eps, "n": p.n, "k": p.k, "E_n": p.E_n, "E_k": p.E_k, "d_nk": p.d_nk,
                "A_re": p.A_nk.real, "A_im": p.A_nk.imag, "I_re": p.I_nk.real, "I_im": p.I_nk.imag,
                "gw_gap": p.gw_gap,
            })
    meta = _meta("scan", cfg, grid)
    meta["pairs"] = [list(p) for p in sorted(pairs)]
    meta["level_spacing"] = {f"{n}:{k}": max(grid.level_spacing(n), grid.level_spacing(k)) for n, k in sorted(pairs)}
    write_report(cfg.output_format, SCAN_HEADER, rows, meta, cfg.output_path)
    print(f"scan: {len(records)} eps values x {len(pairs)} pairs", file=sys.stderr)
    return EXIT_OK


def cmd_gram(cfg: ExperimentConfig) -> int:
    grid = cfg.build_grid()
    V = cfg.build_potential(grid)
    rows, summary = [], []
    for eps in cfg.eps_list:
        gram, dev = moller_gram(grid, V, eps, cfg.route)
        summary.append({"eps": eps, "deviation": dev})
        print(f"gram: eps={eps:.17g} deviation={dev:.17g}", file=sys.stderr)
        if cfg.output_format == "json":
            rows.append({"eps": eps, "deviation": dev, "re": gram.real, "im": gram.imag})
        else:
            for i in range(grid.size):
                for j in range(grid.size):
                    rows.append({"eps": eps, "i": i, "j": j, "re": gram[i, j].real, "im": gram[i, j].imag})
    meta = _meta("gram", cfg, grid)
    meta["summary"] = summary
    header = GRAM_JSON_HEADER if cfg.output_format == "json" else GRAM_HEADER
    write_report(cfg.output_format, header, rows, meta, cfg.output_path)
    return EXIT_OK


def cmd_solve(cfg: ExperimentConfig, incident: int | None = None) -> int:
    grid = cfg.build_grid()
    V = cfg.build_potential(grid)
    k = incident if incident is not None else cfg.incident
    if k is None:
        k = grid.size // 4
    if not 0 <= k < grid.size:
        raise ConfigError(f"incident index {k} outside [0, {grid.size})")
    separable = isinstance(V, SeparablePotential)
    header = SOLVE_HEADER + (SOLVE_FREDHOLM if separable else ())
    rows = []
    meta = _meta("solve", cfg, grid)
    meta["incident"] = k
    meta["fredholm"] = []
    for eps in cfg.eps_list:
        sol = solve(grid, V, k, eps, cfg.route)
        t = t_column(grid, V, sol)
        delta = fredholm(grid, V, sol.energy, eps) if separable else None
        if separable:
            meta["fredholm"].append({"eps": eps, "re": delta.real, "im": delta.imag})
        for i in range(grid.size):
            row = {
                "eps": eps, "i": i, "k": float(grid.momenta[i]),
                "psi_re": sol.psi[i].real, "psi_im": sol.psi[i].imag,
                "T_re": t[i].real, "T_im": t[i].imag,
            }
            if separable:
                row["fredholm_re"], row["fredholm_im"] = delta.real, delta.imag
            rows.append(row)
    if not separable:
        del meta["fredholm"]
    write_report(cfg.output_format, header, rows, meta, cfg.output_path)
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "scan": cmd_scan, "gram": cmd_gram, "solve": cmd_solve}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lsl-lab", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("config", help="experiment configuration file")
    parser.add_argument("--eps", help="comma-separated, strictly decreasing eps values")
    parser.add_argument("--lambda", dest="coupling", type=float, help="coupling strength")
    parser.add_argument("--out", help="output file ('-' for stdout)")
    parser.add_argument("--seed", type=int)
    parser.add_argument("--format", choices=("csv", "json"))
    parser.add_argument("--route", help="auto, ls-solve, low-solve or separable-closed")
    parser.add_argument("--incident", type=int, help="incident channel for `solve`")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        cfg = load_config(args.config)
        cfg = override(cfg, eps=args.eps, coupling=args.coupling, out=args.out, seed=args.seed,
                       fmt=args.format, route=args.route)
        if args.command == "solve":
            return cmd_solve(cfg, args.incident)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"lsl-lab: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConditioningError as exc:
        parts = [f"lsl-lab: numerical conditioning: {exc}"]
        if exc.eps is not None:
            parts.append(f"eps={exc.eps!r}")
        if exc.fredholm is not None:
            parts.append(f"fredholm={exc.fredholm!r}")
        if np.isfinite(exc.condition):
            parts.append(f"condition={exc.condition:.3e}")
        print("; ".join(parts), file=sys.stderr)
        return EXIT_CONDITIONING
    except InvalidArgumentError as exc:
        print(f"lsl-lab: invalid argument: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except BrokenPipeError:
        # reader closed early (e.g. `| head`); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
