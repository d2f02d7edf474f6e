"""Command-line front end.

    halfeig <command> --config problem.json --out results/ [--seed N] [--threads N]

Each command writes ``result.json`` plus CSV tables into the output
directory.  Grid functions are written with columns ``x[,y],value``.
Exit status: 0 success, 2 classified unsolvable, 1 failure.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import kernels, set_threads
from .adjoint import measure_distance, measure_set, minimax_certificate, solvability_functional
from .config import ConfigError, ProblemConfig
from .dirichlet import SolveOptions, abp_ratio, solve_bellman_dirichlet, verify_comparison
from .eigen import (EigenOptions, blowup_estimate, principal_half_eigen_minus,
                    principal_half_eigen_plus)
from .mesh import sup_norm
from .operator import check_hypotheses, dual
from .resonance import UNSOLVABLE, ResonanceOptions, solve_at_resonance, t_star

log = logging.getLogger("halfeig")

COMMANDS = ("eigen", "solve", "resonance", "tstar", "measures", "check", "sweep")
EXIT_OK, EXIT_FAIL, EXIT_UNSOLVABLE = 0, 1, 2


def num(value, tol):
    """A reported number together with the tolerance it was computed to."""
    def clean(v):
        v = float(v)
        return v if math.isfinite(v) else None
    return {"value": clean(value), "tol": clean(tol)}


class Output:
    def __init__(self, root: Path, grid):
        self.root = root
        self.grid = grid
        root.mkdir(parents=True, exist_ok=True)

    def grid_function(self, name: str, values):
        axes = ["x", "y"][: self.grid.dim]
        with open(self.root / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(axes + ["value"])
            for xy, v in zip(self.grid.coords, values):
                w.writerow([repr(float(c)) for c in xy] + [repr(float(v))])

    def table(self, name: str, header, rows):
        with open(self.root / name, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v
                            for v in r])

    def result(self, doc: dict):
        text = json.dumps(doc, indent=2, allow_nan=False)
        (self.root / "result.json").write_text(text + "\n")


def _solve_opts(cfg) -> SolveOptions:
    return SolveOptions(residual_tol=cfg.tol["solve_residual_tol"],
                        blowup_threshold=cfg.tol["blowup_threshold"])


def _eigen_opts(cfg) -> EigenOptions:
    return EigenOptions(lambda_tol=cfg.tol["lambda_tol"], residual_tol=cfg.tol["residual_tol"],
                        solve=_solve_opts(cfg))


def _resonance_opts(cfg) -> ResonanceOptions:
    t = cfg.tol
    return ResonanceOptions(class_tol=t.get("class_tol"), gap_tol=t["gap_tol"],
                            steps=cfg.options["steps"], cont_tol=t["cont_tol"],
                            res_tol=t["res_tol"], blowup_threshold=t["blowup_threshold"],
                            solve=_solve_opts(cfg))


def _lam_tol(cfg, lam):
    return cfg.tol["lambda_tol"] * (1 + abs(lam))


def _pair(cfg, op, grid):
    opts = _eigen_opts(cfg)
    return principal_half_eigen_plus(op, grid, opts), principal_half_eigen_minus(op, grid, opts)


def _measures(cfg, op, grid, eig):
    t = cfg.tol
    return measure_set(op, grid, eig, candidates=cfg.candidates(), tie_tol=t.get("tie_tol"),
                       identity_tol=t["identity_tol"], dedup_tol=t["dedup_tol"])


# ---------------------------------------------------------------- commands


def cmd_eigen(cfg, op, grid, out, seed):
    plus, minus = _pair(cfg, op, grid)
    doc = {
        "lambda_plus": num(plus.lam, _lam_tol(cfg, plus.lam)),
        "lambda_minus": num(minus.lam, _lam_tol(cfg, minus.lam)),
        "residual_plus": num(plus.residual, cfg.tol["residual_tol"] * (1 + abs(plus.lam))),
        "residual_minus": num(minus.residual, cfg.tol["residual_tol"] * (1 + abs(minus.lam))),
        "iterations_plus": plus.iters,
        "iterations_minus": minus.iters,
    }
    if cfg.options["blowup"]:
        offsets = sorted(cfg.options["blowup_offsets"], reverse=True)
        fits = {}
        for name, o, ref in (("plus", op, plus), ("minus", dual(op), minus)):
            f = np.where(grid.interior, 1.0, 0.0)
            fit = blowup_estimate(o, grid, f, [ref.lam - d for d in offsets],
                                  opts=_solve_opts(cfg))
            fits[name] = fit
            doc[f"blowup_lambda_{name}"] = num(fit.lambda1_est, abs(fit.lambda1_est - ref.lam))
        out.table("blowup.csv", ["branch", "lambda", "inv_norm"],
                  [(b, lam, inv) for b, fit in fits.items()
                   for lam, inv in zip(fit.lambdas, fit.inv_norms)])
    out.grid_function("phi_plus.csv", plus.phi)
    out.grid_function("phi_minus.csv", minus.phi)
    return doc, EXIT_OK


def cmd_solve(cfg, op, grid, out, seed):
    if "lambda" not in cfg.data:
        raise ConfigError("lambda: required by this command")
    lam = cfg["lambda"]
    f = cfg.function("f", grid)
    res = solve_bellman_dirichlet(op, grid, lam, f, _solve_opts(cfg))
    doc = {"lambda": num(lam, 0.0), "status": res.status,
           "policy_iterations": len(res.policy_switches)}
    if res.converged:
        doc["residual"] = num(res.residual, cfg.tol["solve_residual_tol"])
        doc["sup_norm"] = num(res.norm, res.residual)
        out.grid_function("u.csv", res.u)
        return doc, EXIT_OK
    if res.status in ("blowup", "singular"):
        doc["message"] = "no bounded solution at this lambda (at or above a half-eigenvalue?)"
        return doc, EXIT_UNSOLVABLE
    return doc, EXIT_FAIL


def cmd_resonance(cfg, op, grid, out, seed):
    plus, minus = _pair(cfg, op, grid)
    ms = _measures(cfg, op, grid, plus)
    f = cfg.function("f", grid)
    v = solve_at_resonance(op, grid, f, plus, ms, _resonance_opts(cfg), eig_minus=minus)
    doc = {
        "lambda_plus": num(plus.lam, _lam_tol(cfg, plus.lam)),
        "classification": v.classification,
        "T": num(v.T_value, v.class_tol),
        "gap": num(v.gap, _lam_tol(cfg, plus.lam) + _lam_tol(cfg, minus.lam)),
        "continuation": v.outcome,
        "steps": len(v.continuation_log),
        "message": v.message,
    }
    out.table("continuation.csv", ["lambda", "sup_norm", "k"],
              [(s.lam, s.norm, k) for s, k in zip(v.continuation_log, v.k_estimates)])
    if v.solution is not None:
        doc["residual"] = num(v.residual, cfg.tol["res_tol"])
        out.grid_function("solution.csv", v.solution)
    return doc, EXIT_UNSOLVABLE if v.classification == UNSOLVABLE else EXIT_OK


def cmd_tstar(cfg, op, grid, out, seed):
    plus, minus = _pair(cfg, op, grid)
    ms = _measures(cfg, op, grid, plus)
    h = cfg.function("h", grid, required=False)
    if h is None:
        h = cfg.function("f", grid)
    r = t_star(op, grid, h, plus, ms, _resonance_opts(cfg), eig_minus=minus,
               bisect_tol=cfg.tol["bisect_tol"])
    doc = {
        "t_star": num(r.t_star, cfg.tol.get("class_tol", 1e-4 * (1 + sup_norm(h)))),
        "bisection": num(r.bisection, r.bisect_tol),
        "agrees": r.agrees,
        "monotone": r.monotone,
    }
    out.table("probes.csv", ["t", "solvable", "k_limit"],
              [(t, int(ok), k) for t, ok, k in r.probes])
    return doc, EXIT_OK if r.agrees else EXIT_FAIL


def cmd_measures(cfg, op, grid, out, seed):
    plus = principal_half_eigen_plus(op, grid, _eigen_opts(cfg))
    ms = _measures(cfg, op, grid, plus)
    rep = minimax_certificate(op, grid, ms, plus, trials=cfg.options["trials"],
                              cert_tol=cfg.tol.get("cert_tol"), seed=seed)
    nm = len(ms)
    dist = [[measure_distance(grid, plus.phi, a, b) for b in ms.extremes] for a in ms.extremes]
    doc = {
        "lambda_plus": num(plus.lam, _lam_tol(cfg, plus.lam)),
        "complete": ms.complete,
        "measures": [{"provenance": m.provenance,
                      "frozen_lambda": num(m.frozen_lambda, _lam_tol(cfg, m.frozen_lambda)),
                      "identity_residual": num(m.identity_residual, cfg.tol["identity_tol"]),
                      "max_excess": num(e, rep.cert_tol)}
                     for m, e in zip(ms.extremes, rep.max_excess)],
        "l1_distances": [[num(dist[i][j], cfg.tol["dedup_tol"]) for j in range(nm)]
                         for i in range(nm)],
        "rejected": ms.rejected,
        "certificate": {"passed": rep.passed, "failures": rep.failures,
                        "at_eigenfunction": num(rep.at_eigenfunction, 1e-8 * (1 + abs(plus.lam))),
                        "random_weights": num(rep.random_weights, 1e-8 * (1 + abs(plus.lam)))},
    }
    if "f" in cfg.data:
        doc["T"] = num(solvability_functional(cfg.function("f", grid), ms, grid),
                       cfg.tol["identity_tol"])
    for i, m in enumerate(ms.extremes):
        out.grid_function(f"phi_star_{i}.csv", m.phi_star)
    out.grid_function("phi_plus.csv", plus.phi)
    return doc, EXIT_OK if rep.passed else EXIT_FAIL


def cmd_check(cfg, op, grid, out, seed):
    trials = cfg.options["trials"]
    hyp = check_hypotheses(op, grid, trials=trials, seed=seed)
    plus, minus = _pair(cfg, op, grid)
    below = verify_comparison(op, grid, plus.lam - 0.5, trials=trials, seed=seed, eig=plus)
    above = verify_comparison(op, grid, plus.lam + 0.5, trials=trials, seed=seed, eig=plus)
    f = cfg.function("f", grid, required=False)
    if f is None:
        f = np.where(grid.interior, 1.0, 0.0)
    d0 = min(1.0, (minus.lam - plus.lam) / 2) if minus.lam > plus.lam else 1.0
    lams = [plus.lam - d0 * 0.5**j for j in range(cfg.options["steps"])]
    ratios = [abp_ratio(op, grid, lam, f, plus.lam, _solve_opts(cfg)) for lam in lams]
    out.table("abp.csv", ["lambda", "ratio"], list(zip(lams, ratios)))
    pos = [r for r in ratios if r > 0]
    spread = max(pos) / min(pos) if pos else 1.0
    ok = {
        "hypotheses": hyp.passed,
        "comparison_below": below.holds,
        "comparison_above_fails": (not above.holds) and above.witness is not None,
        "abp_spread": spread < 50,
        "ordering": plus.lam <= minus.lam + 1e-8,
    }
    doc = {
        "checks": ok,
        "hypotheses": {"homogeneity": num(hyp.homogeneity, 1e-11),
                       "superadditivity": num(hyp.superadditivity, 1e-11),
                       "sandwich": num(hyp.sandwich, 1e-11), "failures": hyp.failures},
        "comparison_below": {"lambda": num(below.lam, 0.0),
                             "worst_violation": num(below.worst_violation, 1e-10)},
        "comparison_above": {"lambda": num(above.lam, 0.0), "message": above.message},
        "abp_spread": num(spread, 0.0),
        "lambda_plus": num(plus.lam, _lam_tol(cfg, plus.lam)),
        "lambda_minus": num(minus.lam, _lam_tol(cfg, minus.lam)),
    }
    return doc, EXIT_OK if all(ok.values()) else EXIT_FAIL


def cmd_sweep(cfg, op, grid, out, seed):
    opts = cfg.options
    if "lambdas" in opts:
        lams = [float(v) for v in opts["lambdas"]]
    elif "sweep" in opts:
        s = opts["sweep"]
        lams = list(np.linspace(s["start"], s["stop"], s["num"]))
    else:
        plus = principal_half_eigen_plus(op, grid, _eigen_opts(cfg))
        lams = [plus.lam - 0.5**j for j in range(opts["steps"])]
    f = cfg.function("f", grid, required=False)
    if f is None:
        f = np.where(grid.interior, 1.0, 0.0)
    rows, control = [], None
    sopts = _solve_opts(cfg)
    for lam in lams:
        r = solve_bellman_dirichlet(op, grid, lam, f, sopts, control0=control)
        if r.converged:
            control = r.control
            rows.append((lam, r.norm, 1.0 / r.norm if r.norm else float("inf"), r.status))
        else:
            rows.append((lam, float("nan"), float("nan"), r.status))
    out.table("sweep.csv", ["lambda", "sup_norm", "inv_norm", "status"], rows)
    doc = {"points": len(rows), "converged": sum(r[3] == "converged" for r in rows),
           "max_sup_norm": num(max((r[1] for r in rows if r[3] == "converged"), default=np.nan),
                               cfg.tol["solve_residual_tol"])}
    return doc, EXIT_OK


HANDLERS = {
    "eigen": cmd_eigen, "solve": cmd_solve, "resonance": cmd_resonance, "tstar": cmd_tstar,
    "measures": cmd_measures, "check": cmd_check, "sweep": cmd_sweep,
}


def run(command: str, config_path, output_dir, seed: int = 0, threads: int | None = None) -> int:
    """Run one command; returns the process exit status."""
    try:
        cfg = ProblemConfig.load(config_path)
        grid = cfg.grid()
        op = cfg.operator()
    except (ConfigError, ValueError) as exc:
        print(f"halfeig: config error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    set_threads(threads)
    out = Output(Path(output_dir), grid)
    try:
        doc, code = HANDLERS[command](cfg, op, grid, out, seed)
    except ConfigError as exc:
        print(f"halfeig: config error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except Exception as exc:  # noqa: BLE001 - surfaced to the user with context
        mod = type(exc).__module__.rsplit(".", 1)[-1]
        print(f"halfeig {command}: {mod}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    out.result({"command": command, "version": __version__, "seed": seed,
                "kernels": kernels.name, "config": cfg.data, "exit_code": code, "result": doc})
    return code


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="halfeig", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="problem JSON")
    p.add_argument("--out", help="output directory (required unless --print-config)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--print-config", action="store_true",
                   help="print the normalized config and exit")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.print_config:
        try:
            print(ProblemConfig.load(args.config).to_json())
        except ConfigError as exc:
            print(f"halfeig: config error: {exc}", file=sys.stderr)
            return EXIT_FAIL
        return EXIT_OK
    if not args.out:
        print("halfeig: --out is required", file=sys.stderr)
        return EXIT_FAIL
    return run(args.command, args.config, args.out, args.seed, args.threads)


if __name__ == "__main__":
    sys.exit(main())
