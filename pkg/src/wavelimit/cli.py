"""
Config-driven experiment runner.

Usage::

    wavelimit SUBCOMMAND --config FILE [--out DIR] [--seed N] [--threads N]

Exit status: 0 on success, 1 when an audit or check fails, 2 on a
configuration error. Every run writes ``manifest.json`` next to its outputs;
CSV files contain no timestamps and are byte-identical for identical
(config, seed).

Outputs per subcommand:

``simulate``      trajectory.csv (t, l2, h1[, kinetic]), snapshots.bin
``energy-audit``  energy_<name>.csv (t, functional, residual) at the finest dt, ladder.json
``growth-audit``  growth.json, dissipativity.json
``tails``         tail_profile.csv (t, k, value), tail_fit.json
``attractor``     attractor.bin, attractor.json
``sweep``         sweep.csv (eps, semidistance, sup_Z_bound), sweep.json
``oracle-check``  oracle.json
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .attractor import approximate_attractor, eps_sweep, sample_ensemble, EnsembleSpec
from .config import REQUIRED, load_config
from .dynamics import HyperbolicState, integrate
from .energy import identity_ladder
from .errors import AuditFailure, ConfigurationError, DivergenceError, SolverError
from .io import table_csv, trajectory_csv, write_snapshots
from .nonlinearity import dissipativity_audit, estimate_embedding_constants, growth_audit, random_trial_fields
from .operator import inner_l2, norm_h1, norm_l2
from .oracle import dense_linear_solution
from .scenario import build_scenario, initial_state, sweep_config
from .tails import tail_fit, tail_profile

log = logging.getLogger("wavelimit")

EXIT_OK, EXIT_AUDIT, EXIT_CONFIG = 0, 1, 2


class _Writer:
    """Serialises every output write and records the file list for the manifest."""

    def __init__(self, out: Path):
        self.out = out
        self.files: list[str] = []
        out.mkdir(parents=True, exist_ok=True)

    def text(self, name: str, content: str) -> None:
        (self.out / name).write_text(content)
        self.files.append(name)

    def json(self, name: str, obj) -> None:
        self.text(name, json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")

    def snapshots(self, name: str, **kw) -> None:
        write_snapshots(self.out / name, **kw)
        self.files.append(name)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serialisable: {type(o).__name__}")


def _simulate(cfg, sc, w: _Writer, seed, threads) -> int:
    fs = cfg["flow"]
    s0 = initial_state(sc, cfg)
    traj = integrate(sc.op, sc.nl, s0, fs["T"], fs["dt"], fs["snapshot_every"])
    norms = {"l2": lambda u, v: norm_l2(u, sc.grid), "h1": lambda u, v: norm_h1(u, sc.op)}
    if traj.flow == "hyperbolic":
        norms["kinetic"] = lambda u, v: traj.eps * inner_l2(v, v, sc.grid)
    w.text("trajectory.csv", trajectory_csv(traj, norms))
    if cfg["output"]["snapshots"]:
        w.snapshots("snapshots.bin", grid_hash=sc.grid.hash, eps=traj.eps, dt=traj.dt, u=traj.u, v=traj.v)
    return EXIT_OK


def _energy_audit(cfg, sc, w: _Writer, seed, threads) -> int:
    fs = cfg["flow"]
    ok = True
    summary = {}
    for name in fs["functionals"]:
        s0 = initial_state(sc, cfg, eps=0.0 if name == "F_zero" else None)
        fit = identity_ladder(name, sc.op, sc.nl, s0, fs["T"], fs["ladder"], fs["delta"])
        passed = fit.order >= fs["min_order"] and fit.r2 >= fs["min_r2"]
        ok &= passed
        finest = fit.reports[int(np.argmin(fit.dts))]
        w.text(f"energy_{name}.csv", finest.to_csv())
        summary[name] = dict(fit.to_dict(), passed=bool(passed))
        log.info("%s: order %.4f, R^2 %.5f -> %s", name, fit.order, fit.r2, "pass" if passed else "FAIL")
    w.json("ladder.json", {"min_order": fs["min_order"], "min_r2": fs["min_r2"], "identities": summary})
    return EXIT_OK if ok else EXIT_AUDIT


def _growth_audit(cfg, sc, w: _Writer, seed, threads) -> int:
    ns = cfg["nonlinearity"]
    consts = estimate_embedding_constants(sc.op, seed=seed)
    consts.safety = ns["audit_safety"]
    n = ns["audit_pairs"]
    u = random_trial_fields(sc.op, n, seed)
    h = random_trial_fields(sc.op, n, seed + 1)
    rep = growth_audit(sc.nl, sc.op, consts, u, h, raise_on_failure=False)
    dis = dissipativity_audit(sc.nl, np.linspace(-10, 10, 2001), raise_on_failure=False)
    w.json("growth.json", {"constants": vars(consts), "report": json.loads(rep.to_json())})
    w.json("dissipativity.json", json.loads(dis.to_json()))
    return EXIT_OK if rep.passed and dis.passed else EXIT_AUDIT


def _tails(cfg, sc, w: _Writer, seed, threads) -> int:
    fs = cfg["flow"]
    s0 = initial_state(sc, cfg)
    if not isinstance(s0, HyperbolicState):
        raise ConfigurationError("tails needs eps > 0")
    traj = integrate(sc.op, sc.nl, s0, fs["T"], fs["dt"], fs["snapshot_every"])
    prof = tail_profile(traj, fs["tail_ks"], sc.op)
    fit = tail_fit(prof)
    w.text("tail_profile.csv", prof.to_csv())
    w.json("tail_fit.json", dict(fit.to_dict(), ks=prof.ks.tolist()))
    return EXIT_OK


def _attractor(cfg, sc, w: _Writer, seed, threads) -> int:
    fs, at = cfg["flow"], cfg["attractor"]
    spec = EnsembleSpec(at["modes"], at["radius"], at["members"])
    init = sample_ensemble(sc.op, spec, seed, eps=fs["eps"])
    A = approximate_attractor(
        sc.op, sc.nl, init, at["T0"], at["T_sample"], fs["dt"], at["stride"], at["lift"], threads, seed, spec
    )
    w.snapshots("attractor.bin", grid_hash=A.grid_hash, eps=A.eps, dt=A.dt, u=A.u.T, v=A.v.T)
    w.json("attractor.json", A.provenance())
    return EXIT_OK


def _sweep(cfg, sc, w: _Writer, seed, threads) -> int:
    rep = eps_sweep(sc.op, sc.nl, sweep_config(cfg, seed, threads))
    w.text("sweep.csv", rep.to_csv())
    w.json("sweep.json", rep.to_dict())
    return EXIT_OK


def _oracle_check(cfg, sc, w: _Writer, seed, threads) -> int:
    fs = cfg["flow"]
    if not getattr(sc.nl, "is_zero", False):
        raise ConfigurationError("oracle-check compares the linear flow; set [nonlinearity] kind = zero")
    s0 = initial_state(sc, cfg)
    if not isinstance(s0, HyperbolicState):
        raise ConfigurationError("oracle-check needs eps > 0")
    errs = {}
    for dt in (fs["dt"], 2 * fs["dt"]):
        traj = integrate(sc.op, sc.nl, s0, fs["T"], dt, snapshot_every=10**9)
        u_ref, _ = dense_linear_solution(sc.op, s0.eps, (s0.u, s0.v), fs["T"])
        errs[dt] = float(norm_l2(traj.u[-1] - u_ref, sc.grid) / norm_l2(u_ref, sc.grid))
    err = errs[fs["dt"]]
    ratio = errs[2 * fs["dt"]] / err if err > 0 else float("inf")
    passed = err <= fs["oracle_tol"]
    w.json("oracle.json", {"relative_l2_error": err, "error_at_2dt": errs[2 * fs["dt"]], "halving_ratio": ratio,
                           "tolerance": fs["oracle_tol"], "passed": passed})
    return EXIT_OK if passed else EXIT_AUDIT


COMMANDS = {
    "simulate": _simulate,
    "energy-audit": _energy_audit,
    "growth-audit": _growth_audit,
    "tails": _tails,
    "attractor": _attractor,
    "sweep": _sweep,
    "oracle-check": _oracle_check,
}
assert set(COMMANDS) == set(REQUIRED)


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavelimit", description="Damped wave / parabolic limit laboratory.")
    sub = p.add_subparsers(dest="command", metavar="SUBCOMMAND")
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, metavar="PATH")
        sp.add_argument("--out", metavar="DIR", help="output directory (overrides [output] dir)")
        sp.add_argument("--seed", type=int, default=0, metavar="U64")
        sp.add_argument("--threads", type=int, default=1, metavar="N")
    return p


def run(argv: Optional[Sequence[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = _parser()
    if not argv:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_CONFIG
    if not 0 <= args.seed < 2**64:
        print(f"error: seed must fit in an unsigned 64-bit integer, got {args.seed}", file=sys.stderr)
        return EXIT_CONFIG
    if args.threads < 1:
        print(f"error: --threads must be >= 1, got {args.threads}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.command)
        sc = build_scenario(cfg)
        out = Path(args.out or cfg["output"]["dir"])
        writer = _Writer(out)
        status = COMMANDS[args.command](cfg, sc, writer, args.seed, args.threads)
    except ConfigurationError as err:
        print(f"configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except AuditFailure as err:
        print(f"audit failure: {err}", file=sys.stderr)
        return EXIT_AUDIT
    except (DivergenceError, SolverError) as err:
        print(f"run failed: {err}", file=sys.stderr)
        return EXIT_AUDIT
    writer.json(
        "manifest.json",
        {
            "command": args.command,
            "config": str(args.config),
            "config_sha256": cfg.digest,
            "grid_hash": sc.grid.hash,
            "version": __version__,
            "seed": args.seed,
            "threads": args.threads,
            "exit_status": status,
            "outputs": list(writer.files),
            "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        },
    )
    return status


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    sys.exit(run())
