"""Command line front end: ``rmest {estimate,check,verify,gen}``.

Exit codes: 0 success or certified, 1 input error, 2 no converged run,
3 uniqueness not certified (``check``) or a failed suite (``verify``).
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict

from . import fixtures
from .certify import ProbeParams, build_certificate
from .exceptions import RMestError
from .geometry import parse_space
from .io import data_hash, dump_report, read_points, write_points
from .losses import parse_loss
from .solver import SolverParams, multi_start, stream, with_overrides
from .verify import SUITES, build_report, run_suites

EXIT_OK, EXIT_INPUT, EXIT_NOT_CONVERGED, EXIT_NOT_CERTIFIED = 0, 1, 2, 3


def _common(p, data=True):
    p.add_argument("--space", help="space spec, e.g. sphere:dim=2,scale=1 (default: file header)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output path (default: stdout)")
    if data:
        p.add_argument("--loss", required=True, help="loss spec, e.g. huber:c=1.345")
        p.add_argument("--in", dest="input", required=True, help="CSV point file")
        p.add_argument("--max-iters", type=int)
        p.add_argument("--grad-tol", type=float)
        p.add_argument("--starts", type=int, default=50, help="random starts per probe")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rmest", description="Robust M-estimators of location on model spaces.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("estimate", help="minimize the empirical risk and certify the result")
    _common(p)

    p = sub.add_parser("check", help="existence/uniqueness certificate only")
    _common(p)

    p = sub.add_parser("verify", help="run the property suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="report path (default: stdout)")
    p.add_argument("--suite", action="append", choices=sorted(SUITES),
                   help="run only this suite (repeatable)")

    p = sub.add_parser("gen", help="write a seeded fixture as CSV")
    p.add_argument("--space", default="sphere:dim=2,scale=1")
    p.add_argument("--kind", required=True, choices=fixtures.KINDS)
    p.add_argument("--radius", type=float, default=0.3)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="CSV path (default: stdout)")
    return parser


def _emit(text, path):
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _load(args):
    space = parse_space(args.space) if args.space else None
    pf = read_points(args.input, space)
    loss = parse_loss(args.loss)
    params = with_overrides(SolverParams(seed=args.seed), max_iters=args.max_iters, grad_tol=args.grad_tol)
    config = {
        "space": pf.space.spec(),
        "loss": loss.spec(),
        "input": args.input,
        "data_sha256": data_hash(pf.sample),
        "n": len(pf.sample),
        "seed": args.seed,
        "starts": args.starts,
        "solver": asdict(params),
    }
    return pf, loss, params, config


def _result_dict(ms, space):
    best = ms.best()
    clusters = [
        {"point": c.point, "value": c.value, "size": len(c.members)} for c in ms.clusters
    ]
    out = {
        "runs": len(ms.runs),
        "n_converged": ms.n_converged,
        "cluster_count": ms.cluster_count,
        "clusters": clusters,
    }
    if best is not None:
        out.update(
            minimizer=best.minimizer,
            value=best.value,
            grad_norm=best.grad_norm,
            iters=best.iters,
            status=best.status,
            trace=[list(t) for t in best.trace],
        )
    return out


def cmd_estimate(args) -> int:
    pf, loss, params, config = _load(args)
    ms = multi_start(pf.space, pf.sample, loss, n_starts=args.starts, params=params)
    cert = build_certificate(
        pf.space, pf.sample, loss, ProbeParams(n_starts=args.starts, solver=params), probe_result=ms
    )
    report = {
        "command": "estimate",
        "config": config,
        "result": _result_dict(ms, pf.space),
        "certificate": cert.to_dict(),
    }
    _emit(dump_report(report), args.out)
    return EXIT_OK if ms.best() is not None else EXIT_NOT_CONVERGED


def cmd_check(args) -> int:
    pf, loss, params, config = _load(args)
    cert = build_certificate(pf.space, pf.sample, loss, ProbeParams(n_starts=args.starts, solver=params))
    report = {"command": "check", "config": config, "certificate": cert.to_dict()}
    _emit(dump_report(report), args.out)
    return EXIT_OK if cert.uniqueness == "guaranteed" else EXIT_NOT_CERTIFIED


def cmd_verify(args) -> int:
    results = run_suites(args.seed, args.suite)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: trials={r.trials} "
              f"worst_margin={r.worst_margin!r}", file=sys.stderr)
    _emit(dump_report(build_report(results, args.seed)), args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_NOT_CERTIFIED


def cmd_gen(args) -> int:
    space = parse_space(args.space)
    center = space.base_point()
    pts = fixtures.generate(space, args.kind, args.n, args.radius, stream(args.seed, "fixtures"), center)
    meta = {
        "kind": args.kind,
        "n": len(pts),
        "radius": repr(float(args.radius)),
        "seed": args.seed,
        "center": json.dumps([float(v) for v in center]),
    }
    _emit(write_points(None, space, pts, meta=meta), args.out)
    return EXIT_OK


COMMANDS = {"estimate": cmd_estimate, "check": cmd_check, "verify": cmd_verify, "gen": cmd_gen}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (RMestError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
