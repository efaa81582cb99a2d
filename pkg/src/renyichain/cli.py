"""Command-line front end.

Exit codes: 0 success, 1 verification failure, 2 usage or input error,
3 dimension or label error.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import hashlib
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__, chainrule, entropy, linalg, suites
from .errors import DimensionError, RenyiError
from .optimizer import METHODS, OptimizerConfig
from .states import DensityOperator, PureState

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_DIM = 0, 1, 2, 3


class UsageError(RenyiError):
    pass


# -- helpers ----------------------------------------------------------------


def _digest(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_json(path: str):
    try:
        return json.loads(Path(path).read_text())
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path} is not valid JSON: {exc}") from None


def load_state(path: str) -> DensityOperator:
    """Read a density matrix, or a column vector taken as a pure state."""
    m, f = linalg.matrix_from_json(_load_json(path))
    if m.shape[1] == 1:
        return PureState(m[:, 0], f).density()
    return DensityOperator(m, f)


def parse_systems(text: str, f: linalg.TensorFactorization) -> tuple[tuple[str, ...], tuple[str, ...]]:
    """Parse ``"AB|C"`` (or ``"A,B|C"``) into target and conditioning labels."""
    if text.count("|") != 1:
        raise UsageError(f"systems must look like 'A|B', got {text!r}")

    def labels(part: str) -> tuple[str, ...]:
        part = part.strip()
        if not part:
            return ()
        if "," in part:
            return tuple(p.strip() for p in part.split(","))
        if part in f.labels:
            return (part,)
        return tuple(part)

    target, given = (labels(p) for p in text.split("|"))
    if not target:
        raise UsageError("the target side of the systems spec is empty")
    return f.ordered(target), f.ordered(given)


def optimizer_config(args) -> OptimizerConfig:
    """Config file first, then explicit flags on top."""
    values = {}
    if getattr(args, "config", None):
        values.update(_load_json(args.config))
    for key in ("restarts", "max_iters", "rel_tol", "method"):
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    return OptimizerConfig.from_dict(values)


def manifest(args, command: str, inputs=()) -> dict:
    params = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    return {
        "command": command,
        "parameters": params,
        "seed": getattr(args, "seed", None),
        "tool_version": __version__,
        "input_digests": {p: _digest(p) for p in inputs if p},
    }


def write_sidecar(out: Path, man: dict) -> None:
    stamped = {**man, "timestamp": _dt.datetime.now(_dt.timezone.utc).isoformat()}
    (out / "manifest.json").write_text(json.dumps(stamped, indent=2, sort_keys=True) + "\n")


def _bits(x: float):
    return "inf" if x == math.inf else "-inf" if x == -math.inf else x


# -- commands -----------------------------------------------------------------


def cmd_compute(args) -> int:
    rho = load_state(args.state)
    f = rho.factorization
    order = entropy.RenyiOrder(args.alpha)
    sigma = None
    if args.sigma:
        sigma, _ = linalg.matrix_from_json(_load_json(args.sigma))
    out = {"quantity": args.quantity, "alpha": args.alpha, "seed": args.seed, "optimizer": None}

    if args.quantity == "divergence":
        if sigma is None:
            raise UsageError("divergence needs --sigma")
        value = entropy.divergence(rho.matrix, sigma, order)
        out.update(systems="".join(f.labels), value_bits=_bits(value),
                   method="von_neumann" if order.is_von_neumann else "direct")
    else:
        if not args.systems:
            raise UsageError("conditional entropy needs --systems, e.g. 'A|B'")
        target, given = parse_systems(args.systems, f)
        out["systems"] = f"{''.join(target)}|{''.join(given)}"
        if sigma is not None:
            res = entropy.cond_entropy_pinned(rho, sigma, order, given, target)
        else:
            from .states import SeededSampler

            fn = entropy.cond_entropy_via_purification if args.method_route == "lemma5" else entropy.cond_entropy
            res = fn(rho, order, given, target, config=optimizer_config(args), sampler=SeededSampler(args.seed))
        out.update(value_bits=_bits(res.value), method=res.method, optimizer=res.optimizer_json())
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_verify(args) -> int:
    fn = suites.VERIFY_SUITES[args.suite]
    kwargs = {"seed": args.seed}
    if args.trials is not None:
        kwargs["trials"] = args.trials
    if args.suite != "interpolation":
        kwargs["config"] = optimizer_config(args) if _config_given(args) else suites.SUITE_CONFIG
    report = fn(**kwargs)
    man = manifest(args, "verify")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / f"verify_{args.suite}.jsonl").write_text(report.jsonl(man))
        write_sidecar(out, man)
    print(json.dumps(report.summary(), sort_keys=True))
    return EXIT_OK if report.ok else EXIT_FAIL


def _config_given(args) -> bool:
    return bool(args.config) or any(
        getattr(args, k, None) is not None for k in ("restarts", "max_iters", "rel_tol", "method")
    )


def cmd_sweep(args) -> int:
    triples = []
    for text in args.triple or ():
        triples.extend(chainrule.default_grid() if text == "grid" else [chainrule.parse_triple(text)])
    if args.beta is not None or args.gamma is not None:
        if args.beta is None or args.gamma is None:
            raise UsageError("--beta and --gamma must be given together")
        if args.alpha is None:
            triples.append(chainrule.complete_triple(args.beta, args.gamma))
        else:
            triples.append(chainrule.make_triple(args.alpha, args.beta, args.gamma))
    elif args.alpha is not None:
        raise UsageError("--alpha needs --beta and --gamma")
    if not triples:
        triples = chainrule.default_grid()
    dims = tuple(int(d) for d in args.dims.split(","))
    if len(dims) != 3:
        raise UsageError(f"--dims needs three comma-separated integers, got {args.dims!r}")
    spec = chainrule.EnsembleSpec(args.ensemble, dims, args.rank)
    config = optimizer_config(args) if _config_given(args) else suites.SUITE_CONFIG
    pins = tuple(p for p in args.pins.split(",") if p) if args.pins else ()
    result = chainrule.sweep(
        triples, spec, args.trials, args.seed, config, pins=pins, threads=args.threads
    )
    man = manifest(args, "sweep")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.format in ("json", "both"):
        (out / "sweep.jsonl").write_text(result.jsonl(man))
    if args.format in ("csv", "both"):
        (out / "sweep.csv").write_text(result.csv())
    write_sidecar(out, man)
    print(json.dumps(result.summary_json(), sort_keys=True))
    return EXIT_OK if result.ok else EXIT_FAIL


# -- parser -----------------------------------------------------------------


def _add_optimizer_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("optimizer")
    g.add_argument("--config", help="JSON file with optimizer keys (restarts, max_iters, rel_tol, method)")
    g.add_argument("--restarts", type=int)
    g.add_argument("--max-iters", dest="max_iters", type=int)
    g.add_argument("--rel-tol", dest="rel_tol", type=float)
    g.add_argument("--method", choices=METHODS)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="renyichain", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compute", help="evaluate a divergence or conditional entropy")
    p.add_argument("--state", required=True, help="state file in the JSON matrix format")
    p.add_argument("--quantity", choices=("H", "divergence"), default="H")
    p.add_argument("--systems", help="e.g. 'A|B' or 'AB|C'")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--sigma", help="conditioning state (pins H) or second argument of the divergence")
    p.add_argument("--route", dest="method_route", choices=("direct", "lemma5"), default="direct")
    p.add_argument("--seed", type=int, default=0)
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_compute)

    p = sub.add_parser("verify", help="run a verification suite")
    p.add_argument("suite", choices=sorted(suites.VERIFY_SUITES))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trials", type=int)
    p.add_argument("--out", help="directory for the JSONL report")
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("sweep", help="Monte-Carlo chain-rule sweep")
    p.add_argument("--triple", action="append", help="'alpha,beta,gamma' (repeatable) or 'grid'")
    p.add_argument("--alpha", help="with --beta/--gamma; omitted means complete from the constraint")
    p.add_argument("--beta")
    p.add_argument("--gamma")
    p.add_argument("--ensemble", choices=chainrule.ENSEMBLES, default="ginibre")
    p.add_argument("--trials", type=int, default=300)
    p.add_argument("--dims", default="2,2,2")
    p.add_argument("--rank", type=int)
    p.add_argument("--pins", default=",".join(chainrule.PINS),
                   help="comma-separated subset of " + ",".join(chainrule.PINS))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=("json", "csv", "both"), default="both")
    p.add_argument("--threads", type=int, default=1)
    _add_optimizer_flags(p)
    p.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DimensionError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DIM
    except (RenyiError, np.linalg.LinAlgError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
