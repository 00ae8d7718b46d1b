"""Command-line interface.

Exit codes: 0 success, 1 computational failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import montecarlo, params
from .attacks import ALL_STRATEGIES, Strategy, forge
from .codec import codebook_to_bytes, generate_codebook, read_codebook
from .errors import TardosError
from .params import ParamSet, SchemeContext, Variant
from .scoring import accuse

DEFAULT_ETAS = (1.0, 0.5, 0.2, 0.1, 0.01)


class UsageError(Exception):
    pass


def _atomic_write(path: str | os.PathLike, data: bytes | str) -> None:
    path = Path(path)
    mode = "wb" if isinstance(data, bytes) else "w"
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, mode) as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(text: str, output: Optional[str]) -> None:
    if output:
        _atomic_write(output, text)
    else:
        sys.stdout.write(text)


def _json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


def _threads(value: Optional[int]) -> int:
    if value is not None:
        if value < 1:
            raise UsageError("--threads must be positive")
        return value
    return params.default_workers()


def _context(args, require_n: bool = False) -> tuple[float, Optional[SchemeContext]]:
    """Resolve eta and, when enough flags are present, the full context."""
    if args.c < 2:
        raise UsageError("--c must be at least 2")
    have_ctx = args.n is not None and args.eps1 is not None
    if have_ctx and (args.eps2 is not None or args.eta is not None):
        try:
            ctx = SchemeContext(n=args.n, c=args.c, eps1=args.eps1, eps2=args.eps2, eta=args.eta)
        except TardosError as exc:
            raise UsageError(str(exc)) from exc
        return ctx.eta, ctx
    if require_n:
        raise UsageError("--n, --eps1 and one of --eps2/--eta are required")
    if args.eta is None:
        raise UsageError("give --eta, or --n, --eps1 and --eps2")
    if args.eps2 is not None:
        raise UsageError("--eps2 needs --n and --eps1")
    if not 0 < args.eta <= 1:
        raise UsageError("--eta must lie in (0, 1]")
    return args.eta, None


def _add_context_flags(p: argparse.ArgumentParser, c_required: bool = True) -> None:
    p.add_argument("--c", type=int, required=c_required, help="coalition size bound")
    p.add_argument("--eta", type=float)
    p.add_argument("--eps1", type=float)
    p.add_argument("--eps2", type=float)
    p.add_argument("--n", type=int, help="number of users")


def _optimized(c: int, eta: float, variant: Variant) -> ParamSet:
    if variant is Variant.SYMMETRIC:
        return params.optimize(c, eta)
    return params.optimize_generic(c, eta, variant)


def optimize_report(c: int, eta: float, variant: Variant, ctx: Optional[SchemeContext]) -> dict:
    p = _optimized(c, eta, variant)
    report = {
        "c": c, "eta": eta, "variant": variant.value,
        "params": p.to_dict(),
        "slacks": params.check_constraints(p, c, eta).to_dict(),
    }
    if ctx is not None:
        base = params.derive_scheme_params(p, ctx)
        adj_p, adj = params.integral_adjust(p, ctx)
        report["derived"] = {"ell0": base.ell0, "Z0": base.Z0, "delta": base.delta,
                             "delta_prime": base.delta_prime, "k": ctx.k,
                             "n": ctx.n, "eps1": ctx.eps1, "eps2": ctx.eps2}
        report["adjusted"] = {"ell": adj.ell, "Z": adj.Z, "delta": adj.delta,
                              "params": adj_p.to_dict(),
                              "slacks": params.check_constraints(adj_p, c, eta).to_dict()}
    return report


def cmd_optimize(args) -> int:
    eta, ctx = _context(args)
    variant = Variant(args.variant)
    _emit(_json(optimize_report(args.c, eta, variant, ctx)), args.output)
    return 0


def _c_values(args) -> list[int]:
    if args.c_range:
        lo, hi, count = args.c_range
        if lo < 2 or hi < lo or count < 1:
            raise UsageError("--c-range needs 2 <= LO <= HI and COUNT >= 1")
        vals = np.unique(np.round(np.geomspace(lo, hi, int(count))).astype(int))
        return [int(v) for v in vals]
    if not args.c:
        raise UsageError("give --c values or --c-range")
    if min(args.c) < 2:
        raise UsageError("every c must be at least 2")
    return sorted(set(args.c))


def cmd_sweep(args) -> int:
    cs = _c_values(args)
    etas = args.eta or list(DEFAULT_ETAS)
    if any(not 0 < e <= 1 for e in etas):
        raise UsageError("every eta must lie in (0, 1]")
    workers = _threads(args.threads)
    rows = params.sweep(cs, etas, workers=workers)
    lines = [",".join(params.SWEEP_COLUMNS)]
    for row in rows:
        lines.append(",".join(str(v) if isinstance(v, int) else repr(float(v)) for v in row))
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def cmd_asymptotic(args) -> int:
    if args.c < 2:
        raise UsageError("--c must be at least 2")
    if not 0 < args.eta <= 1:
        raise UsageError("--eta must lie in (0, 1]")
    a = params.asymptotic_params(args.c, args.eta)
    out = {"c": args.c, "eta": args.eta, "gamma": params.GAMMA, **a._asdict()}
    _emit(_json(out), args.output)
    return 0


def _load_scheme(path: str) -> dict:
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read scheme file {path}: {exc}") from exc
    if "adjusted" not in data:
        raise UsageError(f"{path} has no derived scheme; run optimize with --n and --eps1")
    return data


def cmd_generate(args) -> int:
    if args.scheme:
        data = _load_scheme(args.scheme)
        ell, delta = data["adjusted"]["ell"], data["adjusted"]["delta"]
        n = args.n if args.n is not None else data["derived"]["n"]
    else:
        if args.ell is None or args.delta is None or args.n is None:
            raise UsageError("give --scheme, or all of --n, --ell and --delta")
        ell, delta, n = args.ell, args.delta, args.n
    if n < 1 or ell < 1 or not 0 < delta < 0.5:
        raise UsageError("need n >= 1, ell >= 1 and 0 < delta < 1/2")
    cb = generate_codebook(n, int(ell), float(delta), args.seed)
    _atomic_write(args.output, codebook_to_bytes(cb))
    return 0


def _parse_coalition(text: str) -> list[int]:
    try:
        members = [int(tok) for tok in text.replace(" ", "").split(",") if tok]
    except ValueError as exc:
        raise UsageError(f"bad coalition list {text!r}") from exc
    if not members:
        raise UsageError("coalition must be non-empty")
    return members


def cmd_attack(args) -> int:
    members = _parse_coalition(args.coalition)
    cb = read_codebook(args.codebook)
    if min(members) < 0 or max(members) >= cb.n:
        raise UsageError(f"coalition index out of range for n = {cb.n}")
    y = forge(args.strategy, cb, members, args.seed)
    _atomic_write(args.output + ".json", _json(y.meta()))
    _atomic_write(args.output, y.to_ascii() + "\n")
    return 0


def read_forgery(path: str) -> tuple[np.ndarray, Optional[dict]]:
    text = Path(path).read_text().strip()
    if not text or set(text) - {"0", "1"}:
        raise UsageError(f"{path} is not a line of ASCII bits")
    bits = np.frombuffer(text.encode("ascii"), dtype=np.uint8) - ord("0")
    meta = None
    side = Path(path + ".json")
    if side.exists():
        meta = json.loads(side.read_text())
    return bits, meta


def cmd_trace(args) -> int:
    variant = Variant(args.variant) if args.variant else None
    if args.z is not None:
        z = args.z
    elif args.scheme:
        data = _load_scheme(args.scheme)
        z = data["adjusted"]["Z"]
        variant = variant or Variant(data["variant"])
    else:
        raise UsageError("give --z or --scheme")
    variant = variant or Variant.SYMMETRIC
    cb = read_codebook(args.codebook)
    bits, meta = read_forgery(args.forgery)
    if bits.size != cb.ell:
        raise UsageError(f"forgery length {bits.size} does not match codebook ell = {cb.ell}")
    report = accuse(cb, bits, z, variant)
    out = report.to_dict()
    if meta is not None:
        coalition = set(meta.get("coalition", []))
        out["forgery"] = meta
        out["accused_innocent"] = sorted(set(report.accused) - coalition)
        out["accused_colluders"] = sorted(set(report.accused) & coalition)
    _emit(_json(out), args.output)
    return 0


def cmd_simulate(args) -> int:
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    if args.eps1 is None:
        raise UsageError("--eps1 is required")
    try:
        cfg = montecarlo.TrialConfig(
            n=args.n, c=args.c, eps1=args.eps1, eps2=args.eps2, eta=args.eta,
            trials=args.trials, base_seed=args.seed, variant=Variant(args.variant),
            shared_codebook=args.shared_codebook, coalition_size=args.coalition_size,
        )
    except TardosError as exc:
        raise UsageError(str(exc)) from exc
    workers = _threads(args.threads)
    strategies = [Strategy(s) for s in (args.strategies or [s.value for s in ALL_STRATEGIES])]
    if cfg.undersized:
        print(f"note: coalition of {len(cfg.coalition)} is below the design bound c = {cfg.c}", file=sys.stderr)

    def progress(strategy, done, total):
        print(f"[{strategy}] {done}/{total}", file=sys.stderr)

    result = montecarlo.run_campaign(cfg, strategies, workers=workers, progress=progress)
    _emit(result.to_csv(), args.output)
    return 0


def cmd_verify(args) -> int:
    records = montecarlo.verify_suite()
    failed = [r for r in records if not r["ok"]]
    for r in records:
        status = "PASS" if r["ok"] else "FAIL"
        detail = ", ".join(f"{k}={v}" for k, v in r.items() if k not in ("check", "ok"))
        print(f"{status} {r['check']}: {detail}")
    print(f"{len(records) - len(failed)}/{len(records)} identities hold")
    return 1 if failed else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tardos", description="Symmetric Tardos traitor tracing toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    variants = [v.value for v in Variant]

    p = sub.add_parser("optimize", help="optimal parameter set for (c, eta)")
    _add_context_flags(p)
    p.add_argument("--variant", choices=variants, default="symmetric")
    p.add_argument("--output")
    p.set_defaults(func=cmd_optimize)

    p = sub.add_parser("sweep", help="optimal d_ell over a grid of c and eta (CSV)")
    p.add_argument("--c", type=int, nargs="+")
    p.add_argument("--c-range", type=float, nargs=3, metavar=("LO", "HI", "COUNT"))
    p.add_argument("--eta", type=float, nargs="+")
    p.add_argument("--threads", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("asymptotic", help="large-c first-order parameters")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--eta", type=float, default=1.0)
    p.add_argument("--output")
    p.set_defaults(func=cmd_asymptotic)

    p = sub.add_parser("generate", help="write a codebook file")
    p.add_argument("--scheme", help="JSON written by 'optimize --n ... --eps1 ...'")
    p.add_argument("--n", type=int)
    p.add_argument("--ell", type=int)
    p.add_argument("--delta", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("attack", help="forge a word from a coalition's codewords")
    p.add_argument("--codebook", required=True)
    p.add_argument("--coalition", required=True, help="comma-separated user indices")
    p.add_argument("--strategy", choices=[s.value for s in Strategy], default="interleave")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("trace", help="score users against a forgery")
    p.add_argument("--codebook", required=True)
    p.add_argument("--forgery", required=True)
    p.add_argument("--z", type=float)
    p.add_argument("--scheme")
    p.add_argument("--variant", choices=variants)
    p.add_argument("--output")
    p.set_defaults(func=cmd_trace)

    p = sub.add_parser("simulate", help="Monte Carlo soundness/completeness campaign (CSV)")
    _add_context_flags(p)
    p.set_defaults(n=100)
    p.add_argument("--strategies", nargs="+", choices=[s.value for s in Strategy])
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--variant", choices=variants, default="symmetric")
    p.add_argument("--threads", type=int)
    p.add_argument("--shared-codebook", action="store_true")
    p.add_argument("--coalition-size", type=int)
    p.add_argument("--output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="numeric checks of the proof identities")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except (TardosError, ArithmeticError, OSError, IndexError, KeyError, ValueError) as exc:
        print(f"{parser.prog} {args.command}: failed: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
