"""Command-line interface.

Exit codes: 0 success, 2 invalid input, 3 inconclusive at the given bound.
Results are cached under $CRITSET_CACHE (or ~/.cache/critset), keyed by the
hash of the canonical request plus a code-version tag.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .criterion import (
    ALL,
    CriterionError,
    CriticalWitness,
    SSpec,
    certify_critical,
    check_dominated_integrality,
    check_factor_condition,
    criterion_candidates,
    escalate_witness,
    exception_form,
    truants,
)
from .elements import (
    enumerate_classes,
    indec_sequence,
    is_indecomposable,
    square_divisor,
)
from .forms import FormError, find_representation, non_represented_up_to
from .ring import FieldError
from .wire import (
    WireError,
    canonical_dumps,
    class_from_json,
    class_row,
    class_to_json,
    elem_from_json,
    elem_to_json,
    field_from_json,
    field_to_json,
    form_from_json,
    form_to_json,
    int_out,
)
from .ztree import build_tree, tree_to_csv, tree_to_json

log = logging.getLogger("critset")

CACHE_TAG = f"critset-{__version__}"
EXIT_OK, EXIT_INVALID, EXIT_INCONCLUSIVE = 0, 2, 3
COMMANDS = (
    "field-info", "classes", "indec", "squarefree", "truant", "represents", "escalate",
    "critical", "criterion", "exception-form", "check-hyp", "ztree", "verify-witness",
)


class UsageError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    field: str = "Q"
    X: str = "diag"
    norm_bound: int | None = None
    bound: int | None = None
    verify_bound: int | None = None
    probe_bound: int = 2000
    max_steps: int = 200
    cache_dir: str | None = None
    use_cache: bool = True
    output_format: str = "json"
    workers: int = 1

    def check(self) -> None:
        if self.workers < 1:
            raise UsageError("--workers must be at least 1")
        for name in ("norm_bound", "bound", "verify_bound", "probe_bound", "max_steps"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        if self.norm_bound and self.verify_bound and self.verify_bound < self.norm_bound:
            raise UsageError("--verify-bound must be at least --norm-bound")


# ---------------------------------------------------------------------------
# parsing helpers


def parse_field(s: str):
    s = s.strip()
    if s.startswith("{"):
        try:
            return field_from_json(json.loads(s))
        except json.JSONDecodeError as e:
            raise WireError(f"malformed field JSON: {e}") from None
    return field_from_json(s)


def parse_S(K, s: str | None) -> SSpec:
    if not s or s.upper() == "ALL":
        return ALL
    if s in ("squarefree", "rational", "rational-integers"):
        return SSpec("squarefree" if s == "squarefree" else "rational")
    for prefix, base in (("ALL-minus:", "all"), ("list:", "list")):
        if s.startswith(prefix):
            keys = tuple(sorted(class_from_json(K, p).key for p in s[len(prefix):].split(";") if p.strip()))
            return SSpec(base, keys, ()) if base == "list" else SSpec("all", (), keys)
    raise WireError(f"unknown S specification {s!r}")


def _witness_json(r) -> dict:
    if isinstance(r, CriticalWitness):
        return {
            "alpha": class_to_json(r.alpha),
            "X": r.X,
            "status": r.status,
            "start": r.start,
            "verified_bound": r.verified_bound,
            "witness_form": form_to_json(r.witness_form),
            "escalation_trail": [class_to_json(c) for c in r.escalation_trail],
        }
    return {
        "alpha": class_to_json(r.alpha),
        "X": r.X,
        "status": r.status,
        "reason": r.reason,
        "escalation_trail": [class_to_json(c) for c in r.escalation_trail],
        "square_witness": elem_to_json(r.square_witness) if r.square_witness is not None else None,
        "attempts": list(r.attempts),
    }


# ---------------------------------------------------------------------------
# commands; each returns (request-key dict, thunk producing (payload, exit))


def _req(args, cfg: RunConfig, K, **extra) -> dict:
    d = {"command": cfg.command, "field": field_to_json(K), "format": cfg.output_format}
    d.update(extra)
    return d


def cmd_field_info(args, cfg, K):
    def run():
        d = {"field": field_to_json(K), "degree": K.degree, "discriminant": K.discriminant}
        if K.degree == 2:
            d.update({
                "omega": "sqrtD" if K.omega_mode == "sqrtD" else "half(1+sqrtD)",
                "fund_unit": elem_to_json(K.fund_unit),
                "fund_unit_norm": K.fund_unit_norm,
                "unit_totally_positive": K.unit_totally_positive,
            })
        return d, EXIT_OK
    return _req(args, cfg, K), run


def cmd_classes(args, cfg, K):
    bound = args.bound

    def run():
        filt = None
        if args.filter == "squarefree":
            filt = lambda c: square_divisor(c.rep) is None  # noqa: E731
        elif args.filter == "indecomposable":
            filt = lambda c: is_indecomposable(c.rep)  # noqa: E731
        elif args.filter == "squarefree-indecomposable":
            filt = lambda c: square_divisor(c.rep) is None and is_indecomposable(c.rep)  # noqa: E731
        cs = enumerate_classes(K, bound, filt)
        if cfg.output_format == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["a", "b", "norm", "trace", "squarefree", "indecomposable"])
            for c in cs:
                w.writerow(["true" if v is True else "false" if v is False else v for v in class_row(c)])
            return buf.getvalue(), EXIT_OK
        return [class_to_json(c) for c in cs], EXIT_OK
    return _req(args, cfg, K, bound=bound, filter=args.filter), run


def cmd_indec(args, cfg, K):
    def run():
        seq = indec_sequence(K)
        lo, hi = args.lo if args.lo is not None else -seq.t, args.hi if args.hi is not None else 2 * seq.t
        d = {
            "field": field_to_json(K),
            "t": seq.t,
            "unit_totally_positive": seq.unit_totally_positive,
            "period": [elem_to_json(b) for b in seq.period],
            "window": [lo, hi],
            "betas": [{"index": i, "element": elem_to_json(seq.beta(i))} for i in range(lo, hi + 1)],
        }
        if seq.unit_totally_positive:
            d["flag"] = "fundamental unit is totally positive; t is the translation period under its square"
        return d, EXIT_OK
    return _req(args, cfg, K, lo=args.lo, hi=args.hi), run


def cmd_squarefree(args, cfg, K):
    x = elem_from_json(K, args.element)
    if not x.is_totally_positive():
        raise WireError(f"{x} is not totally positive")

    def run():
        w = square_divisor(x)
        return {
            "element": elem_to_json(x),
            "squarefree": w is None,
            "witness": elem_to_json(w) if w is not None else None,
        }, EXIT_OK
    return _req(args, cfg, K, element=elem_to_json(x)), run


def cmd_truant(args, cfg, K):
    f = form_from_json(args.form, K)
    S = parse_S(K, args.S)

    def run():
        rep = truants(f, S, args.bound)
        return {
            "form": form_to_json(f),
            "S": S.to_json(),
            "searched_norm_bound": rep.searched_norm_bound,
            "status": "truant-found" if rep.truants else "none-up-to-bound",
            "truant_norm": rep.truant_norm,
            "truants": [class_to_json(c) for c in rep.truants],
            "canonical_truant": class_to_json(rep.canonical_truant) if rep.truants else None,
        }, EXIT_OK
    return _req(args, cfg, K, form=form_to_json(f), S=S.to_json(), bound=args.bound), run


def cmd_represents(args, cfg, K):
    f = form_from_json(args.form, K)
    t = elem_from_json(K, args.target)
    if t and not t.is_totally_positive():
        raise WireError(f"target {t} is not totally positive")

    def run():
        w = find_representation(f, t)
        return {
            "form": form_to_json(f),
            "target": elem_to_json(t),
            "represented": w is not None,
            "witness": [elem_to_json(x) for x in w] if w is not None else None,
        }, EXIT_OK
    return _req(args, cfg, K, form=form_to_json(f), target=elem_to_json(t)), run


def cmd_escalate(args, cfg, K):
    f = form_from_json(args.form, K)
    alpha = class_from_json(K, args.alpha)
    S = parse_S(K, args.S)
    vb = cfg.verify_bound or 4 * alpha.norm

    def run():
        try:
            r = escalate_witness(f, alpha, S, vb, cfg.max_steps)
        except CriterionError as e:
            raise UsageError(str(e)) from None
        return _witness_json(r), EXIT_OK if isinstance(r, CriticalWitness) else EXIT_INCONCLUSIVE
    return _req(args, cfg, K, form=form_to_json(f), alpha=class_to_json(alpha), S=S.to_json(),
                verify_bound=vb, max_steps=cfg.max_steps), run


def cmd_critical(args, cfg, K):
    alpha = class_from_json(K, args.alpha)
    vb = cfg.verify_bound or 4 * alpha.norm

    def run():
        r = certify_critical(alpha, cfg.X, vb, max_steps=cfg.max_steps)
        code = EXIT_OK if isinstance(r, CriticalWitness) or r.status.startswith("rejected") else EXIT_INCONCLUSIVE
        return _witness_json(r), code
    return _req(args, cfg, K, alpha=class_to_json(alpha), X=cfg.X, verify_bound=vb, max_steps=cfg.max_steps), run


def cmd_criterion(args, cfg, K):
    nb = cfg.norm_bound or 15
    vb = cfg.verify_bound or 4 * nb
    if vb < nb:
        raise UsageError("--verify-bound must be at least --norm-bound")

    def run():
        c = criterion_candidates(K, cfg.X, nb, vb, workers=cfg.workers, max_steps=cfg.max_steps)
        return {
            "field": field_to_json(K),
            "X": cfg.X,
            "S": c.S.to_json(),
            "norm_bound": nb,
            "verify_bound": vb,
            "classes": [class_to_json(w.alpha) for w in c.witnesses],
            "witnesses": [_witness_json(w) for w in c.witnesses],
            "not_certified": [
                {"class": class_to_json(f.alpha), "status": f.status, "reason": f.reason} for f in c.failures
            ],
            "closure": _closure_json(c.closure),
            "note": f"critical classes of norm <= {nb} found by search, witnesses verified to norm {vb}",
        }, EXIT_OK
    return _req(args, cfg, K, X=cfg.X, norm_bound=nb, verify_bound=vb, max_steps=cfg.max_steps), run


def _closure_json(rep: dict) -> dict:
    out = dict(rep)
    out["pairs"] = [[{"a": a, "b": b} for a, b in p] for p in rep.get("pairs", [])]
    return out


def cmd_exception_form(args, cfg, K):
    beta = class_from_json(K, args.beta)

    def run():
        try:
            f = exception_form(beta)
        except CriterionError as e:
            raise UsageError(str(e)) from None
        d = {"beta": class_to_json(beta), "form": form_to_json(f), "rank": f.rank}
        code = EXIT_OK
        if cfg.verify_bound:
            missed = non_represented_up_to(f, ALL, cfg.verify_bound)
            d["verified_bound"] = cfg.verify_bound
            d["missed"] = [class_to_json(c) for c in missed]
            d["fails_exactly_beta"] = [c.key for c in missed] == [beta.key]
            if not d["fails_exactly_beta"]:
                code = EXIT_INCONCLUSIVE
        return d, code
    return _req(args, cfg, K, beta=class_to_json(beta), verify_bound=cfg.verify_bound), run


def cmd_check_hyp(args, cfg, K):
    if args.kind == "dominated":
        if args.n is None:
            raise UsageError("--n is required for the dominated check")
        n = elem_from_json(K, args.n)
        if not n.is_totally_positive():
            raise WireError(f"{n} is not totally positive")
        req = {"kind": "dominated", "n": elem_to_json(n), "mode": args.mode}
    else:
        if args.m is None or args.m < 1:
            raise UsageError("--m must be a positive integer for the factor check")
        req = {"kind": "factor", "m": args.m}

    def run():
        if args.kind == "dominated":
            r = check_dominated_integrality(n, args.mode)
        else:
            r = check_factor_condition(K, args.m)
        d = dict(req)
        d.update({
            "field": field_to_json(K),
            "holds": r.holds,
            "witness": elem_to_json(r.witness) if r.witness is not None else None,
            "tier": r.tier,
            "detail": r.detail,
        })
        return d, EXIT_OK
    return _req(args, cfg, K, **req), run


def cmd_ztree(args, cfg, K):
    if K.degree != 1:
        raise UsageError("ztree works over Q only")

    def run():
        try:
            root, stats = build_tree(cfg.X, args.max_rank, cfg.probe_bound)
        except FormError as e:
            raise UsageError(str(e)) from None
        if cfg.output_format == "csv":
            return tree_to_csv(root), EXIT_OK
        return tree_to_json(root, stats), EXIT_OK
    return _req(args, cfg, K, X=cfg.X, max_rank=args.max_rank, probe_bound=cfg.probe_bound), run


def cmd_verify_witness(args, cfg, K):
    f = form_from_json(args.form, K)
    alpha = class_from_json(K, args.alpha)
    vb = cfg.verify_bound or 4 * alpha.norm

    def run():
        hit = find_representation(f, alpha.rep)
        missed = [c for c in non_represented_up_to(f, ALL, vb) if c != alpha]
        ok = hit is None and not missed
        return {
            "form": form_to_json(f),
            "alpha": class_to_json(alpha),
            "verified_bound": vb,
            "represents_alpha": hit is not None,
            "missed_other_classes": [class_to_json(c) for c in missed],
            "valid": ok,
        }, EXIT_OK if ok else EXIT_INCONCLUSIVE
    return _req(args, cfg, K, form=form_to_json(f), alpha=class_to_json(alpha), verify_bound=vb), run


HANDLERS = {
    "field-info": cmd_field_info,
    "classes": cmd_classes,
    "indec": cmd_indec,
    "squarefree": cmd_squarefree,
    "truant": cmd_truant,
    "represents": cmd_represents,
    "escalate": cmd_escalate,
    "critical": cmd_critical,
    "criterion": cmd_criterion,
    "exception-form": cmd_exception_form,
    "check-hyp": cmd_check_hyp,
    "ztree": cmd_ztree,
    "verify-witness": cmd_verify_witness,
}


# ---------------------------------------------------------------------------
# cache


def cache_dir(cfg: RunConfig) -> Path:
    d = cfg.cache_dir or os.environ.get("CRITSET_CACHE") or str(Path.home() / ".cache" / "critset")
    return Path(d)


def cache_key(request: dict) -> str:
    blob = json.dumps({"request": request, "version": CACHE_TAG}, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _render(payload, fmt: str) -> str:
    if isinstance(payload, str):
        return payload
    return canonical_dumps(payload)


def cached_run(cfg: RunConfig, request: dict, run) -> tuple[str, int]:
    key = cache_key(request)
    path = cache_dir(cfg) / key[:2] / f"{key}.json"
    stored = None
    if path.exists():
        try:
            stored = json.loads(path.read_text())
            if stored.get("key") != key or not isinstance(stored.get("text"), str):
                raise ValueError("key mismatch")
        except (ValueError, OSError) as e:
            log.warning("corrupt cache entry %s (%s); recomputing", path, e)
            stored = None
    if stored is not None and cfg.use_cache:
        return stored["text"], int(stored["exit"])
    payload, code = run()
    text = _render(payload, cfg.output_format)
    if stored is not None and stored["text"] != text:
        log.warning("recomputed result differs from cache entry %s; overwriting", path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps({"key": key, "version": CACHE_TAG, "exit": code, "text": text}))
        tmp.replace(path)
    except OSError as e:
        log.warning("could not write cache entry %s: %s", path, e)
    return text, code


# ---------------------------------------------------------------------------
# argparse


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="critset", description="Criterion sets, truants and escalation witnesses.")
    p.add_argument("--version", action="version", version=f"critset {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--field", default="Q", help='"Q", "Qsqrt:D", or a field JSON object')
    common.add_argument("--format", dest="output_format", choices=("json", "csv"), default="json")
    common.add_argument("--cache-dir", default=None)
    common.add_argument("--no-cache", action="store_true", help="recompute and cross-check the cache")
    common.add_argument("--workers", type=int, default=1)
    common.add_argument("--out", default=None, help="write output to this file")
    common.add_argument("--max-steps", type=int, default=200)
    common.add_argument("--verify-bound", type=int, default=None)
    common.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", metavar="command")
    sub.required = True

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    add("field-info", "field data: discriminant, fundamental unit")
    s = add("classes", "square classes up to a norm bound")
    s.add_argument("--bound", type=int, required=True)
    s.add_argument("--filter", choices=("squarefree", "indecomposable", "squarefree-indecomposable"))
    s = add("indec", "ordered indecomposables")
    s.add_argument("--lo", type=int)
    s.add_argument("--hi", type=int)
    s = add("squarefree", "squarefreeness with a witness")
    s.add_argument("--element", required=True)
    s = add("truant", "minimal-norm classes a form misses")
    s.add_argument("--form", required=True)
    s.add_argument("--S", default="ALL")
    s.add_argument("--bound", type=int, default=1000)
    s = add("represents", "exact representation test")
    s.add_argument("--form", required=True)
    s.add_argument("--target", required=True)
    s = add("escalate", "orthogonal escalation from a start form")
    s.add_argument("--form", required=True)
    s.add_argument("--alpha", required=True)
    s.add_argument("--S", default="ALL")
    s = add("critical", "bounded criticality certificate")
    s.add_argument("--alpha", required=True)
    s.add_argument("--X", choices=("diag", "cl", "nc"), default="diag")
    s = add("criterion", "criterion-set candidates up to a norm bound")
    s.add_argument("--X", choices=("diag", "cl", "nc"), default="diag")
    s.add_argument("--norm-bound", type=int, default=15)
    s = add("exception-form", "diagonal form missing one indecomposable class")
    s.add_argument("--beta", required=True)
    s = add("check-hyp", "hypothesis checkers for rational critical elements")
    s.add_argument("--kind", choices=("dominated", "factor"), required=True)
    s.add_argument("--n")
    s.add_argument("--mode", choices=("elements", "squares"), default="elements")
    s.add_argument("--m", type=int)
    s = add("ztree", "escalation tree over Z")
    s.add_argument("--X", choices=("diag", "cl", "nc"), default="cl")
    s.add_argument("--max-rank", type=int, default=4)
    s.add_argument("--probe-bound", type=int, default=2000)
    s = add("verify-witness", "check a witness form up to a bound")
    s.add_argument("--form", required=True)
    s.add_argument("--alpha", required=True)
    return p


def config_from_args(args) -> RunConfig:
    return RunConfig(
        command=args.command,
        field=args.field,
        X=getattr(args, "X", "diag"),
        norm_bound=getattr(args, "norm_bound", None),
        bound=getattr(args, "bound", None),
        verify_bound=args.verify_bound,
        probe_bound=getattr(args, "probe_bound", 2000),
        max_steps=args.max_steps,
        cache_dir=args.cache_dir,
        use_cache=not args.no_cache,
        output_format=args.output_format,
        workers=args.workers,
    )


def dispatch(argv: list[str] | None = None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_INVALID if e.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="critset: %(message)s")
    try:
        cfg = config_from_args(args)
        cfg.check()
        K = parse_field(cfg.field)
        if cfg.output_format == "csv" and cfg.command not in ("classes", "ztree"):
            raise UsageError(f"csv output is not available for {cfg.command}")
        request, run = HANDLERS[cfg.command](args, cfg, K)
        text, code = cached_run(cfg, request, run)
    except (UsageError, WireError, FieldError, FormError, CriterionError) as e:
        print(f"critset: error: {e}", file=sys.stderr)
        return EXIT_INVALID
    if args.out:
        Path(args.out).write_text(text)
    else:
        stdout.write(text)
    return code


def main() -> None:
    sys.exit(dispatch())


if __name__ == "__main__":
    main()
