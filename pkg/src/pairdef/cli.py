"""Command line front end.

Examples
--------
::

    pairdef cohomology --model torus:n=1,r=1,K=2
    pairdef kuranishi --model torus:n=2,r=2,K=0 --directions 0,5 --order 4
    pairdef validate --model saved.dgla.json --json out.json --text out.txt

Exit codes: 0 when every check passed, 1 when a check failed, 2 for an
invalid run specification or model file.
"""

from __future__ import annotations

import argparse
import json
import os
import re
import sys
from dataclasses import dataclass, field

from .errors import ConfigError, PairdefError
from .models import BUILTINS, ModelConfig, build_model, builtin, load_model, validate_model
from .reports import FAIL, CheckLine, Report, dumps

COMMANDS = ("validate", "cohomology", "kuranishi", "les", "appendix", "all")
DEFAULT_TOL = 1e-10
DEFAULT_SEED = 0
TOL_ENV = "PAIRDEF_TOL"
POINT_TOL = 1e-6


@dataclass
class RunSpec:
    """Parsed command line."""

    command: str
    model: str
    order: int = 4
    directions: object = "all"
    tol: float = DEFAULT_TOL
    seed: int = DEFAULT_SEED
    samples: int = 20
    sector: str = "A"
    points: list = field(default_factory=list)
    allow_overflow: bool = False
    json_path: str | None = None
    text_path: str | None = None


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------
def _split_top(text):
    """Split on commas outside parentheses."""
    parts, depth, cur = [], 0, ""
    for ch in text:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
            if depth < 0:
                raise ConfigError(f"unbalanced parenthesis in {text!r}")
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
        else:
            cur += ch
    if depth:
        raise ConfigError(f"unbalanced parenthesis in {text!r}")
    parts.append(cur)
    return [p.strip() for p in parts if p.strip()]


def _int(key, val):
    try:
        return int(val)
    except ValueError:
        raise ConfigError(f"model parameter {key} must be an integer, got {val!r}") from None


def _number(text):
    try:
        return complex(text.replace(" ", "").replace("i", "j"))
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def load_potential(path):
    """Read ``{"potential": [{"k": [...], "re": x, "im": y}, ...]}`` (or the bare list)."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read potential file {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"potential file {path!r} is not valid JSON ({exc.msg})") from None
    terms = data.get("potential") if isinstance(data, dict) else data
    if not isinstance(terms, list):
        raise ConfigError(f"potential file {path!r} needs a list of terms")
    pot = {}
    for i, t in enumerate(terms):
        try:
            pot[tuple(int(v) for v in t["k"])] = complex(float(t.get("re", 0.0)),
                                                         float(t.get("im", 0.0)))
        except (KeyError, TypeError, ValueError):
            raise ConfigError(f"potential term {i} needs integer 'k' and numeric 're'/'im'") from None
    return pot


def parse_model_spec(spec: str) -> ModelConfig:
    """Parse ``torus:n=..,r=..,K=..[,c=(..)][,u=file]`` into a configuration."""
    kind, sep, rest = spec.partition(":")
    if not sep or kind != "torus":
        raise ConfigError(f"model shorthand must look like torus:n=..,r=..,K=.., got {spec!r}")
    args = {}
    for part in _split_top(rest):
        key, eq, val = part.partition("=")
        if not eq:
            raise ConfigError(f"expected key=value in model shorthand, got {part!r}")
        if key in args:
            raise ConfigError(f"model parameter {key} given twice")
        args[key.strip()] = val.strip()
    unknown = set(args) - {"n", "r", "K", "c", "u"}
    if unknown:
        raise ConfigError(f"unknown model parameter(s) {sorted(unknown)}; allowed n, r, K, c, u")
    for key in ("n", "r", "K"):
        if key not in args:
            raise ConfigError(f"model shorthand is missing {key}")
    n, r, K = (_int(k, args[k]) for k in ("n", "r", "K"))
    twist = None
    if "c" in args:
        c = args["c"]
        if not (c.startswith("(") and c.endswith(")")):
            raise ConfigError(f"twist must be written c=(c1,...,cn), got {c!r}")
        twist = tuple(_number(v) for v in _split_top(c[1:-1]))
    potential = load_potential(args["u"]) if "u" in args else None
    return ModelConfig(kind="torus", n=n, r=r, K=K, potential=potential, twist=twist)


def load_model_source(source: str):
    """Builtin name, ``torus:`` shorthand, or a path to a saved model."""
    if source in BUILTINS:
        return builtin(source)
    if source.startswith("torus:"):
        return build_model(parse_model_spec(source))
    if os.path.exists(source):
        with open(source, "rb") as fh:
            return load_model(fh.read())
    raise ConfigError(f"model {source!r} is neither a built-in name, a torus: shorthand "
                      f"nor an existing file")


def parse_directions(text):
    """``all``, comma-separated indices, or harmonic basis labels."""
    if text is None or text.strip() == "all":
        return "all"
    out = []
    for item in text.split(","):
        item = item.strip()
        if not item:
            raise ConfigError(f"empty entry in --directions {text!r}")
        out.append(int(item) if re.fullmatch(r"-?\d+", item) else item)
    return out


def resolve_directions(h, sector, directions):
    """Turn labels into indices of the harmonic ``H^1`` basis."""
    if directions == "all":
        return "all"
    from .hodge import harmonic_basis_labels
    labels = harmonic_basis_labels(h, sector, 1)
    out = []
    for d in directions:
        if isinstance(d, int):
            out.append(d)
            continue
        hits = [i for i, lab in enumerate(labels) if lab == d or lab.split("@")[0] == d]
        if len(hits) != 1:
            raise ConfigError(f"direction label {d!r} matches {len(hits)} basis elements "
                              f"of H^1({sector}); available: {labels}")
        out.append(hits[0])
    return out


def parse_points(text):
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if chunk:
            pts.append([_number(v) for v in chunk.split(",")])
    return pts


def default_tol():
    raw = os.environ.get(TOL_ENV)
    if raw is None:
        return DEFAULT_TOL
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{TOL_ENV}={raw!r} is not a number") from None


def build_parser():
    p = argparse.ArgumentParser(prog="pairdef",
                                description="Deformation computations for holomorphic pairs "
                                            "on spectral torus models.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--model", required=True,
                   help="built-in name, torus:n=..,r=..,K=..[,c=(..)][,u=file] or a model file")
    p.add_argument("--order", type=int, default=4, help="Kuranishi order N (>= 1)")
    p.add_argument("--directions", default="all",
                   help="'all', comma-separated H^1 basis indices, or basis labels")
    p.add_argument("--sector", default="A", choices=("A", "Q", "T"))
    p.add_argument("--tol", type=float, default=None,
                   help=f"tolerance (default {DEFAULT_TOL}, or ${TOL_ENV})")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--samples", type=int, default=20)
    p.add_argument("--points", default=None,
                   help="parameter points for pointwise checks, e.g. '0.05,0;0.05,0.05'")
    p.add_argument("--allow-overflow", action="store_true",
                   help="truncate Fourier products that leave the mode box")
    p.add_argument("--json", dest="json_path", default=None, help="write the JSON report here")
    p.add_argument("--text", dest="text_path", default=None, help="write the text summary here")
    return p


def spec_from_args(args) -> RunSpec:
    tol = args.tol if args.tol is not None else default_tol()
    if not tol > 0:
        raise ConfigError("tolerances must be positive")
    if args.order < 1:
        raise ConfigError("the order N must be >= 1")
    if args.samples < 1:
        raise ConfigError("--samples must be >= 1")
    return RunSpec(command=args.command, model=args.model, order=args.order,
                   directions=parse_directions(args.directions), tol=tol, seed=args.seed,
                   samples=args.samples, sector=args.sector,
                   points=parse_points(args.points) if args.points else [],
                   allow_overflow=args.allow_overflow, json_path=args.json_path,
                   text_path=args.text_path)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------
def _default_points(k):
    if k == 0:
        return []
    return [[0.05] + [0.0] * (k - 1), [0.05] * k]


def _points(spec, k):
    pts = spec.points or _default_points(k)
    for p in pts:
        if len(p) != k:
            raise ConfigError(f"point {p} needs {k} coordinates (one per direction)")
    return pts


def _hodge(ctx):
    if "hodge" not in ctx:
        from .hodge import build_hodge
        ctx["hodge"] = build_hodge(ctx["model"])
    return ctx["hodge"]


def run_validate(spec, ctx):
    from .dgla import validate_dgla
    from .hodge import hodge_report
    m = ctx["model"]
    # model tensors are exact up to rounding, so their identities use the tighter bound
    out = [validate_model(m, samples=spec.samples, tol=min(spec.tol, 1e-12), seed=spec.seed),
           validate_dgla(m, samples=spec.samples, tol=spec.tol, seed=spec.seed)]
    if not out[0].passed:
        return out
    out.append(hodge_report(_hodge(ctx), tol=spec.tol, seed=spec.seed))
    return out


def run_cohomology(spec, ctx):
    from .hodge import cohomology_dims, cohomology_table, harmonic_basis_labels
    h = _hodge(ctx)
    rep = Report("cohomology")
    rep.info["dims"] = cohomology_dims(h)
    rep.info["table"] = cohomology_table(h)
    rep.info["h1_basis"] = {s: harmonic_basis_labels(h, s, 1)
                           for s in ("Q", "T", "A") if ctx["model"].n >= 1}
    return [rep]


def run_kuranishi(spec, ctx):
    from .kuranishi import kuranishi_invariants, mc_check, solve_kuranishi
    m, h = ctx["model"], _hodge(ctx)
    dirs = resolve_directions(h, spec.sector, spec.directions)
    sol = solve_kuranishi(m, h, spec.order, directions=dirs, sector=spec.sector,
                          allow_overflow=spec.allow_overflow)
    rep = Report("kuranishi")
    rep.info["sector"] = spec.sector
    rep.info["order"] = spec.order
    rep.info["directions"] = list(sol.directions)
    rep.info["obstruction"] = [{"h2_index": i, "label": sol.h2_labels[i], "poly": txt}
                               for i, txt in enumerate(sol.obstruction_text())]
    rep.info["solution"] = sol.to_json()
    out = [rep, kuranishi_invariants(m, sol, tol=spec.tol)]
    for t in _points(spec, sol.num_params):
        r = mc_check(m, sol, t, tol=POINT_TOL)
        r.title = f"mc_check at t={[complex(v) for v in t]}"
        out.append(r)
    return out


def run_les(spec, ctx):
    from .kuranishi import solve_kuranishi
    from .les import (exactness_check, les_maps, obstruction_diagram_check,
                      unobstructed_criterion, well_definedness_check)
    m, h = ctx["model"], _hodge(ctx)
    les = les_maps(m, h)
    maps = Report("les_maps")
    maps.info["maps"] = les.to_json()
    out = [maps, exactness_check(les, tol=spec.tol),
           well_definedness_check(m, h, les, tol=spec.tol, seed=spec.seed)]
    if m.n < 2:
        return out
    out.append(unobstructed_criterion(m, h, les, order=spec.order, tol=spec.tol))
    if spec.directions == "all":
        k = min(2, h.dim("Q", 1), h.dim("A", 1))
        dq = da = list(range(k))
    else:
        dq = resolve_directions(h, "Q", spec.directions)
        da = resolve_directions(h, "A", spec.directions)
    if not dq:
        rep = Report("obstruction_diagram")
        rep.add(CheckLine("left square", "vacuous", detail="H^1(Q) is zero"))
        rep.add(CheckLine("right square", "vacuous", detail="H^1(Q) is zero"))
        return out + [rep]
    sol_q = solve_kuranishi(m, h, spec.order, directions=dq, sector="Q",
                            allow_overflow=spec.allow_overflow)
    sol_a = solve_kuranishi(m, h, spec.order, directions=da, sector="A",
                            allow_overflow=spec.allow_overflow)
    for t in _points(spec, len(dq))[-1:]:
        r = obstruction_diagram_check(m, h, sol_q, sol_a, t, tol=POINT_TOL, les=les)
        r.title = f"obstruction_diagram at t={[complex(v) for v in t]}"
        out.append(r)
    return out


def run_appendix(spec, ctx):
    from .appendix import intertwiner_check, validate_d1
    m = ctx["model"]
    return [intertwiner_check(m, samples=spec.samples, tol=spec.tol, seed=spec.seed),
            validate_d1(m, samples=max(1, spec.samples // 10), tol=spec.tol, seed=spec.seed)]


RUNNERS = {"validate": run_validate, "cohomology": run_cohomology, "kuranishi": run_kuranishi,
           "les": run_les, "appendix": run_appendix}


def run(spec: RunSpec):
    """Execute a run; returns ``(exit_code, document)``."""
    m = load_model_source(spec.model)
    ctx = {"model": m}
    names = list(RUNNERS) if spec.command == "all" else [spec.command]
    reports = []
    for name in names:
        if name == "appendix" and m.band is None and spec.command == "all":
            rep = Report("intertwiner_check")
            rep.add(CheckLine("intertwiner", "vacuous", detail="needs a torus model"))
            reports.append(rep)
            continue
        reports.extend(RUNNERS[name](spec, ctx))
        if name == "validate" and not all(r.passed for r in reports):
            break
    failed = [f"{r.title}: {ln.name}" for r in reports for ln in r.lines if ln.status == FAIL]
    doc = {"command": spec.command, "model": m.describe(), "model_source": spec.model,
           "seed": spec.seed, "tol": spec.tol, "order": spec.order,
           "passed": not failed, "failures": failed,
           "reports": [r.to_json() for r in reports]}
    return (0 if not failed else 1), doc, reports


def render_text(doc, reports):
    head = [f"pairdef {doc['command']}  model={doc['model_source']}  seed={doc['seed']}  "
            f"tol={doc['tol']:g}", ""]
    body = [r.to_text() for r in reports]
    tail = ["", "RESULT: " + ("PASS" if doc["passed"] else "FAIL")]
    tail += [f"  failed: {f}" for f in doc["failures"]]
    return "\n".join(head + ["\n\n".join(body)] + tail) + "\n"


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        spec = spec_from_args(args)
        code, doc, reports = run(spec)
    except PairdefError as exc:
        print(f"pairdef: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    text = render_text(doc, reports)
    if spec.json_path:
        with open(spec.json_path, "w", encoding="utf-8") as fh:
            fh.write(dumps(doc) + "\n")
    if spec.text_path:
        with open(spec.text_path, "w", encoding="utf-8") as fh:
            fh.write(text)
    sys.stdout.write(text)
    if code:
        for f in doc["failures"]:
            print(f"pairdef: check failed: {f}", file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
