"""Command-line interface.

Subcommands::

    greedydml fit          --data FILE --y COL --d COL --controls PATTERNS [options]
    greedydml fit-iv       --data FILE --y COL --d COL --z COL --controls PATTERNS [options]
    greedydml simulate     --scenario NAME [--n N] [--reps R] [--seed S] [--jobs J]
    greedydml expand-basis --data FILE --expand COLS --output FILE [options]

Configuration precedence is flags, then a ``--config`` file of ``key = value``
lines, then built-in defaults. When no seed is given anywhere the
``GREEDYDML_SEED`` environment variable is used. Results go to ``--output``
or stdout; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from .basis import BasisKind, BasisSpec, expand
from .dml import iv_estimate, plr_estimate, plr_estimate_nocf
from .errors import GreedyDMLError, MissingBinding, MissingColumn, UnknownFlag, UsageError
from .io import ColumnBindings, emit_table, parse_column, read_csv, read_table, write_csv
from .simulate import run_monte_carlo, scenario
from .types import DmlConfig, SelectionConfig

__all__ = ["RunManifest", "parse_args", "load_config", "resolve_settings", "run", "main"]

SEED_ENV = "GREEDYDML_SEED"

DEFAULTS: dict[str, Any] = {
    "c_star": None,  # 2.0, or the value named by a tableD1 scenario
    "delta_bar": 5.0,
    "k_folds": 5,
    "alpha": 0.05,
    "seed": 0,
    "median_reps": 1,
    "max_steps": None,
    "ridge_eps": 0.0,
    "reps": 1000,
    "jobs": 1,
    "mu": 1.0,
    "p": 500,
}

_CASTS = {
    "c_star": float, "delta_bar": float, "k_folds": int, "alpha": float, "seed": int,
    "median_reps": int, "max_steps": int, "ridge_eps": float, "reps": int, "jobs": int,
    "mu": float, "p": int, "n": int,
}


@dataclass
class RunManifest:
    """A validated command line."""

    command: str
    inputs: list[str] = field(default_factory=list)
    bindings: dict[str, Any] = field(default_factory=dict)
    overrides: dict[str, Any] = field(default_factory=dict)
    output: Optional[str] = None
    fmt: str = "markdown"
    config_path: Optional[str] = None
    scenarios: list[str] = field(default_factory=list)
    options: dict[str, Any] = field(default_factory=dict)


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # type: ignore[override]
        raise UsageError(message)


def _split(values: Optional[Sequence[str]]) -> list[str]:
    out: list[str] = []
    for v in values or []:
        out.extend(s.strip() for s in v.split(",") if s.strip())
    return out


def _add_tuning(p: argparse.ArgumentParser) -> None:
    p.add_argument("--c-star", type=float, dest="c_star")
    p.add_argument("--delta-bar", type=float, dest="delta_bar")
    p.add_argument("--max-steps", type=int, dest="max_steps")
    p.add_argument("--k-folds", type=int, dest="k_folds")
    p.add_argument("--seed", type=int)
    p.add_argument("--config", dest="config_path")
    p.add_argument("--format", dest="fmt", choices=["csv", "markdown", "json"], default="markdown")
    p.add_argument("--output", "-o")


def _build_parser() -> _Parser:
    parser = _Parser(prog="greedydml", allow_abbrev=False, description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    for name in ("fit", "fit-iv"):
        p = sub.add_parser(name, allow_abbrev=False, help=f"{'IV' if name == 'fit-iv' else 'partially linear'} estimate from a CSV file")
        p.add_argument("--data", required=True)
        p.add_argument("--y")
        p.add_argument("--d")
        p.add_argument("--z")
        p.add_argument("--controls", action="append", help="comma-separated names or glob patterns")
        p.add_argument("--alpha", type=float)
        p.add_argument("--ridge-eps", type=float, dest="ridge_eps")
        p.add_argument("--median-reps", type=int, dest="median_reps")
        if name == "fit":
            p.add_argument("--no-cross-fit", action="store_true", dest="no_cross_fit")
        _add_tuning(p)

    p = sub.add_parser("simulate", allow_abbrev=False, help="run built-in Monte Carlo scenarios")
    p.add_argument("--scenario", action="append", help="e.g. table1-sparse-n1000 (repeatable)")
    p.add_argument("--n", type=int)
    p.add_argument("--p", type=int)
    p.add_argument("--reps", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--mu", type=float)
    p.add_argument("--progress", action="store_true")
    _add_tuning(p)

    p = sub.add_parser("expand-basis", allow_abbrev=False, help="write a CSV of basis-expanded controls")
    p.add_argument("--data", required=True)
    p.add_argument("--expand", action="append", required=True, help="columns to expand")
    p.add_argument("--kind", choices=["hermite", "power"], default="hermite")
    p.add_argument("--degree", type=int)
    p.add_argument("--no-interactions", action="store_true")
    p.add_argument("--passthrough", action="append")
    p.add_argument("--dummies", action="append")
    p.add_argument("--keep", action="append", help="columns copied unchanged (e.g. outcome, treatment)")
    std = p.add_mutually_exclusive_group()
    std.add_argument("--standardize", action="store_true", default=None)
    std.add_argument("--no-standardize", action="store_false", dest="standardize")
    p.add_argument("--output", "-o", required=True)
    return parser


def parse_args(argv: Sequence[str]) -> RunManifest:
    """Turn ``argv`` into a :class:`RunManifest`.

    Raises
    ------
    UnknownFlag
        For any unrecognised option.
    MissingBinding
        When a role column (or scenario) required by the command is absent.
    UsageError
        For other malformed command lines.
    """
    parser = _build_parser()
    ns, extra = parser.parse_known_args(list(argv))
    if extra:
        raise UnknownFlag(f"unrecognised arguments: {' '.join(extra)}")
    if ns.command is None:
        raise UsageError("a subcommand is required: fit, fit-iv, simulate or expand-basis")

    args = vars(ns)
    m = RunManifest(command=ns.command, output=args.get("output"), config_path=args.get("config_path"))
    m.fmt = args.get("fmt") or "markdown"
    for key in ("c_star", "delta_bar", "max_steps", "k_folds", "seed", "alpha", "ridge_eps",
                "median_reps", "reps", "jobs", "mu", "p", "n"):
        if args.get(key) is not None:
            m.overrides[key] = args[key]

    if ns.command in ("fit", "fit-iv"):
        m.inputs = [ns.data]
        for role, flag in (("outcome", "y"), ("treatment", "d")):
            if not args.get(flag):
                raise MissingBinding(f"--{flag} is required")
            m.bindings[role] = args[flag]
        if ns.command == "fit-iv":
            if not ns.z:
                raise MissingBinding("fit-iv requires an instrument column (--z)")
            m.bindings["instrument"] = ns.z
        elif ns.z:
            raise UsageError("--z is only valid for fit-iv")
        controls = _split(ns.controls)
        if not controls:
            raise MissingBinding("--controls is required")
        m.bindings["controls"] = controls
        m.options["no_cross_fit"] = bool(args.get("no_cross_fit"))
    elif ns.command == "simulate":
        if not ns.scenario:
            raise MissingBinding("simulate requires --scenario")
        m.scenarios = list(ns.scenario)
        m.options["progress"] = ns.progress
    else:
        m.inputs = [ns.data]
        m.bindings = {
            "expand": _split(ns.expand),
            "passthrough": _split(ns.passthrough),
            "dummies": _split(ns.dummies),
            "keep": _split(ns.keep),
        }
        m.options = {
            "kind": ns.kind,
            "degree": ns.degree,
            "interactions": not ns.no_interactions,
            "standardize": ns.standardize,
        }
    return m


def load_config(path: str) -> dict[str, Any]:
    """Read ``key = value`` lines; ``#`` starts a comment; dashes in keys become underscores."""
    out: dict[str, Any] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key = value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in _CASTS:
                raise UsageError(f"{path}:{lineno}: unknown setting {key!r}")
            try:
                out[key] = _CASTS[key](value)
            except ValueError:
                raise UsageError(f"{path}:{lineno}: bad value {value!r} for {key}") from None
    return out


def resolve_settings(manifest: RunManifest, environ: Optional[dict[str, str]] = None) -> dict[str, Any]:
    """Merge defaults, the config file and flags (in increasing priority)."""
    environ = os.environ if environ is None else environ
    settings = dict(DEFAULTS)
    from_file = load_config(manifest.config_path) if manifest.config_path else {}
    if "seed" not in manifest.overrides and "seed" not in from_file and environ.get(SEED_ENV):
        try:
            settings["seed"] = int(environ[SEED_ENV])
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer") from None
    settings.update(from_file)
    settings.update(manifest.overrides)
    return settings


def _dml_config(s: dict[str, Any]) -> DmlConfig:
    selection = SelectionConfig(
        c_star=2.0 if s["c_star"] is None else s["c_star"], delta_bar=s["delta_bar"],
        max_steps_override=s["max_steps"], ridge_eps=s["ridge_eps"],
    )
    return DmlConfig(
        k_folds=s["k_folds"], seed=s["seed"], selection=selection,
        repetitions=s["median_reps"], alpha_level=s["alpha"],
    )


def _log(msg: str) -> None:
    print(msg, file=sys.stderr)


def _expand_basis(m: RunManifest, s: dict[str, Any]) -> None:
    header, cols = read_table(m.inputs[0])
    b = m.bindings
    for name in b["expand"] + b["passthrough"] + b["dummies"] + b["keep"]:
        if name not in cols:
            raise MissingColumn(f"column {name!r} not found in {m.inputs[0]}")
    kind = BasisKind.HERMITE_FUNCTION if m.options["kind"] == "hermite" else BasisKind.POLYNOMIAL_POWER
    degree = m.options["degree"] or (9 if kind is BasisKind.HERMITE_FUNCTION else 10)
    spec = BasisSpec(kind=kind, degree=degree, include_interactions=m.options["interactions"],
                     standardize=m.options["standardize"])
    num = lambda names: {n: parse_column(cols[n], n) for n in names}  # noqa: E731
    matrix, names = expand(num(b["expand"]), spec, num(b["passthrough"]), num(b["dummies"]))
    out = {n: v for n, v in num(b["keep"]).items()}
    for j, name in enumerate(names):
        out[name] = matrix[:, j]
    write_csv(m.output, out)
    _log(f"wrote {len(names)} expanded columns to {m.output}")


def run(manifest: RunManifest, environ: Optional[dict[str, str]] = None) -> str:
    """Execute a manifest and return the rendered output (empty for expand-basis)."""
    s = resolve_settings(manifest, environ)
    if manifest.command == "expand-basis":
        _expand_basis(manifest, s)
        return ""
    if manifest.command in ("fit", "fit-iv"):
        b = manifest.bindings
        bindings = ColumnBindings(
            outcome=b["outcome"], treatment=b["treatment"],
            instrument=b.get("instrument"), controls=tuple(b["controls"]),
        )
        data = read_csv(manifest.inputs[0], bindings)
        _log(f"loaded {data.n} observations, {data.p} controls")
        cfg = _dml_config(s)
        if manifest.command == "fit-iv":
            result = iv_estimate(data, cfg)
        elif manifest.options.get("no_cross_fit"):
            result = plr_estimate_nocf(data, cfg)
        else:
            result = plr_estimate(data, cfg)
        return emit_table(result, manifest.fmt)

    results, labels = [], []
    for name in manifest.scenarios:
        spec = scenario(
            name, n=s.get("n"), replications=s["reps"], seed=s["seed"], p=s["p"],
            c_star=s["c_star"],
            k_folds=s["k_folds"], mu_iv=s["mu"], delta_bar=s["delta_bar"],
        )
        progress = None
        if manifest.options.get("progress"):
            step = max(1, spec.replications // 20)
            progress = lambda done, total, _n=name: done % step == 0 and _log(f"{_n}: {done}/{total}")  # noqa: E731
        _log(f"running {name}: N={spec.N}, p={spec.p}, R={spec.replications}")
        results.append(run_monte_carlo(spec, jobs=s["jobs"], progress=progress))
        labels.append(spec_label(name, spec.N))
    return emit_table(results, manifest.fmt, labels=labels)


def spec_label(name: str, N: int) -> str:
    return name if "-n" in name else f"{name}-n{N}"


def main(argv: Optional[Sequence[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    try:
        manifest = parse_args(argv)
        text = run(manifest)
    except UsageError as exc:
        _log(f"greedydml: usage error: {exc}")
        return 2
    except (GreedyDMLError, OSError) as exc:
        _log(f"greedydml: error: {exc}")
        return 1
    if text:
        if manifest.output:
            Path(manifest.output).write_text(text, encoding="utf-8")
        else:
            sys.stdout.write(text)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
