"""Command line: ``fairpart {solve,necklace,bounds,generate,probe,render}``.

Exit codes: 0 success (or a fair distribution for ``solve``), 1 input error,
2 when ``solve`` ends with a best-effort (not fair) result.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import oracles
from .geometry import GeometryError, Tree, tree_from_dict
from .measures import MeasureError, MeasureSet, load_measures
from .render import RenderSpec, bbox_for, render_svg, save_partition_figure, save_probe_figure
from .solver import (
    SolveConfig,
    TemplateError,
    balanced_template,
    template_from_dict,
    solve_fair,
)

log = logging.getLogger("fairpart")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_BEST_EFFORT = 2


class InputError(Exception):
    pass


def _read_json(path: str, what: str):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{what} file {path}: {exc.strerror}") from None
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{what} file {path}: invalid JSON at line {exc.lineno}: {exc.msg}") from None


def _read_measures(path: str) -> MeasureSet:
    try:
        with open(path) as fh:
            return load_measures(fh)
    except OSError as exc:
        raise InputError(f"measure file {path}: {exc.strerror}") from None
    except MeasureError as exc:
        raise InputError(f"measure file {path}: {exc}") from None


def _read_tree(path: str) -> Tree:
    obj = _read_json(path, "tree")
    if isinstance(obj, dict) and "tree" in obj and "type" not in obj:
        obj = obj["tree"]  # a solve result
    try:
        return tree_from_dict(obj)
    except GeometryError as exc:
        raise InputError(f"tree file {path}: {exc}") from None


def _parse_dirs(text: str, dim: int):
    if text == "auto":
        return None
    try:
        dirs = [[float(c) for c in part.split(",")] for part in text.split(";") if part.strip()]
    except ValueError:
        raise InputError(f"--dirs: expected 'auto' or 'x,y;x,y;...', got {text!r}") from None
    if not dirs or any(len(v) != dim for v in dirs):
        raise InputError(f"--dirs: every direction needs {dim} coordinates")
    return dirs


def _emit(args, payload: str) -> None:
    if args.out:
        Path(args.out).write_text(payload)
    else:
        sys.stdout.write(payload)


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


# -- subcommands --------------------------------------------------------------------------


def cmd_solve(args) -> int:
    ms = _read_measures(args.measures)
    if args.template:
        try:
            template = template_from_dict(_read_json(args.template, "template"), r=args.thieves)
        except TemplateError as exc:
            raise InputError(f"template file {args.template}: {exc}") from None
    else:
        dirs = _parse_dirs(args.dirs, ms.dim)
        template = balanced_template(args.iterated, args.thieves or 2, ms.dim, dirs)
    if template.dim != ms.dim:
        raise InputError(f"template lives in R^{template.dim} but the measures live in R^{ms.dim}")
    try:
        cfg = SolveConfig(
            tolerance=args.tolerance,
            restarts=args.restarts,
            max_evals=args.max_evals,
            seed=args.seed,
            init_scale=args.init_scale,
        )
    except ValueError as exc:
        raise InputError(str(exc)) from None
    result = solve_fair(template, ms, cfg)
    out = result.to_dict()
    out["config"] = cfg.to_dict()
    out["template"] = template.to_dict()
    _emit(args, _dumps(out))
    if args.trace:
        Path(args.trace).write_text(_dumps(result.trace))
    if args.figure:
        save_partition_figure(args.figure, result.tree, ms,
                              title=f"{result.status}, discrepancy {result.discrepancy:.3g}")
    log.info("%s: discrepancy %.3g after %d evaluations", result.status, result.discrepancy, result.evals_used)
    return EXIT_OK if result.fair else EXIT_BEST_EFFORT


def cmd_necklace(args) -> int:
    try:
        nk = oracles.Necklace.parse(args.beads, args.thieves)
        split = oracles.necklace_split_exact(nk)
    except oracles.OracleError as exc:
        raise InputError(str(exc)) from None
    _emit(args, _dumps(split.to_dict()))
    return EXIT_OK


def cmd_bounds(args) -> int:
    try:
        rep = oracles.bounds(args.n, args.r, args.d)
    except oracles.OracleError as exc:
        raise InputError(str(exc)) from None
    _emit(args, _dumps(rep.to_dict()))
    return EXIT_OK


def cmd_generate(args) -> int:
    try:
        cfg = oracles.generate(args.kind, d=args.d, r=args.r, eps=args.eps, npoints=args.npoints, seed=args.seed)
    except oracles.OracleError as exc:
        raise InputError(str(exc)) from None
    _emit(args, _dumps(cfg.to_dict()))
    return EXIT_OK


def cmd_probe(args) -> int:
    if args.config:
        ms = _read_measures(args.config)
    else:
        try:
            ms = oracles.generate(args.kind, d=args.d, npoints=args.npoints, seed=args.seed).measures
        except oracles.OracleError as exc:
            raise InputError(str(exc)) from None
    if args.template:
        try:
            templates = [template_from_dict(_read_json(args.template, "template"))]
        except TemplateError as exc:
            raise InputError(f"template file {args.template}: {exc}") from None
    else:
        dirs = _parse_dirs(args.dirs, ms.dim) or list(np.eye(ms.dim))
        try:
            templates = oracles.probe_templates(args.cells, ms.dim, 2, dirs)
        except oracles.OracleError as exc:
            raise InputError(str(exc)) from None
    try:
        rep = oracles.infeasibility_probe(ms, templates, budget=args.budget, seed=args.seed)
    except (oracles.OracleError, MeasureError) as exc:
        raise InputError(str(exc)) from None
    out = rep.to_dict()
    out["templates"] = [t.to_dict() for t in templates]
    _emit(args, _dumps(out))
    if args.figure:
        best = templates[rep.best_template].decode(np.asarray(rep.best_params))
        save_probe_figure(args.figure, out, best if ms.dim == 2 else None, ms)
    log.info("probe evidence: best discrepancy %.4g", rep.best_discrepancy)
    return EXIT_OK


def cmd_render(args) -> int:
    tree = _read_tree(args.tree)
    ms = _read_measures(args.measures) if args.measures else None
    if tree.dim != 2:
        raise InputError(f"render supports planar trees only (got d = {tree.dim})")
    if args.bbox:
        try:
            bbox = tuple(float(c) for c in args.bbox.split(","))
        except ValueError:
            raise InputError("--bbox: expected xmin,ymin,xmax,ymax") from None
        if len(bbox) != 4:
            raise InputError("--bbox: expected xmin,ymin,xmax,ymax")
    else:
        bbox = bbox_for(ms) if ms is not None else (-1.0, -1.0, 1.0, 1.0)
    try:
        spec = RenderSpec(bbox=bbox, width=args.width, height=args.height)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    _emit(args, render_svg(tree, ms, spec))
    if args.png:
        save_partition_figure(args.png, tree, ms, bbox=bbox)
    return EXIT_OK


# -- parser ------------------------------------------------------------------------------


def _common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--seed", type=int, default=argparse.SUPPRESS if suppress else 0,
                        help="random seed (default 0)")
    parser.add_argument("--out", default=default, help="output file (default stdout)")
    parser.add_argument("--quiet", action="store_true", default=argparse.SUPPRESS if suppress else False)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairpart", description=__doc__.splitlines()[0])
    _common(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="search for a fair iterated partition")
    _common(p, suppress=True)
    p.add_argument("--measures", required=True)
    p.add_argument("--template", help="template tree file (\"a\": null / \"functionals\": null mark free slots)")
    p.add_argument("--iterated", type=int, default=1, help="number of leaves t for the shorthand template")
    p.add_argument("--thieves", type=int, default=None, help="number of thieves r (default 2)")
    p.add_argument("--dirs", default="auto", help="'auto' or 'x,y;x,y' node directions")
    p.add_argument("--tolerance", type=float, default=1e-6)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--max-evals", type=int, default=20000)
    p.add_argument("--init-scale", type=float, default=1.0)
    p.add_argument("--trace", help="write the per-stage search trace (JSON)")
    p.add_argument("--figure", help="write a PNG of the resulting partition (planar only)")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("necklace", help="exact necklace splitting")
    _common(p, suppress=True)
    p.add_argument("--beads", required=True, help="letters (AABB) or a JSON list of integers")
    p.add_argument("--thieves", type=int, default=2)
    p.set_defaults(func=cmd_necklace)

    p = sub.add_parser("bounds", help="known bounds on M, M', M''")
    _common(p, suppress=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--d", type=int, required=True)
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("generate", help="write a named measure configuration")
    _common(p, suppress=True)
    p.add_argument("--kind", required=True, choices=[oracles.SIMPLEX, oracles.PENTAGON, oracles.SPHERES])
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--eps", type=float, default=None)
    p.add_argument("--npoints", type=int, default=50)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("probe", help="gather evidence that no fair partition exists")
    _common(p, suppress=True)
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="measure file (e.g. from 'generate')")
    src.add_argument("--kind", choices=[oracles.SIMPLEX, oracles.PENTAGON, oracles.SPHERES])
    p.add_argument("--d", type=int, default=2)
    p.add_argument("--npoints", type=int, default=30)
    p.add_argument("--cells", type=int, default=3, help="number of cells of the probe templates")
    p.add_argument("--template", help="probe a single template file instead")
    p.add_argument("--dirs", default="auto")
    p.add_argument("--budget", type=int, default=20000)
    p.add_argument("--figure", help="write a PNG summary of the probe")
    p.set_defaults(func=cmd_probe)

    p = sub.add_parser("render", help="draw a planar partition as SVG")
    _common(p, suppress=True)
    p.add_argument("--tree", required=True, help="tree file or solve result")
    p.add_argument("--measures")
    p.add_argument("--bbox", help="xmin,ymin,xmax,ymax")
    p.add_argument("--width", type=int, default=480)
    p.add_argument("--height", type=int, default=480)
    p.add_argument("--png", help="also write a matplotlib PNG")
    p.set_defaults(func=cmd_render)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="fairpart: %(message)s")
    try:
        return args.func(args)
    except InputError as exc:
        print(f"fairpart {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
