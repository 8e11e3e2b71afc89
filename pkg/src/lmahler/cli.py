"""Command-line front end.

Exit codes: 0 success, 1 failed check, 2 bad spec or config, 3 dual range
too small, 4 non-integrable input, 5 equipartition search did not converge.
"""
import json
import math
import sys
from dataclasses import dataclass, fields
from pathlib import Path

import click
import numpy as np

EXIT_FAILED, EXIT_PARSE, EXIT_CLIPPING, EXIT_INTEGRABILITY, EXIT_NONCONVERGENCE = 1, 2, 3, 4, 5


@dataclass
class RunConfig:
    spec: str = None
    n: int = 2
    nodes: int = None
    range: float = None
    dual_range: float = None
    tol: float = None
    suite: str = "smoke"
    seed: int = 0
    out: str = None
    scale_sweep: str = None
    regularize_schedule: str = None

    def validate(self):
        if self.nodes is not None and (self.nodes < 33 or self.nodes % 2 == 0):
            raise click.UsageError("--nodes must be odd and >= 33")
        if self.tol is not None and not self.tol > 0:
            raise click.UsageError("--tol must be positive")
        if self.n not in (1, 2, 3):
            raise click.UsageError("--n must be 1, 2 or 3")
        return self


def _format(obj):
    """JSON with every float written to 17 significant digits."""
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "NaN"
        if math.isinf(v):
            return "Infinity" if v > 0 else "-Infinity"
        text = format(v, ".17g")
        return text if any(c in text for c in ".en") else text + ".0"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {_format(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_format(v) for v in obj) + "]"
    return json.dumps(str(obj))


class Emitter:
    """Writes JSON lines to stdout or ``<out>.jsonl``, single-threaded."""

    def __init__(self, out=None):
        self.out = out
        self.lines = []

    def emit(self, record):
        self.lines.append(_format(record))

    def close(self):
        text = "".join(line + "\n" for line in self.lines)
        if self.out:
            Path(self.out).with_suffix(".jsonl").write_text(text)
        else:
            sys.stdout.write(text)


def _load_config(ctx_obj, **flags):
    data = {}
    path = ctx_obj.get("config")
    if path:
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise click.UsageError(f"cannot read config {path}: {exc}")
        unknown = set(data) - {f.name for f in fields(RunConfig)}
        if unknown:
            raise click.UsageError(f"unknown config keys: {sorted(unknown)}")
    for k, v in flags.items():
        if v is not None:
            data[k] = v
    return RunConfig(**data).validate()


def _parse(cfg):
    from .convex_core.specs import SpecError, parse_spec

    if not cfg.spec:
        raise click.UsageError("--spec is required")
    try:
        return parse_spec(cfg.spec, cfg.n)
    except SpecError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_PARSE)


def _grid_label(axes):
    return {"counts": [a.count for a in axes], "half_widths": [a.hi for a in axes]}


def _sweep(text):
    try:
        a, b, k = text.split(":")
        return np.geomspace(float(a), float(b), int(k))
    except ValueError:
        raise click.UsageError("--scale-sweep expects start:stop:count")


def _schedule(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise click.UsageError("--regularize-schedule expects comma-separated values of m")


common = [
    click.option("--spec", help="Function spec, e.g. 'pnorm p=1.5 scale=2'."),
    click.option("--n", type=int, help="Dimension (1, 2 or 3)."),
    click.option("--nodes", type=int, help="Nodes per axis (odd, >= 33)."),
    click.option("--range", "range_", type=float, help="Primal half-width (default: from the tail bound)."),
    click.option("--dual-range", type=float, help="Dual half-width (default: from the slope range)."),
    click.option("--tol", type=float, help="Tolerance override."),
    click.option("--out", help="Output path prefix."),
]


def with_common(fn):
    for opt in reversed(common):
        fn = opt(fn)
    return fn


@click.group()
@click.option("--config", type=click.Path(exists=True, dir_okay=False), help="JSON file with RunConfig fields.")
@click.pass_context
def main(ctx, config):
    """Legendre transforms, volume products and equipartitions of even convex functions."""
    ctx.ensure_object(dict)
    ctx.obj["config"] = config


@main.command()
@with_common
@click.option("--extend/--raw", default=False, help="Treat the box as a truncation (default: exact lattice sup).")
@click.pass_context
def transform(ctx, spec, n, nodes, range_, dual_range, tol, out, extend):
    """Sample a spec, conjugate it and write both grids."""
    from .convex_core.grid import GrowthError, make_axes, sample, save_grid
    from .legendre.transform import RangeClippingError, auto_dual_axes, conjugate
    from .measures.integrals import DEFAULT_NODES, default_grid

    cfg = _load_config(ctx.obj, spec=spec, n=n, nodes=nodes, range=range_, dual_range=dual_range, tol=tol, out=out)
    f_spec = _parse(cfg)
    count = cfg.nodes or DEFAULT_NODES[cfg.n]
    try:
        axes = make_axes(cfg.range, count, cfg.n) if cfg.range else default_grid(f_spec, cfg.n, count)
    except GrowthError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INTEGRABILITY)
    f = sample(f_spec, axes, cfg.n)
    dual = make_axes(cfg.dual_range, count, cfg.n) if cfg.dual_range else auto_dual_axes(f)
    try:
        Lf = conjugate(f, dual, extend=extend, evaluate=f_spec.evaluate if extend else None)
    except RangeClippingError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CLIPPING)
    viol = fenchel_young_violation(f, Lf, seed=cfg.seed)
    if cfg.out:
        save_grid(f, cfg.out + ".primal.lmgf")
        save_grid(Lf, cfg.out + ".dual.lmgf")
    em = Emitter(cfg.out)
    em.emit({
        "quantity": "transform",
        "spec": f_spec.text(),
        "grid": _grid_label(f.axes),
        "dual_grid": _grid_label(Lf.axes),
        "fenchel_young_violation": viol,
        "extend": extend,
    })
    em.close()


def fenchel_young_violation(f, Lf, samples=256, seed=0):
    """max (<x, y> - f(x) - Lf(y)) over random finite primal nodes and all dual nodes."""
    rng = np.random.default_rng(seed)
    xs = f.points()[f.finite()]
    fx = f.values[f.finite()]
    pick = rng.choice(len(xs), size=min(samples, len(xs)), replace=False)
    ys = Lf.points()[Lf.finite()]
    ly = Lf.values[Lf.finite()]
    worst = -np.inf
    for k in pick:
        worst = max(worst, float(np.max(ys @ xs[k] - fx[k] - ly)))
    return worst


@main.command("volume-product")
@with_common
@click.option("--scale-sweep", help="start:stop:count, geometric values of t for P(t f).")
@click.pass_context
def volume_product_cmd(ctx, spec, n, nodes, range_, dual_range, tol, out, scale_sweep):
    """Volume product with its error estimate and the two bounds."""
    from .convex_core.grid import GrowthError, make_axes
    from .legendre.transform import RangeClippingError
    from .measures.integrals import build_pair, volume_product, volume_product_scaled

    cfg = _load_config(ctx.obj, spec=spec, n=n, nodes=nodes, range=range_, dual_range=dual_range, tol=tol,
                       out=out, scale_sweep=scale_sweep)
    f_spec = _parse(cfg)
    try:
        axes = make_axes(cfg.range, cfg.nodes or 513, cfg.n) if cfg.range else None
        pair = build_pair(f_spec, cfg.n, nodes=cfg.nodes, axes=axes)
        vp = volume_product(pair)
    except GrowthError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INTEGRABILITY)
    except RangeClippingError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_CLIPPING)
    lo, hi = 4.0 ** cfg.n, (2 * math.pi) ** cfg.n
    grid = _grid_label(pair.grid.axes) if pair.grid is not None else "exact"
    em = Emitter(cfg.out)
    em.emit({
        "quantity": "volume_product",
        "value": vp.value,
        "abs_error_estimate": vp.error,
        "grid": grid,
        "spec": f_spec.text(),
        "region": "whole",
        "method": vp.method,
        "lower_bound": lo,
        "upper_bound": hi,
        "lower_margin": vp.value - lo,
        "upper_margin": hi - vp.value,
    })
    if cfg.scale_sweep:
        for t in _sweep(cfg.scale_sweep):
            em.emit({
                "quantity": "volume_product_scaled",
                "t": float(t),
                "value": volume_product_scaled(pair, float(t)),
                "spec": f_spec.text(),
                "grid": grid,
                "region": "whole",
            })
    em.close()


@main.command()
@with_common
@click.option("--regularize-schedule", help="Comma-separated m values for the regularise-then-equipartition run.")
@click.pass_context
def equipartition(ctx, spec, n, nodes, range_, dual_range, tol, out, regularize_schedule):
    """Strong equipartition map of a planar spec and its residual report."""
    from .convex_core.grid import GrowthError
    from .equipartition import NonConvergenceError, regularize_then_equipartition, strong_equipartition_map

    cfg = _load_config(ctx.obj, spec=spec, n=n, nodes=nodes, range=range_, dual_range=dual_range, tol=tol,
                       out=out, regularize_schedule=regularize_schedule)
    if cfg.n != 2:
        raise click.UsageError("equipartition maps are constructed for n = 2")
    f_spec = _parse(cfg)
    band = cfg.tol or 1e-6
    em = Emitter(cfg.out)
    try:
        T, report = strong_equipartition_map(f_spec)
        rec = {"quantity": "equipartition", "spec": f_spec.text(), "strong": report.strong(band)}
        rec.update(report.to_dict())
        em.emit(rec)
        if cfg.regularize_schedule:
            steps = regularize_then_equipartition(f_spec, _schedule(cfg.regularize_schedule), nodes=cfg.nodes or 513)
            for st in steps:
                rec = {"quantity": "regularized_equipartition", "spec": f_spec.text(), "bounded": st.bounded}
                rec.update(st.to_dict())
                em.emit(rec)
    except NonConvergenceError as exc:
        em.close()
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_NONCONVERGENCE)
    except GrowthError as exc:
        em.close()
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INTEGRABILITY)
    em.close()


@main.command()
@click.option("--suite", type=click.Choice(["smoke", "full", "dimension3"]), help="Battery to run.")
@click.option("--seed", type=int, help="Seed for the random members of the battery.")
@click.option("--out", help="Output path prefix for .jsonl and .csv reports.")
@click.pass_context
def verify(ctx, suite, seed, out):
    """Run a verification battery; exit 1 if any check fails."""
    from .verify import reports_to_csv, run_suite

    cfg = _load_config(ctx.obj, suite=suite, seed=seed, out=out)
    reports = run_suite(cfg.suite, cfg.seed)
    em = Emitter(cfg.out)
    for r in reports:
        em.emit(r.to_dict())
    em.close()
    if cfg.out:
        Path(cfg.out).with_suffix(".csv").write_text(reports_to_csv(reports))
    failed = [r for r in reports if not r.passed]
    click.echo(f"{len(reports) - len(failed)}/{len(reports)} checks passed", err=True)
    if failed:
        sys.exit(EXIT_FAILED)


if __name__ == "__main__":
    main()
