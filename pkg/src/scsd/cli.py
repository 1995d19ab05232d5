"""Command-line front end: phantom generation, single solves, metrics and parameter sweeps.

Subcommands::

    scsd phantom --alpha 45 --piso 0.75 --output run/ph
    scsd solve --input run/ph --grad-table run/ph_grad.txt --method scsd --output run/coef
    scsd metrics --coeffs run/coef --truth run/ph_truth.json --input run/ph --grad-table run/ph_grad.txt
    scsd sweep --seeds 1 --methods scsd --output sweep.csv
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import functools
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .metrics import evaluate
from .model import SfrParams, build_dictionary
from .phantom import DEFAULT_ISO_DIFFUSIVITY, LAMBDA_PAR, LAMBDA_PERP, GroundTruth, PhantomSpec, generate_phantom
from .presets import METHOD_NAMES, PRESETS, canonical_method, make_preset
from .dirfilter import FilterBank
from .solver import SolverConfig, admm_solve
from .sphere import icosa_tessellate, read_gradient_table, write_gradient_table
from .volume import CoefficientVolume, SignalVolume, VolumeFormatError, load_volume, save_volume

log = logging.getLogger("scsd")

DEFAULT_ALPHAS = tuple(float(a) for a in range(30, 91, 5))
DEFAULT_PISOS = (0.0, 0.25, 0.5, 0.75)
DEFAULT_ACQUISITIONS = ((1000.0, 20.0), (3000.0, 7.0))
DEFAULT_RECON_ORDER = 3

CSV_FIELDS = (
    "method", "alpha_deg", "p_iso", "b_value", "snr", "seed",
    "aae_deg", "tp_rate", "fp_rate", "contrast",
    "iterations", "converged", "diverged", "relative_residual", "status", "error",
)
KEY_FIELDS = CSV_FIELDS[:6]
METRIC_FIELDS = ("aae_deg", "tp_rate", "fp_rate", "contrast")
WEIGHT_KEYS = ("lambda", "mu", "nu")


class CliError(Exception):
    """User-facing error; reported without a traceback and exit code 2."""


def fmt_num(x) -> str:
    """Shortest round-trip text of a number; ``inf``/``nan`` spelled out."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


# ---------------------------------------------------------------------------
# shared building blocks

@functools.lru_cache(maxsize=8)
def recon_grid(order: int):
    return icosa_tessellate(order, hemisphere=True)


@functools.lru_cache(maxsize=8)
def _dictionary(b_value: float, acq_order: int, recon_order: int, lambda_par: float, lambda_perp: float):
    acq, _ = icosa_tessellate(acq_order, hemisphere=True, b_value=b_value)
    rec, _ = recon_grid(recon_order)
    return build_dictionary(acq, rec, SfrParams(lambda_par, lambda_perp, b_value))


@functools.lru_cache(maxsize=8)
def _bank(recon_order: int, tau: float, dims: tuple):
    # filters depend on the reconstruction directions and tau only
    rec, _ = recon_grid(recon_order)
    return FilterBank(rec.vectors, tau, dims)


def _row_seed(seed: int, alpha: float, p_iso: float, b_value: float) -> int:
    # one independent noise stream per (cell, seed); shared by all methods of the cell
    key = [int(seed), int(round(alpha * 1000)), int(round(p_iso * 1000)), int(round(b_value))]
    return int(np.random.SeedSequence(key).generate_state(1)[0])


# ---------------------------------------------------------------------------
# sweep

@dataclass
class SweepGrid:
    alphas: tuple = DEFAULT_ALPHAS
    p_isos: tuple = DEFAULT_PISOS
    acquisitions: tuple = DEFAULT_ACQUISITIONS
    methods: tuple = METHOD_NAMES
    seeds: tuple = (0, 1, 2)
    dims: tuple = (16, 16, 12)
    recon_order: int = DEFAULT_RECON_ORDER
    max_iters: int = 200
    primal_tol: float = 1e-4

    def groups(self):
        """Work units in canonical order: one phantom, several methods."""
        for b, snr in self.acquisitions:
            for alpha in self.alphas:
                for p_iso in self.p_isos:
                    for seed in self.seeds:
                        yield (float(alpha), float(p_iso), float(b), float(snr), int(seed))

    def keys(self):
        for alpha, p_iso, b, snr, seed in self.groups():
            for m in self.methods:
                yield row_key(m, alpha, p_iso, b, snr, seed)

    def __len__(self):
        return len(self.alphas) * len(self.p_isos) * len(self.acquisitions) * len(self.methods) * len(self.seeds)


def row_key(method, alpha, p_iso, b, snr, seed) -> tuple:
    return (canonical_method(method), fmt_num(alpha), fmt_num(p_iso), fmt_num(b), fmt_num(snr), str(int(seed)))


def run_group(grid: SweepGrid, group, methods) -> list[dict]:
    """Generate one phantom and evaluate every requested method on it."""
    alpha, p_iso, b, snr, seed = group
    spec = PhantomSpec(dims=grid.dims, crossing_angle=alpha, p_iso_inside=p_iso,
                       sfr=SfrParams(LAMBDA_PAR, LAMBDA_PERP, b), snr=snr,
                       seed=_row_seed(seed, alpha, p_iso, b))
    signal, truth = generate_phantom(spec)
    _, adj = recon_grid(grid.recon_order)
    dictionary = _dictionary(b, spec.acq_order, grid.recon_order, LAMBDA_PAR, LAMBDA_PERP)
    rows = []
    for method in methods:
        row = dict(zip(KEY_FIELDS, row_key(method, alpha, p_iso, b, snr, seed)))
        t0 = time.perf_counter()
        try:
            cfg = make_preset(method, max_iters=grid.max_iters, primal_tol=grid.primal_tol)
            bank = None
            if cfg.mu > 0:
                bank = _bank(grid.recon_order, cfg.tau, tuple(grid.dims))
            coeffs, report = admm_solve(signal, dictionary, cfg, bank=bank, track_objective=False)
            m = evaluate(coeffs, truth, adj, signal, dictionary.H)
            row.update(aae_deg=fmt_num(m.aae_deg), tp_rate=fmt_num(m.tp_rate), fp_rate=fmt_num(m.fp_rate),
                       contrast=fmt_num(m.contrast), iterations=str(report.iterations),
                       converged=str(bool(report.converged)).lower(),
                       diverged=str(bool(report.diverged)).lower(),
                       relative_residual=fmt_num(report.relative_residual[-1]), status="ok", error="")
        except Exception as exc:  # recorded per row; the sweep carries on
            log.exception("row %s failed", row)
            row.update({k: "" for k in CSV_FIELDS[6:]})
            row.update(status="error", error=f"{type(exc).__name__}: {exc}")
        log.info("%s alpha=%s piso=%s b=%s seed=%s: %.1fs", row["method"], row["alpha_deg"],
                 row["p_iso"], row["b_value"], row["seed"], time.perf_counter() - t0)
        rows.append(row)
    return rows


def read_rows(path) -> list[dict]:
    path = Path(path)
    if not path.exists() or path.stat().st_size == 0:
        return []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise CliError(f"{path} does not have the sweep CSV header")
        return list(reader)


def _write_rows(path, rows) -> None:
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\r\n")
        w.writeheader()
        w.writerows(rows)
    os.replace(tmp, path)


def run_sweep(grid: SweepGrid, output, jobs: int = 1) -> list[dict]:
    """Run all missing rows of ``grid`` and rewrite ``output`` in canonical order.

    Rows already present in ``output`` (matched by key) are not recomputed,
    so an interrupted sweep resumes where it stopped. Completed rows are
    appended as they arrive.
    """
    output = Path(output)
    existing = {tuple(r[k] for k in KEY_FIELDS): r for r in read_rows(output)}
    todo = []
    for group in grid.groups():
        missing = [m for m in grid.methods if row_key(m, *group) not in existing]
        if missing:
            todo.append((group, missing))
    log.info("sweep: %d rows total, %d groups to run", len(grid), len(todo))
    if not output.exists():
        _write_rows(output, [])

    def collect(rows):
        with open(output, "a", newline="", encoding="utf-8") as fh:
            w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\r\n")
            for r in rows:
                existing[tuple(r[k] for k in KEY_FIELDS)] = r
                w.writerow(r)

    if jobs > 1 and len(todo) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_group, grid, g, ms) for g, ms in todo]
            for fut in futures:
                collect(fut.result())
    else:
        for g, ms in todo:
            collect(run_group(grid, g, ms))

    keys = list(grid.keys())
    ordered = [existing[k] for k in keys]
    wanted = set(keys)
    extra = [r for k, r in existing.items() if k not in wanted]
    _write_rows(output, ordered + extra)
    return ordered


def _float(s: str) -> float:
    return float(s) if s not in ("", None) else float("nan")


def aggregate(rows) -> list[dict]:
    """Median and inter-quartile range of each metric over seeds, per cell."""
    cells: dict = {}
    for r in rows:
        if r["status"] != "ok":
            continue
        key = (r["method"], r["alpha_deg"], r["p_iso"], r["b_value"], r["snr"])
        cells.setdefault(key, []).append(r)
    out = []
    for key, rs in cells.items():
        rec = dict(zip(("method", "alpha_deg", "p_iso", "b_value", "snr"), key))
        rec["n"] = str(len(rs))
        for m in METRIC_FIELDS:
            vals = np.array([_float(r[m]) for r in rs])
            vals = vals[~np.isnan(vals)]
            if len(vals) == 0:
                med = q1 = q3 = float("nan")
            else:
                med, q1, q3 = np.median(vals), np.percentile(vals, 25), np.percentile(vals, 75)
            rec[f"{m}_median"] = fmt_num(med)
            rec[f"{m}_iqr"] = fmt_num(q3 - q1)
        out.append(rec)
    return out


def write_summary(rows, path) -> None:
    agg = aggregate(rows)
    fields = ["method", "alpha_deg", "p_iso", "b_value", "snr", "n"]
    for m in METRIC_FIELDS:
        fields += [f"{m}_median", f"{m}_iqr"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.DictWriter(fh, fieldnames=fields, lineterminator="\r\n")
        w.writeheader()
        w.writerows(agg)


# ---------------------------------------------------------------------------
# configuration for `solve`

def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment, dashes in keys equal underscores."""
    out = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise CliError(f"cannot read config file {path}: {exc}") from None
    for n, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise CliError(f"{path}:{n}: expected key=value")
        k, v = (p.strip() for p in line.split("=", 1))
        out[k.replace("-", "_").lower()] = v
    return out


_SOLVE_KEYS = {
    "method": str, "lambda": float, "mu": float, "nu": float, "delta": float,
    "max_iters": int, "tol": float, "recon_order": int, "dict_bvalue": float,
    "lambda_par": float, "lambda_perp": float,
}


def resolve_solver_config(flags: dict, config: dict | None = None) -> tuple[str, SolverConfig]:
    """Merge preset defaults, config-file values and command-line flags.

    Flags win over the config file, which wins over the preset. Setting a
    regularization weight that differs from a named preset is rejected; use
    ``method = custom`` for free weights.
    """
    merged = {}
    for src in (config or {}), flags:
        for k, v in src.items():
            if v is None:
                continue
            if k not in _SOLVE_KEYS:
                raise CliError(f"unknown setting {k!r}")
            try:
                merged[k] = _SOLVE_KEYS[k](v)
            except ValueError:
                raise CliError(f"invalid value for {k}: {v!r}") from None
    method = merged.get("method", "scsd").lower()
    extra = {}
    if "delta" in merged:
        extra["delta_u"] = extra["delta_v"] = merged["delta"]
    if "max_iters" in merged:
        extra["max_iters"] = merged["max_iters"]
    if "tol" in merged:
        extra["primal_tol"] = merged["tol"]
    try:
        if method == "custom":
            lam, mu, nu = (merged.get(k, 0.0) for k in WEIGHT_KEYS)
            kwargs = {"delta_u": 0.5, "delta_v": 0.5, **extra}
            cfg = SolverConfig(lam=lam, mu=mu, nu=nu, include_iso_column=True, **kwargs)
            return "custom", cfg
        name = canonical_method(method)
        preset = dict(zip(WEIGHT_KEYS, PRESETS[name][:3]))
        for k in WEIGHT_KEYS:
            if k in merged and merged[k] != preset[k]:
                raise CliError(f"preset/override conflict: method {name} fixes {k}={preset[k]}, "
                               f"got {merged[k]}; use --method custom")
        return name, make_preset(name, **extra)
    except ValueError as exc:
        raise CliError(str(exc)) from None


# ---------------------------------------------------------------------------
# subcommands

def cmd_phantom(args) -> int:
    try:
        spec = PhantomSpec(dims=tuple(args.dims), crossing_angle=args.alpha, fibre_radius_vox=args.radius,
                           p_iso_inside=args.piso, iso_diffusivity=args.iso_diffusivity,
                           sfr=SfrParams(args.lambda_par, args.lambda_perp, args.bvalue),
                           snr=args.snr, seed=args.seed)
    except ValueError as exc:
        raise CliError(str(exc)) from None
    signal, truth = generate_phantom(spec)
    out = Path(args.output)
    out.parent.mkdir(parents=True, exist_ok=True)
    save_volume(signal, out)
    truth.save(f"{out}_truth.json", spec)
    write_gradient_table(signal.acquisition, f"{out}_grad.txt")
    print(f"wrote {out}.json/.raw ({signal.dims}, K={signal.K}), {out}_truth.json, {out}_grad.txt")
    return 0


def _load_signal(path) -> SignalVolume:
    try:
        vol = load_volume(path)
    except (OSError, VolumeFormatError) as exc:
        raise CliError(f"cannot load volume {path}: {exc}") from None
    if not isinstance(vol, SignalVolume):
        raise CliError(f"{path} is not a signal volume")
    return vol


def _dictionary_for(signal: SignalVolume, grad_table, b_value, recon_order, lambda_par, lambda_perp):
    if b_value is None:
        b_value = signal.acquisition.b_value
    if b_value is None:
        raise CliError("no b-value: pass --dict-bvalue")
    try:
        acq = read_gradient_table(grad_table, b_value, hemisphere=signal.acquisition.hemisphere)
    except (OSError, ValueError) as exc:
        raise CliError(f"cannot read gradient table {grad_table}: {exc}") from None
    if len(acq) != signal.K or not np.allclose(acq.vectors, signal.acquisition.vectors, atol=1e-6):
        raise CliError("gradient table does not match the volume's acquisition directions")
    signal = dataclasses.replace(signal, acquisition=acq)
    rec, adj = recon_grid(recon_order)
    return signal, build_dictionary(acq, rec, SfrParams(lambda_par, lambda_perp, b_value)), adj


def cmd_solve(args) -> int:
    flags = {
        "method": args.method, "lambda": args.lam, "mu": args.mu, "nu": args.nu, "delta": args.delta,
        "max_iters": args.max_iters, "tol": args.tol, "recon_order": args.recon_order,
        "dict_bvalue": args.dict_bvalue, "lambda_par": args.lambda_par, "lambda_perp": args.lambda_perp,
    }
    config = read_config(args.config) if args.config else {}
    name, cfg = resolve_solver_config(flags, config)
    settings = {**{k: _SOLVE_KEYS[k](v) for k, v in config.items() if k in _SOLVE_KEYS},
                **{k: v for k, v in flags.items() if v is not None}}
    signal = _load_signal(args.input)
    signal, dictionary, _ = _dictionary_for(
        signal, args.grad_table, settings.get("dict_bvalue"), settings.get("recon_order", DEFAULT_RECON_ORDER),
        settings.get("lambda_par", LAMBDA_PAR), settings.get("lambda_perp", LAMBDA_PERP))
    t0 = time.perf_counter()
    coeffs, report = admm_solve(signal, dictionary, cfg)
    elapsed = time.perf_counter() - t0
    save_volume(coeffs, args.output)
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump({"method": name, "config": cfg.to_dict(), "seconds": elapsed,
                       "convergence": report.to_dict()}, fh, indent=2)
    print(f"{name}: {report.message}; relative residual {report.relative_residual[-1]:.3g}; "
          f"wrote {args.output}")
    if report.diverged:
        print("warning: primal residual grew for a run of iterations", file=sys.stderr)
    return 0 if np.isfinite(report.relative_residual[-1]) else 1


def cmd_metrics(args) -> int:
    try:
        coeffs = load_volume(args.coeffs)
        truth = GroundTruth.load(args.truth)
    except (OSError, VolumeFormatError, ValueError, KeyError) as exc:
        raise CliError(f"cannot load inputs: {exc}") from None
    if not isinstance(coeffs, CoefficientVolume):
        raise CliError(f"{args.coeffs} is not a coefficient volume")
    _, adj = icosa_tessellate(_order_of(len(coeffs.recon_dirs)))
    signal = H = None
    if not coeffs.has_iso:
        if not (args.input and args.grad_table):
            raise CliError("--input and --grad-table are needed for methods without isotropic row")
        signal = _load_signal(args.input)
        b = args.dict_bvalue if args.dict_bvalue is not None else signal.acquisition.b_value
        acq = read_gradient_table(args.grad_table, b, hemisphere=signal.acquisition.hemisphere)
        H = build_dictionary(acq, coeffs.recon_dirs, SfrParams(args.lambda_par, args.lambda_perp, b)).H
    report = evaluate(coeffs, truth, adj, signal, H)
    text = json.dumps({k: (fmt_num(v) if isinstance(v, float) else v) for k, v in report.to_dict().items()},
                      indent=2)
    if args.output:
        Path(args.output).write_text(text + "\n", encoding="utf-8")
    print(text)
    return 0


def _order_of(count: int) -> int:
    for order in range(6):
        if 10 * 4 ** order + 2 == 2 * count:
            return order
    raise CliError(f"{count} reconstruction directions do not form a tessellated hemisphere")


def _float_list(text: str) -> tuple:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _acq_list(text: str) -> tuple:
    out = []
    for item in text.split(","):
        try:
            b, snr = item.split(":")
            out.append((float(b), float(snr)))
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected b:snr pairs, got {item!r}") from None
    return tuple(out)


def _method_list(text: str) -> tuple:
    try:
        return tuple(canonical_method(m.strip()) for m in text.split(",") if m.strip())
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def cmd_sweep(args) -> int:
    grid = SweepGrid(alphas=args.alphas, p_isos=args.pisos, acquisitions=args.acq, methods=args.methods,
                     seeds=tuple(range(args.seed_offset, args.seed_offset + args.seeds)), dims=tuple(args.dims),
                     recon_order=args.recon_order, max_iters=args.max_iters, primal_tol=args.tol)
    rows = run_sweep(grid, args.output, jobs=args.jobs)
    if args.summary:
        write_summary(rows, args.summary)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"{len(rows)} rows in {args.output} ({failed} failed)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scsd", description="Spatially coherent spherical deconvolution")
    p.add_argument("-v", "--verbose", action="count", default=0, help="more logging (repeatable)")
    sub = p.add_subparsers(dest="command", required=True)

    def sfr_flags(sp, default=True):
        sp.add_argument("--lambda-par", type=float, default=LAMBDA_PAR if default else None,
                        help="axial diffusivity of the fibre response (mm^2/s)")
        sp.add_argument("--lambda-perp", type=float, default=LAMBDA_PERP if default else None,
                        help="radial diffusivity of the fibre response (mm^2/s)")

    ph = sub.add_parser("phantom", help="generate a crossing-bundle phantom")
    ph.add_argument("--alpha", type=float, default=60.0, help="crossing angle in degrees")
    ph.add_argument("--piso", type=float, default=0.25, help="isotropic fraction inside the bundles")
    ph.add_argument("--bvalue", type=float, default=3000.0)
    ph.add_argument("--snr", type=float, default=float("inf"), help="signal-to-noise ratio ('inf' for none)")
    ph.add_argument("--seed", type=int, default=0)
    ph.add_argument("--dims", type=int, nargs=3, default=(16, 16, 12), metavar=("NX", "NY", "NZ"))
    ph.add_argument("--radius", type=float, default=4.0, help="bundle radius in voxels")
    ph.add_argument("--iso-diffusivity", type=float, default=DEFAULT_ISO_DIFFUSIVITY)
    sfr_flags(ph)
    ph.add_argument("--output", required=True, help="output prefix")
    ph.set_defaults(func=cmd_phantom)

    so = sub.add_parser("solve", help="reconstruct fODFs and the isotropic map")
    so.add_argument("--input", required=True, help="signal volume prefix")
    so.add_argument("--grad-table", required=True, help="gradient table (one unit vector per line)")
    so.add_argument("--dict-bvalue", type=float, help="b-value of the dictionary (default: volume header)")
    so.add_argument("--method", choices=["csd", "minl1", "csdfc", "mintvl1", "scsd", "custom"])
    so.add_argument("--lambda", dest="lam", type=float, help="l1 weight")
    so.add_argument("--mu", type=float, help="fibre-continuity weight")
    so.add_argument("--nu", type=float, help="total-variation weight")
    so.add_argument("--delta", type=float, help="ADMM penalty, used for both splittings")
    so.add_argument("--max-iters", type=int)
    so.add_argument("--tol", type=float, help="relative primal residual tolerance")
    so.add_argument("--recon-order", type=int, help="tessellation order of the reconstruction grid")
    so.add_argument("--config", help="key=value file; flags take precedence")
    sfr_flags(so, default=False)
    so.add_argument("--output", required=True, help="coefficient volume prefix")
    so.add_argument("--report", help="JSON convergence log")
    so.set_defaults(func=cmd_solve)

    me = sub.add_parser("metrics", help="score a reconstruction against phantom ground truth")
    me.add_argument("--coeffs", required=True)
    me.add_argument("--truth", required=True)
    me.add_argument("--input", help="signal volume (for the residual isotropic map)")
    me.add_argument("--grad-table")
    me.add_argument("--dict-bvalue", type=float)
    sfr_flags(me)
    me.add_argument("--output", help="write the JSON report here as well")
    me.set_defaults(func=cmd_metrics)

    sw = sub.add_parser("sweep", help="run the phantom experiment grid into a CSV")
    sw.add_argument("--alphas", type=_float_list, default=DEFAULT_ALPHAS, help="comma-separated degrees")
    sw.add_argument("--pisos", type=_float_list, default=DEFAULT_PISOS)
    sw.add_argument("--acq", type=_acq_list, default=DEFAULT_ACQUISITIONS, help="b:snr pairs, e.g. 1000:20,3000:7")
    sw.add_argument("--methods", type=_method_list, default=METHOD_NAMES)
    sw.add_argument("--seeds", type=int, default=3, help="number of noise seeds")
    sw.add_argument("--seed-offset", type=int, default=0)
    sw.add_argument("--dims", type=int, nargs=3, default=(16, 16, 12), metavar=("NX", "NY", "NZ"))
    sw.add_argument("--recon-order", type=int, default=DEFAULT_RECON_ORDER)
    sw.add_argument("--max-iters", type=int, default=200)
    sw.add_argument("--tol", type=float, default=1e-4)
    sw.add_argument("--jobs", type=int, default=1, help="worker processes")
    sw.add_argument("--output", required=True, help="CSV file (resumed if it exists)")
    sw.add_argument("--summary", help="per-cell median/IQR CSV")
    sw.set_defaults(func=cmd_sweep)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CliError as exc:
        print(f"scsd {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
