"""Command-line driver: spectra, resonances, solves, sweeps, slope fits.

Subcommands
-----------
spectrum    eigenvalues/moments of the Newtonian operator -> CSV
resonances  dielectric / Minnaert / plasmonic frequencies  -> JSON
solve       one Foldy-Lax solve (direct + Born) with field samples -> JSON
sweep       delta sweep with reference-solver comparison -> CSV + JSON fits
fit         power-law slope fit of an (x, y) CSV -> JSON

All numeric CSV output uses '.' decimals and scientific notation with 17
significant digits; reruns with identical inputs are byte-identical
(no timestamps, sorted JSON keys, fixed column order). Outputs are written
via a temporary file and renamed, and removed again if a command fails
midway.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys as _sys
from pathlib import Path

from . import sweeps
from .config import ClusterConfig, ConfigError, derive_contrasts, parse_config
from .foldylax import assemble, check_invertibility, solve_born, solve_direct
from .spectral import (
    cache_key,
    assemble_newtonian,
    dielectric_resonances,
    eigensystem,
    load_cache,
    minnaert_resonance,
    plasmonic_resonances,
    realize_wavenumber,
    save_cache,
)

SCHEMA_VERSION = 1
_FMT = "%.16e"  # 17 significant digits


def _fnum(x) -> str:
    return _FMT % float(x)


class _OutputSet:
    """Write-through-temp outputs; partial files are removed on failure."""

    def __init__(self, out_dir: Path):
        self.out_dir = out_dir
        self.pending: list[tuple[Path, Path]] = []

    def path(self, name: str) -> Path:
        self.out_dir.mkdir(parents=True, exist_ok=True)
        tmp = self.out_dir / (name + ".tmp")
        final = self.out_dir / name
        self.pending.append((tmp, final))
        return tmp

    def commit(self):
        for tmp, final in self.pending:
            os.replace(tmp, final)
        self.pending.clear()

    def abort(self):
        for tmp, _ in self.pending:
            tmp.unlink(missing_ok=True)
        self.pending.clear()


def _load_config(path: str) -> ClusterConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def _spectral_pipeline(cfg: ClusterConfig, resolution: int, cache_dir: str | None):
    """(disc, spec): cached eigensystems carry no grid, so only `spectrum` and
    `resonances` may run grid-free; solves always assemble."""
    if cache_dir is not None:
        key = cache_key(cfg.shape, resolution)
        path = Path(cache_dir) / f"{key}.eig"
        if path.exists():
            return None, load_cache(path)
        disc = assemble_newtonian(cfg.shape, resolution)
        spec = eigensystem(disc)
        Path(cache_dir).mkdir(parents=True, exist_ok=True)
        save_cache(path, spec)
        return disc, spec
    disc = assemble_newtonian(cfg.shape, resolution)
    return disc, eigensystem(disc)


def _write_json(outs: _OutputSet, name: str, doc: dict):
    doc = {"schema_version": SCHEMA_VERSION, **doc}
    outs.path(name).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def cmd_spectrum(args) -> int:
    cfg = _load_config(args.config)
    _, spec = _spectral_pipeline(cfg, args.resolution, args.cache)
    count = min(args.count if args.count is not None else spec.count, spec.count)
    meta = {
        "command": "spectrum",
        "shape": cfg.shape.kind,
        "diameter": cfg.shape.diameter,
        "resolution": args.resolution,
        "n_cells": int(spec.eigenvectors.shape[0]),
        "measure": spec.measure,
        "n0": spec.n0,
    }
    outs = _OutputSet(Path(args.out))
    try:
        if args.format == "json":
            _write_json(
                outs,
                "spectrum.json",
                {
                    **meta,
                    "eigenvalues": [float(v) for v in spec.eigenvalues[:count]],
                    "moments": [float(v) for v in spec.moments[:count]],
                },
            )
        else:
            with open(outs.path("spectrum.csv"), "w", newline="", encoding="utf-8") as f:
                w = csv.writer(f)
                w.writerow(["n", "eigenvalue", "moment", "moment_sq"])
                for n in range(count):
                    w.writerow(
                        [n, _fnum(spec.eigenvalues[n]), _fnum(spec.moments[n]), _fnum(spec.moments[n] ** 2)]
                    )
            _write_json(outs, "spectrum_meta.json", meta)
        outs.commit()
    except BaseException:
        outs.abort()
        raise
    return 0


def cmd_resonances(args) -> int:
    cfg = _load_config(args.config)
    doc: dict = {"command": "resonances", "regime": cfg.regime.kind, "delta": cfg.delta}
    if cfg.regime.kind == "third":
        _, spec = _spectral_pipeline(cfg, args.resolution, args.cache)
        contrasts = derive_contrasts(cfg)
        rs = dielectric_resonances(spec, contrasts, cfg.delta, count=args.count or 5, a0=cfg.background.a0)
        rw = realize_wavenumber(cfg, spec)
        doc.update(
            {
                "dielectric": list(rs.dielectric),
                "dielectric_indices": list(rs.dielectric_indices),
                "incident_k": rw.k,
                "resonance_k": rw.k_res,
                "n0": rw.n0,
                "detuning_eps": rw.eps,
            }
        )
    elif cfg.regime.kind == "first":
        a1 = cfg.regime.c_a * cfg.delta**-2
        k_m, theta_b, theta_d = minnaert_resonance(
            cfg.shape, cfg.delta, cfg.background.a0, a1, surface_resolution=args.surface_level
        )
        doc.update({"minnaert_k": k_m, "theta_dB": theta_b, "theta_dD": theta_d, "a1": a1})
    else:
        ks, skipped, admissible = plasmonic_resonances(cfg.regime.eps0, cfg.regime.k_p, cfg.regime.sigmas)
        doc.update(
            {
                "plasmonic": list(ks),
                "skipped_indices": list(skipped),
                "admissible": list(admissible),
                "frequency_cap_sq": cfg.regime.k_p**2 / cfg.regime.eps0,
            }
        )
    outs = _OutputSet(Path(args.out))
    try:
        _write_json(outs, "resonances.json", doc)
        outs.commit()
    except BaseException:
        outs.abort()
        raise
    return 0


def cmd_solve(args) -> int:
    cfg = _load_config(args.config)
    disc, spec = _spectral_pipeline(cfg, args.resolution, None)
    rw = realize_wavenumber(cfg, spec)
    sys = assemble(cfg, spec, rw.k)
    q = solve_direct(sys)
    born = solve_born(sys, args.born_n)
    report = check_invertibility(sys, cfg)
    pts, radius = sweeps.default_eval_points(cfg, radius=args.eval_radius)
    from .foldylax import scattered_field

    samples = []
    for x in pts:
        direct = scattered_field(sys, q, x, variant="fl_direct")
        bornf = scattered_field(sys, born.q(args.born_n), x, variant=f"fl_born({args.born_n})")
        samples.append(
            {
                "x": list(direct.x),
                "fl_direct": [direct.value.real, direct.value.imag],
                "fl_born": [bornf.value.real, bornf.value.imag],
            }
        )
    doc = {
        "command": "solve",
        "k": rw.k,
        "resonance_k": rw.k_res,
        "n0": rw.n0,
        "norm_Bk": sys.norm_Bk,
        "C": [[c.real, c.imag] for c in sys.Cstar.astype(complex)],
        "Q_direct": [[v.real, v.imag] for v in q],
        "Q_born": [[v.real, v.imag] for v in born.q(args.born_n)],
        "born_converged": born.converged,
        "invertibility": {
            "norm_Bk": report.norm_Bk,
            "exponent": report.exponent,
            "predicate": report.predicate,
            "agrees": report.agrees,
        },
        "eval_radius": radius,
        "samples": samples,
    }
    outs = _OutputSet(Path(args.out))
    try:
        _write_json(outs, "solve.json", doc)
        outs.commit()
    except BaseException:
        outs.abort()
        raise
    return 0


def cmd_sweep(args) -> int:
    cfg = _load_config(args.config)
    deltas = [float(tok) for tok in args.deltas.split(",")]
    n_list = [int(tok) for tok in args.n_list.split(",")] if args.n_list else [1, 2]
    result = sweeps.run_sweep(
        cfg,
        deltas,
        h=args.h,
        t=args.t,
        n_list=n_list,
        resolution=args.resolution,
        eval_radius=args.eval_radius,
        jobs=args.jobs,
        with_oracle=not args.no_oracle,
    )
    outs = _OutputSet(Path(args.out))
    try:
        if args.format == "json":

            def _jval(val):
                if isinstance(val, (bool, int, str)):
                    return val
                v = float(val)
                return None if v != v else v  # NaN (oracle skipped) -> null

            rows = [
                {col: _jval(val) for col, val in zip(sweeps.RECORD_COLUMNS, rec.as_row())}
                for rec in result.records
            ]
            _write_json(
                outs,
                "sweep.json",
                {"command": "sweep", "h": args.h, "t": args.t, "records": rows, "fits": result.fits},
            )
        else:
            with open(outs.path("sweep.csv"), "w", newline="", encoding="utf-8") as f:
                w = csv.writer(f)
                w.writerow(sweeps.RECORD_COLUMNS)
                for rec in result.records:
                    row = []
                    for val in rec.as_row():
                        if isinstance(val, bool):
                            row.append("true" if val else "false")
                        elif isinstance(val, (int, str)):
                            row.append(val)
                        else:
                            row.append(_fnum(val))
                    w.writerow(row)
            _write_json(
                outs, "slope_fits.json", {"command": "sweep", "h": args.h, "t": args.t, "fits": result.fits}
            )
        outs.commit()
    except BaseException:
        outs.abort()
        raise
    return 0


def cmd_fit(args) -> int:
    with open(args.input, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    header = [c.strip().lower() for c in rows[0]]
    xi, yi = header.index("x"), header.index("y")
    pts = [(float(r[xi]), float(r[yi])) for r in rows[1:] if r]
    fit = sweeps.fit_slope(pts, args.kind)
    outs = _OutputSet(Path(args.out))
    try:
        _write_json(outs, "fit.json", {"command": "fit", **fit.as_dict()})
        outs.commit()
    except BaseException:
        outs.abort()
        raise
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="resoscat", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config=True):
        if config:
            sp.add_argument("--config", required=True, help="scene JSON document")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--resolution", type=int, default=12, help="cells per side on the reference shape")
        sp.add_argument("--cache", default=None, help="eigensystem cache directory")
        sp.add_argument("--jobs", type=int, default=1, help="worker pool size for sweep grids")
        sp.add_argument("--format", choices=("csv", "json"), default="csv")

    sp = sub.add_parser("spectrum", help="Newtonian eigenpairs and moments")
    common(sp)
    sp.add_argument("--count", type=int, default=None)
    sp.set_defaults(func=cmd_spectrum)

    sp = sub.add_parser("resonances", help="resonance frequencies for the configured regime")
    common(sp)
    sp.add_argument("--count", type=int, default=5)
    sp.add_argument("--surface-level", type=int, default=4, help="surface mesh refinement (first regime)")
    sp.set_defaults(func=cmd_resonances)

    sp = sub.add_parser("solve", help="one Foldy-Lax solve with field samples")
    common(sp)
    sp.add_argument("--born-n", type=int, default=4)
    sp.add_argument("--eval-radius", type=float, default=None)
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("sweep", help="delta sweep with oracle comparison and slope fits")
    common(sp)
    sp.add_argument("--deltas", required=True, help="comma-separated delta grid")
    sp.add_argument("--h", type=float, required=True, help="detuning exponent")
    sp.add_argument("--t", type=float, required=True, help="dilution exponent")
    sp.add_argument("--n-list", default="1,2", help="Born orders, comma-separated")
    sp.add_argument("--eval-radius", type=float, default=None)
    sp.add_argument("--no-oracle", action="store_true", help="skip the reference solver")
    sp.set_defaults(func=cmd_sweep)

    sp = sub.add_parser("fit", help="slope fit of an x,y CSV")
    sp.add_argument("--input", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--kind", choices=("log_delta", "log_log_delta"), default="log_delta")
    sp.set_defaults(func=cmd_fit)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
