"""Command-line experiment runner.

Every run writes ``record.json`` plus its artifacts into one output
directory.  Numeric artifacts depend only on the config, the seed and the
tool version; timestamps live in the record alone.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import math
import sys
import traceback
from pathlib import Path

import numpy as np

from . import __version__, config, core, ergodic, manifolds, periodic, plotting, potential, shadowing

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_PARTIAL = 0, 1, 2, 3


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _dump_json(obj, path):
    path.write_text(json.dumps(obj, indent=1, sort_keys=True, allow_nan=True) + "\n")


class _Run:
    def __init__(self, cfg, out):
        self.cfg = cfg
        self.out = out
        self.fmap = core.map_from_dict(cfg["map"])
        self.threads = config.thread_count(cfg)
        self.artifacts = {}
        self.outputs = {}
        self.status = "complete"

    def write_text(self, name, text):
        (self.out / name).write_text(text)
        self.artifacts[name.rsplit(".", 1)[0] + "_" + name.rsplit(".", 1)[1]] = name

    def write_json(self, name, obj):
        _dump_json(obj, self.out / name)
        self.artifacts[name.replace(".", "_")] = name

    def figure(self, name, fn, *args, **kwargs):
        fn(*args, path=self.out / name, **kwargs)
        self.artifacts[name.replace(".", "_")] = name

    def saddle(self, period, index):
        saddles = [o for o in periodic.find_periodic(self.fmap, period)
                   if o.is_saddle and not o.lower_period]
        if not saddles:
            raise RuntimeError(f"no saddle of exact period {period}")
        if index >= len(saddles):
            raise RuntimeError(f"saddle_index {index} out of range ({len(saddles)} saddles)")
        return saddles[index]


# --------------------------------------------------------------------------- #
# Subcommands


def run_census(run):
    sec = run.cfg["census"]
    cfg = periodic.SearchConfig(tol=sec["tol"], grid=sec["grid"], slack=sec["slack"])
    rows = periodic.census(run.fmap, sec["n_max"], cfg)
    if run.cfg["precision"] == "extended":
        worst = max(core.ext_forward_residual(run.fmap, o.points) for r in rows for o in r.orbits)
        run.outputs["extended_residual_max"] = worst
    run.write_text("census.csv", periodic.census_csv(rows))
    run.write_text("orbits.json", periodic.orbits_json([o for r in rows for o in r.orbits
                                                          if not o.lower_period]) + "\n")
    est = ergodic.lyapunov_saddle_average(run.fmap, sec["n_max"], rows, cfg)
    run.write_json("exponents.json", {"saddle_average": est.to_record(),
                                      "census_weighted": ergodic.census_weighted(rows[-1]).to_record()})
    run.figure("census.png", plotting.census_figure, rows)
    run.outputs["low_confidence_rows"] = [r.n for r in rows if r.low_confidence]


def run_slice(run):
    sec = run.cfg["slice"]
    if sec["kind"] == "unstable":
        sad = run.saddle(sec["saddle_period"], sec["saddle_index"])
        sample = manifolds.unstable_slice(run.fmap, sad, sec["radius"], sec["resolution"], sec["tol"],
                                          normalize=sec["normalize"], threads=run.threads,
                                          refine=sec["refine"])
    else:
        disk = potential.TransversalDisk(tuple(core._complex(v, "center") for v in sec["center"]),
                                         tuple(core._complex(v, "tangent") for v in sec["tangent"]),
                                         sec["radius"], "affine")
        sample = potential.slice_green(run.fmap, disk, sec["resolution"], sec["tol"],
                                       threads=run.threads, refine=sec["refine"])
        sad = None
    run.write_json("slice.json", sample.to_record())
    potential.write_ppm(sample, run.out / "slice.ppm")
    run.artifacts["slice_ppm"] = "slice.ppm"
    potential.write_png(sample, run.out / "slice_image.png")
    run.artifacts["slice_image_png"] = "slice_image.png"
    run.figure("slice.png", plotting.slice_figure, sample, title=f"{sec['kind']} slice")
    pts = sample.boundary_points
    run.outputs["boundary_count"] = int(len(pts))
    run.outputs["nonharmonic"] = sample.nonharmonic
    if len(pts) >= 50:
        geo = manifolds.slice_geometry(sample)
        rec = geo.to_record()
        if sad is not None:
            rec["realness"] = manifolds.realness_link(geo, sad)
        run.write_json("geometry.json", rec)
    else:
        run.outputs["geometry"] = "skipped: fewer than 50 boundary points"


def _annulus(sec, saddle):
    if sec.get("annulus"):
        return tuple(sec["annulus"])
    r0 = 0.1
    return (r0, r0 * abs(saddle.lambda_u))


def run_homoclinic(run):
    sec = run.cfg["homoclinic"]
    sad = run.saddle(sec["saddle_period"], sec["saddle_index"])
    ann = _annulus(sec, sad)
    hcfg = manifolds.HomoclinicConfig(max_land=sec["max_land"], radial_steps=sec["radial_steps"],
                                      transversality_floor=sec["transversality_floor"])
    found = manifolds.find_homoclinic(run.fmap, sad, ann, sec["angular_steps"], hcfg)
    run.write_text("homoclinic.csv", manifolds.homoclinic_csv(found))
    run.write_text("tangencies.csv", manifolds.homoclinic_csv(found.tangencies))
    run.figure("homoclinic.png", plotting.homoclinic_figure, list(found), ann)
    run.outputs.update(count=len(found), tangencies=len(found.tangencies), annulus=list(ann),
                       saddle=sad.key)


def run_shadow(run):
    sec = run.cfg["shadow"]
    sad = run.saddle(sec["saddle_period"], sec["saddle_index"])
    ann = _annulus(sec, sad)
    found = manifolds.find_homoclinic(run.fmap, sad, ann, sec["angular_steps"],
                                      manifolds.HomoclinicConfig(max_land=sec["max_land"]))
    if sec["homoclinic_index"] >= len(found):
        raise RuntimeError(f"only {len(found)} homoclinic points found in annulus {list(ann)}")
    h = found[sec["homoclinic_index"]]
    table = shadowing.multiplier_asymptotics(run.fmap, sad, h, range(sec["N_min"], sec["N_max"] + 1),
                                             shadowing.ShadowConfig(tol=sec["tol"]))
    run.write_text("asymptotics.csv", table.to_csv())
    summary = table.summary()
    summary["saddle"] = sad.key
    summary["homoclinic"] = {"zeta": [h.zeta.real, h.zeta.imag], "landing": h.landing}
    run.write_json("asymptotics.json", summary)
    if table.rows:
        run.figure("asymptotics.png", plotting.asymptotics_figure, table)
    if table.partial:
        run.status = "partial"


def run_lyapunov(run):
    sec = run.cfg["lyapunov"]
    n_max = sec["n_max"]
    rows = periodic.census(run.fmap, n_max)
    report = ergodic.lyapunov_gap_report(run.fmap, n_max, rows)
    run.write_json("gap_report.json", report)
    top = [o for o in rows[-1].orbits if o.is_saddle and o.period == n_max]
    rng = np.random.default_rng(run.cfg["seed"])
    if top:
        pick = rng.choice(len(top), size=min(sec["ensemble_size"], len(top)), replace=False)
        ens = ergodic.lyapunov_ensemble(run.fmap, [top[i] for i in sorted(pick)])
        avg = ergodic.lyapunov_saddle_average(run.fmap, n_max, rows)
        run.write_json("exponents.json", {"saddle_average": avg.to_record(),
                                          "birkhoff_ensemble": ens.to_record()})
    if sec["spectrum"]:
        spectra = ergodic.birkhoff_spectra(run.fmap, range(1, n_max + 1),
                                           {r.n: r.orbits for r in rows})
        run.write_text("spectrum.csv", spectra[n_max].to_csv())
        run.write_json("spectrum.json", [spectra[n].summary() for n in sorted(spectra)])
    saddles = [o for r in rows for o in r.orbits if o.is_saddle and not o.lower_period]
    run.figure("lyapunov.png", plotting.lyapunov_figure, saddles, report["chi_mu"],
               log_d=math.log(run.fmap.degree))
    if report["low_confidence"]:
        run.outputs["low_confidence"] = True


def run_render(run):
    sec = run.cfg["render"]
    c = np.array([core._complex(v, "center") for v in sec["center"]])
    u = np.array([core._complex(v, "u") for v in sec["u"]])
    v = np.array([core._complex(x, "v") for x in sec["v"]])
    s = np.linspace(-sec["radius"], sec["radius"], sec["resolution"])
    pts = c + s[None, :, None] * u + s[:, None, None] * v
    times = potential.escape_time(run.fmap, pts, sec["cap"])
    _write_escape_ppm(times, run.out / "render.ppm")
    run.artifacts["render_ppm"] = "render.ppm"
    run.figure("render.png", plotting.render_figure, times, sec["radius"])
    run.outputs["bounded_fraction"] = float((times < 0).mean())


def _write_escape_ppm(times, path):
    top = max(int(times.max()), 1)
    level = np.where(times < 0, 0, 255 - (200 * np.sqrt(np.maximum(times, 0) / top))).astype(np.uint8)
    rgb = np.repeat(level[::-1, :, None], 3, axis=2)
    h, w, _ = rgb.shape
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(rgb).tobytes())


RUNNERS = {
    "census": run_census,
    "slice": run_slice,
    "homoclinic": run_homoclinic,
    "shadow": run_shadow,
    "lyapunov": run_lyapunov,
    "render": run_render,
}


# --------------------------------------------------------------------------- #
# Entry points


def _apply_flags(data, args):
    data = dict(data)
    for key in ("seed", "threads", "precision", "out"):
        val = getattr(args, key, None)
        if val is not None:
            data[key] = val
    return data


def run(subcommand, data, out=None):
    """Run one subcommand; returns ``(record, exit_code)``."""
    started = _now()
    out = Path(out or data.get("out") or "out")
    out.mkdir(parents=True, exist_ok=True)
    record = {
        "schema_version": config.SCHEMA_VERSION,
        "tool": "henonlab",
        "version": __version__,
        "subcommand": subcommand,
        "started": started,
    }
    try:
        cfg = config.resolve(data)
    except config.ConfigError as exc:
        record.update(status="failed", finished=_now(),
                      error={"type": "config", "errors": exc.errors})
        _dump_json(record, out / "record.json")
        return record, EXIT_CONFIG
    record.update(config_hash=config.config_hash(cfg), seed=cfg["seed"],
                  precision=cfg["precision"], warnings=config.feasibility_warnings(cfg))
    _dump_json({k: v for k, v in cfg.items() if k not in ("out", "threads")},
               out / "config.resolved.json")
    runner = _Run(cfg, out)
    code = EXIT_OK
    try:
        RUNNERS[subcommand](runner)
    except Exception as exc:  # noqa: BLE001 - reported in the record
        runner.status = "partial" if runner.artifacts else "failed"
        record["error"] = {"type": type(exc).__name__, "message": str(exc),
                           "trace": traceback.format_exc(limit=3)}
    if runner.status == "partial":
        code = EXIT_PARTIAL
    elif runner.status == "failed":
        code = EXIT_FAILED
    record.update(status=runner.status, finished=_now(), artifacts=runner.artifacts,
                  outputs=runner.outputs)
    _dump_json(record, out / "record.json")
    return record, code


def validate(data):
    errors = config.config_errors(data)
    warnings = [] if errors else config.feasibility_warnings(data)
    return {"valid": not errors, "errors": errors, "warnings": warnings}


def _parser():
    p = argparse.ArgumentParser(prog="henonlab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"henonlab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in (*config.SUBCOMMANDS, "validate"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="TOML or JSON experiment config")
        sp.add_argument("--out", help="output directory (one record per directory)")
        sp.add_argument("--seed", type=int, help="global RNG seed (u64)")
        sp.add_argument("--threads", type=int, help="worker threads, 0 = all cores")
        sp.add_argument("--precision", choices=("double", "extended"))
    return p


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        data = config.load(args.config)
    except (OSError, ValueError) as exc:
        print(json.dumps({"valid": False, "errors": [f"config: {exc}"]}), file=sys.stderr)
        return EXIT_CONFIG
    data = _apply_flags(data, args)
    if args.command == "validate":
        diag = validate(data)
        print(json.dumps(diag, indent=1))
        return EXIT_OK if diag["valid"] else EXIT_CONFIG
    record, code = run(args.command, data, args.out)
    print(json.dumps({"status": record["status"], "out": str(Path(args.out or data.get("out") or "out")),
                      "artifacts": sorted(record.get("artifacts", {}).values())}))
    return code


if __name__ == "__main__":
    sys.exit(main())
