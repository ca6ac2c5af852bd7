"""Command-line surface: generation, decomposition, metrics, sweeps.

Subcommands: synth, rpca, nucdiff, metrics, sweep. Options come from
defaults, then an optional TOML config file, then explicit flags, in
that order (flags win). Every completed run writes a manifest JSON next
to its outputs with the effective configuration, the library version,
and SHA-256 digests of all files read and written.

Exit codes are a stable contract: 0 success, 2 usage or bad spec,
3 ran out of iterations without converging, 4 malformed input file,
5 numerical failure during iteration.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import csv
import dataclasses
import hashlib
import json
import os
import sys
import time

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:         # 3.10
    import tomli as tomllib

from . import __version__
from .diffusion import SCHEDULE_KINDS, make_schedule
from .errors import FormatError, NumericalError, ShapeError
from .metrics import gcnr, ks_statistic, motion_psnr
from .rpca import RpcaConfig, rpca_solve
from .sampler import NucDiffConfig, nuclear_diffusion_sample
from .score_models import GaussianPrior, MlpDenoiser, load_weights
from .synth import SynthSpec, foreground_prior, generate, write_instance
from .tensors import read_mask, read_tensor

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NO_CONVERGENCE = 3
EXIT_BAD_INPUT = 4
EXIT_NUMERICAL = 5


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(out_dir, command, config, seed, inputs, outputs, t0):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "input_digests": {p: _sha256(p) for p in inputs},
        "output_digests": {p: _sha256(p) for p in outputs},
        "duration_seconds": time.time() - t0,
    }
    path = os.path.join(out_dir, "manifest.json")
    with open(path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
    return path


def _load_config_file(path):
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _effective(defaults, file_cfg, args, keys):
    """defaults < config file < explicit flags; flags use None sentinels."""
    out = dict(defaults)
    for k in keys:
        if k in file_cfg:
            out[k] = file_cfg[k]
    for k in keys:
        v = getattr(args, k, None)
        if v is not None:
            out[k] = v
    return out


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _fmt(v):
    return f"{v:.12g}" if isinstance(v, float) else v


def _line_plot_svg(series, x_label, y_label):
    """Minimal SVG line plot; the raw data rides along in a comment."""
    width, height, pad = 640, 400, 56
    pts = [p for _, data in series for p in data]
    xs = [p[0] for p in pts] or [0.0, 1.0]
    ys = [p[1] for p in pts] or [0.0, 1.0]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0

    def sx(x):
        return pad + (x - x_lo) / (x_hi - x_lo) * (width - 2 * pad)

    def sy(y):
        return height - pad - (y - y_lo) / (y_hi - y_lo) * (height - 2 * pad)

    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]
    table = [f"{name}: " + " ".join(f"({x:.6g},{y:.6g})" for x, y in data)
             for name, data in series]
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        "<!-- data\n" + "\n".join(table) + "\n-->",
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{pad}" y1="{height - pad}" x2="{width - pad}" '
        f'y2="{height - pad}" stroke="black"/>',
        f'<line x1="{pad}" y1="{pad}" x2="{pad}" y2="{height - pad}" '
        'stroke="black"/>',
        f'<text x="{width / 2:.0f}" y="{height - 12}" text-anchor="middle" '
        f'font-size="14">{x_label}</text>',
        f'<text x="16" y="{height / 2:.0f}" font-size="14" '
        f'transform="rotate(-90 16 {height / 2:.0f})" '
        f'text-anchor="middle">{y_label}</text>',
        f'<text x="{pad}" y="{height - pad + 18}" font-size="11" '
        f'text-anchor="middle">{x_lo:.3g}</text>',
        f'<text x="{width - pad}" y="{height - pad + 18}" font-size="11" '
        f'text-anchor="middle">{x_hi:.3g}</text>',
        f'<text x="{pad - 6}" y="{height - pad}" font-size="11" '
        f'text-anchor="end">{y_lo:.3g}</text>',
        f'<text x="{pad - 6}" y="{pad + 4}" font-size="11" '
        f'text-anchor="end">{y_hi:.3g}</text>',
    ]
    for i, (name, data) in enumerate(series):
        color = colors[i % len(colors)]
        if data:
            path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in data)
            parts.append(f'<polyline points="{path}" fill="none" '
                         f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{width - pad + 4}" y="{pad + 16 * i + 4}" '
                     f'font-size="12" fill="{color}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts)


# ---------------------------------------------------------------------------
# synth

_SYNTH_KEYS = ("frame_height", "frame_width", "num_frames", "background_rank",
               "background_amplitude", "foreground_kind", "motion_level",
               "observation_noise_std", "seed")


def _spec_from_config(cfg):
    return SynthSpec(
        frame_height=int(cfg["frame_height"]),
        frame_width=int(cfg["frame_width"]),
        num_frames=int(cfg["num_frames"]),
        background_rank=int(cfg["background_rank"]),
        background_amplitude=float(cfg["background_amplitude"]),
        foreground_kind=cfg["foreground_kind"],
        foreground_params=cfg.get("foreground_params"),
        motion_level=float(cfg["motion_level"]),
        observation_noise_std=float(cfg["observation_noise_std"]),
        seed=int(cfg["seed"]),
    )


def cmd_synth(args):
    t0 = time.time()
    file_cfg = _load_config_file(args.config)
    defaults = {f.name: f.default for f in dataclasses.fields(SynthSpec)
                if f.name != "foreground_params"}
    cfg = _effective(defaults, file_cfg, args, _SYNTH_KEYS)
    if "foreground_params" in file_cfg:
        cfg["foreground_params"] = file_cfg["foreground_params"]
    spec = _spec_from_config(cfg)
    os.makedirs(args.out, exist_ok=True)
    outputs = []
    if args.motion_levels:
        levels = [float(v) for v in args.motion_levels.split(",")]
        for idx, level in enumerate(levels):
            sub = dataclasses.replace(spec, motion_level=level,
                                      seed=spec.seed + 7919 * idx)
            inst = generate(sub)
            paths = write_instance(inst, sub,
                                   os.path.join(args.out, f"level_{idx:02d}"))
            outputs.extend(paths.values())
    else:
        inst = generate(spec)
        paths = write_instance(inst, spec, args.out)
        outputs.extend(paths.values())
    _write_manifest(args.out, "synth", cfg, spec.seed, [], outputs, t0)
    return EXIT_OK


# ---------------------------------------------------------------------------
# rpca

_RPCA_DEFAULTS = {"lam": None, "mu": 2.0, "max_iters": 500, "rel_tol": 1e-6}


def cmd_rpca(args):
    t0 = time.time()
    file_cfg = _load_config_file(args.config)
    cfg = _effective(_RPCA_DEFAULTS, file_cfg, args, _RPCA_DEFAULTS)
    y = read_tensor(args.input)
    rc = RpcaConfig(lam=cfg["lam"], mu=cfg["mu"],
                    max_iters=int(cfg["max_iters"]), rel_tol=cfg["rel_tol"])
    dec = rpca_solve(y, rc)
    os.makedirs(args.out, exist_ok=True)
    outputs = []
    from .tensors import write_tensor
    for name, tensor in [("background", dec.L), ("foreground", dec.X)]:
        path = os.path.join(args.out, name + ".ndt")
        write_tensor(path, tensor)
        outputs.append(path)
    trace_path = os.path.join(args.out, "objective_trace.csv")
    _write_csv(trace_path, ["iteration", "objective"],
               [(i, _fmt(float(v))) for i, v in enumerate(dec.objective_trace)])
    outputs.append(trace_path)
    _write_manifest(args.out, "rpca", cfg, None, [args.input], outputs, t0)
    if not dec.converged:
        print(f"did not converge within {rc.max_iters} iterations",
              file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------------
# nucdiff

_NUCDIFF_DEFAULTS = {
    "gamma": 1.0,
    "mu": 2.0,
    "steps": 500,
    "total_noise_steps": 5000,
    "schedule_kind": "variance-preserving-linear",
    "background_step_size": None,
    "background_update": "subgradient",
    "warm_start_fraction": 0.0,
    "seed": 0,
    "model": "gaussian",
    "prior_mean": 0.0,
    "prior_stddev": 0.5,
}


def _resolve_model(cfg, synth_spec_path, num_pixels):
    name = cfg["model"]
    if name == "gaussian":
        mean = np.full(num_pixels, float(cfg["prior_mean"]))
        return GaussianPrior(mean, float(cfg["prior_stddev"])), []
    if name == "gmm":
        if synth_spec_path is None:
            raise ValueError("--model gmm needs --synth-spec pointing at the "
                             "generator sidecar JSON")
        with open(synth_spec_path) as fh:
            raw = json.load(fh)
        spec = SynthSpec(**raw)
        prior = foreground_prior(spec)
        if prior._means.shape[1] != num_pixels:
            raise FormatError(
                f"prior frames have {prior._means.shape[1]} pixels, "
                f"input has {num_pixels}")
        return prior, [synth_spec_path]
    # anything else is a weight file path
    model = load_weights(name)
    if model.input_size != num_pixels:
        raise FormatError(f"weights expect {model.input_size} pixels, "
                          f"input has {num_pixels}")
    return model, [name]


def cmd_nucdiff(args):
    t0 = time.time()
    file_cfg = _load_config_file(args.config)
    cfg = _effective(_NUCDIFF_DEFAULTS, file_cfg, args, _NUCDIFF_DEFAULTS)
    y = read_tensor(args.input)
    yv = y.values
    model, extra_inputs = _resolve_model(cfg, args.synth_spec, yv.shape[0])
    sched = make_schedule(cfg["schedule_kind"], int(cfg["total_noise_steps"]))
    nd_cfg = NucDiffConfig(
        gamma=float(cfg["gamma"]),
        mu=float(cfg["mu"]),
        steps=int(cfg["steps"]),
        schedule=sched,
        background_step_size=cfg["background_step_size"],
        background_update=cfg["background_update"],
        warm_start_fraction=float(cfg["warm_start_fraction"]),
        seed=int(cfg["seed"]),
    )
    dec, trace = nuclear_diffusion_sample(y, model, nd_cfg)
    os.makedirs(args.out, exist_ok=True)
    outputs = []
    from .tensors import write_tensor
    for name, tensor in [("background", dec.L), ("foreground", dec.X)]:
        path = os.path.join(args.out, name + ".ndt")
        write_tensor(path, tensor)
        outputs.append(path)
    trace_path = os.path.join(args.out, "trace.csv")
    _write_csv(trace_path,
               ["step", "tau", "measurement_error", "low_rank_penalty",
                "background_rank"],
               [(i, trace.taus[i], _fmt(trace.measurement_error[i]),
                 _fmt(trace.low_rank_penalty[i]), trace.rank[i])
                for i in range(len(trace))])
    outputs.append(trace_path)
    _write_manifest(args.out, "nucdiff", dict(cfg), nd_cfg.seed,
                    [args.input] + extra_inputs, outputs, t0)
    return EXIT_OK


# ---------------------------------------------------------------------------
# metrics

def _roi_metric_rows(seq_id, yv, xv, ventricle, septum, bins):
    p = yv.shape[1]
    rows = []
    gvals, kvals = [], []
    for t in range(p):
        g = gcnr(xv[ventricle, t], xv[septum, t], bins=bins)
        k = ks_statistic(yv[septum, t], xv[septum, t])
        gvals.append(g)
        kvals.append(k)
        rows.append((seq_id, t, "gcnr", _fmt(float(g)),
                     f"bins={bins};rois=ventricle|septum;source=denoised"))
        rows.append((seq_id, t, "ks", _fmt(float(k)),
                     "roi=septum;pair=original|denoised"))
    rows.append((seq_id, "mean", "gcnr", _fmt(float(np.mean(gvals))),
                 f"bins={bins};rois=ventricle|septum;source=denoised"))
    rows.append((seq_id, "mean", "ks", _fmt(float(np.mean(kvals))),
                 "roi=septum;pair=original|denoised"))
    return rows, gvals, kvals


def cmd_metrics(args):
    t0 = time.time()
    y = read_tensor(args.original)
    x = read_tensor(args.denoised)
    ventricle = read_mask(args.ventricle, "ventricle").mask
    septum = read_mask(args.septum, "septum").mask
    yv, xv = y.values, x.values
    if yv.shape != xv.shape:
        raise FormatError(f"original {yv.shape} vs denoised {xv.shape}")
    if ventricle.size != yv.shape[0] or septum.size != yv.shape[0]:
        raise FormatError("mask length does not match frame pixel count")
    seq_id = os.path.splitext(os.path.basename(args.original))[0]
    os.makedirs(args.out, exist_ok=True)
    rows, gvals, kvals = _roi_metric_rows(seq_id, yv, xv, ventricle, septum,
                                          args.bins)
    csv_path = os.path.join(args.out, "metrics.csv")
    _write_csv(csv_path,
               ["sequence_id", "frame_index", "metric_name", "value",
                "params"], rows)
    outputs = [csv_path]
    if args.plot:
        svg = _line_plot_svg(
            [("gcnr", [(float(t), float(v)) for t, v in enumerate(gvals)]),
             ("ks", [(float(t), float(v)) for t, v in enumerate(kvals)])],
            "frame", "metric value")
        svg_path = os.path.join(args.out, "metrics.svg")
        with open(svg_path, "w") as fh:
            fh.write(svg)
        outputs.append(svg_path)
    _write_manifest(args.out, "metrics", {"bins": args.bins}, None,
                    [args.original, args.denoised, args.ventricle,
                     args.septum], outputs, t0)
    return EXIT_OK


# ---------------------------------------------------------------------------
# sweep

_SWEEP_DEFAULTS = {
    "gamma": 1.0,
    "mu": 2.0,
    "steps": 200,
    "total_noise_steps": 200,
    "background_step_size": 0.25,
    "background_update": "proximal",
    "warm_start_fraction": 0.5,
    "seed": 0,
}


def _sweep_task(level, idx, base_spec, methods, cfg):
    """One motion level: generate, run each method, mean KS over support."""
    spec = dataclasses.replace(base_spec, motion_level=level,
                               seed=base_spec.seed + 7919 * idx)
    inst = generate(spec)
    yv = inst.observed.values
    septum = inst.masks["septum"].mask
    p = yv.shape[1]
    psnr = float(np.mean([motion_psnr(yv[:, t], yv[:, t - 1])
                          for t in range(1, p)]))
    rows = []
    for method in methods:
        try:
            if method == "rpca":
                dec = rpca_solve(inst.observed, RpcaConfig(mu=cfg["mu"]))
                est = dec.X.values
            elif method == "nucdiff":
                sched = make_schedule("variance-preserving-linear",
                                      int(cfg["total_noise_steps"]))
                nd_cfg = NucDiffConfig(
                    gamma=float(cfg["gamma"]), mu=float(cfg["mu"]),
                    steps=int(cfg["steps"]), schedule=sched,
                    background_step_size=cfg["background_step_size"],
                    background_update=cfg["background_update"],
                    warm_start_fraction=float(cfg["warm_start_fraction"]),
                    seed=spec.seed + 1000)
                model = foreground_prior(spec)
                dec, _ = nuclear_diffusion_sample(inst.observed, model, nd_cfg)
                est = dec.X.values
            else:
                raise ValueError(f"unknown method {method!r}")
            ks = float(np.mean([ks_statistic(yv[septum, t], est[septum, t])
                                for t in range(p)]))
            rows.append((level, spec.seed, psnr, method, ks, "ok"))
        except Exception as exc:     # keep the sweep going, note the failure
            rows.append((level, spec.seed, psnr, method, "",
                         f"error: {exc}"))
    return rows


def cmd_sweep(args):
    t0 = time.time()
    file_cfg = _load_config_file(args.config)
    cfg = _effective(_SWEEP_DEFAULTS, file_cfg, args, _SWEEP_DEFAULTS)
    levels = [float(v) for v in args.levels.split(",")]
    for level in levels:
        if not 0.0 <= level <= 1.0:
            raise ValueError(f"motion level {level} outside [0, 1]")
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        raise ValueError("no methods given")
    base_spec = SynthSpec(seed=int(cfg["seed"]))

    env = os.environ.get("NUCDIFF_THREADS")
    workers = int(env) if env else (os.cpu_count() or 1)
    workers = max(1, min(workers, len(levels)))
    results = [None] * len(levels)
    with concurrent.futures.ThreadPoolExecutor(max_workers=workers) as pool:
        futs = {pool.submit(_sweep_task, level, idx, base_spec, methods, cfg):
                idx for idx, level in enumerate(levels)}
        for fut in concurrent.futures.as_completed(futs):
            results[futs[fut]] = fut.result()

    rows = [row for group in results for row in group]
    os.makedirs(args.out, exist_ok=True)
    csv_path = os.path.join(args.out, "sweep.csv")
    _write_csv(csv_path,
               ["motion_level", "seed", "mean_interframe_psnr_db", "method",
                "mean_ks", "status"],
               [(lv, sd, _fmt(ps), me, _fmt(ks) if ks != "" else "", st)
                for lv, sd, ps, me, ks, st in rows])
    series = []
    for method in methods:
        data = sorted((ps, ks) for lv, sd, ps, me, ks, st in rows
                      if me == method and st == "ok")
        series.append((method, data))
    svg_path = os.path.join(args.out, "sweep.svg")
    with open(svg_path, "w") as fh:
        fh.write(_line_plot_svg(series, "mean inter-frame PSNR (dB)",
                                "mean KS over support"))
    _write_manifest(args.out, "sweep",
                    dict(cfg, levels=levels, methods=methods),
                    int(cfg["seed"]), [], [csv_path, svg_path], t0)
    if all(st != "ok" for *_, st in rows):
        print("every sub-run failed", file=sys.stderr)
        return EXIT_NO_CONVERGENCE
    return EXIT_OK


# ---------------------------------------------------------------------------

def _build_parser():
    parser = argparse.ArgumentParser(
        prog="nucdiff",
        description="low-rank plus diffusion-prior video decomposition")
    sub = parser.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("synth", help="generate a planted instance")
    ps.add_argument("--out", required=True)
    ps.add_argument("--config", help="TOML config file")
    ps.add_argument("--frame-height", dest="frame_height", type=int)
    ps.add_argument("--frame-width", dest="frame_width", type=int)
    ps.add_argument("--num-frames", dest="num_frames", type=int)
    ps.add_argument("--background-rank", dest="background_rank", type=int)
    ps.add_argument("--background-amplitude", dest="background_amplitude",
                    type=float)
    ps.add_argument("--foreground-kind", dest="foreground_kind",
                    choices=("sparse", "gaussian", "gmm-blobs"))
    ps.add_argument("--motion-level", dest="motion_level", type=float)
    ps.add_argument("--observation-noise-std", dest="observation_noise_std",
                    type=float)
    ps.add_argument("--seed", type=int)
    ps.add_argument("--motion-levels", dest="motion_levels",
                    help="comma-separated levels; writes one subdirectory "
                         "per level")
    ps.set_defaults(func=cmd_synth)

    pr = sub.add_parser("rpca", help="convex low-rank plus sparse baseline")
    pr.add_argument("--input", required=True)
    pr.add_argument("--out", required=True)
    pr.add_argument("--config")
    pr.add_argument("--lam", type=float)
    pr.add_argument("--mu", type=float)
    pr.add_argument("--max-iters", dest="max_iters", type=int)
    pr.add_argument("--rel-tol", dest="rel_tol", type=float)
    pr.set_defaults(func=cmd_rpca)

    pn = sub.add_parser("nucdiff", help="diffusion-guided decomposition")
    pn.add_argument("--input", required=True)
    pn.add_argument("--out", required=True)
    pn.add_argument("--config")
    pn.add_argument("--model",
                    help="gaussian, gmm, or a weight file path")
    pn.add_argument("--synth-spec", dest="synth_spec",
                    help="generator sidecar JSON (for --model gmm)")
    pn.add_argument("--gamma", type=float)
    pn.add_argument("--mu", type=float)
    pn.add_argument("--steps", type=int)
    pn.add_argument("--total-noise-steps", dest="total_noise_steps", type=int)
    pn.add_argument("--schedule-kind", dest="schedule_kind",
                    choices=SCHEDULE_KINDS)
    pn.add_argument("--background-step-size", dest="background_step_size",
                    type=float)
    pn.add_argument("--background-update", dest="background_update",
                    choices=("subgradient", "proximal"))
    pn.add_argument("--warm-start-fraction", dest="warm_start_fraction",
                    type=float)
    pn.add_argument("--seed", type=int)
    pn.add_argument("--prior-mean", dest="prior_mean", type=float)
    pn.add_argument("--prior-stddev", dest="prior_stddev", type=float)
    pn.set_defaults(func=cmd_nucdiff)

    pm = sub.add_parser("metrics", help="ROI separation and distribution "
                                        "distance tables")
    pm.add_argument("--original", required=True)
    pm.add_argument("--denoised", required=True)
    pm.add_argument("--ventricle", required=True)
    pm.add_argument("--septum", required=True)
    pm.add_argument("--out", required=True)
    pm.add_argument("--bins", type=int, default=100)
    pm.add_argument("--plot", action="store_true")
    pm.set_defaults(func=cmd_metrics)

    pw = sub.add_parser("sweep", help="motion sweep comparing methods")
    pw.add_argument("--out", required=True)
    pw.add_argument("--config")
    pw.add_argument("--levels", required=True,
                    help="comma-separated motion levels")
    pw.add_argument("--methods", default="rpca,nucdiff")
    pw.add_argument("--gamma", type=float)
    pw.add_argument("--mu", type=float)
    pw.add_argument("--steps", type=int)
    pw.add_argument("--total-noise-steps", dest="total_noise_steps", type=int)
    pw.add_argument("--background-step-size", dest="background_step_size",
                    type=float)
    pw.add_argument("--background-update", dest="background_update",
                    choices=("subgradient", "proximal"))
    pw.add_argument("--warm-start-fraction", dest="warm_start_fraction",
                    type=float)
    pw.add_argument("--seed", type=int)
    pw.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except FormatError as exc:
        print(f"input format error: {exc}", file=sys.stderr)
        return EXIT_BAD_INPUT
    except NumericalError as exc:
        step = getattr(exc, "step", None)
        where = f" at step {step}" if step is not None else ""
        print(f"numerical failure{where}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValueError, ShapeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"cannot read input: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
