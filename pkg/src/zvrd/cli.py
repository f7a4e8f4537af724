"""Command-line pipeline: degrade | restore | ablate | metrics.

Exit codes: 0 success, 2 configuration/contract error, 3 numerical
failure. Every run writes a manifest.json; re-running with --manifest
reuses it verbatim (timestamp included) so output trees reproduce
byte for byte.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__
from .denoiser import OracleDenoiser, ShrinkageDenoiser, TinyUNet, TinyUNetSpec
from .errors import ConfigurationError, ContractError, NumericalFailure
from .fileio import (
    read_flo,
    read_kernel_txt,
    read_mask_png,
    read_obs_blobs,
    read_video_pngs,
    write_kernel_txt,
    write_mask_png,
    write_obs_blobs,
    write_video_pngs,
)
from .metrics import evaluate
from .operators import TASKS, estimate_gain, make_operator
from .sampler import SamplerConfig, ablation_run, restore_video
from .schedule import make_schedule

CONSTRAINT_ALIASES = {
    "ddnm": "projection",
    "gdp": "gradient",
    "dps": "gradient",
    "projection": "projection",
    "gradient": "gradient",
}
DENOISERS = ("shrinkage", "oracle", "tiny-unet")

# SamplerConfig keys settable from flags/config files, with CLI flag spellings
_FLAG_TO_CFG = {
    "task": "task",
    "constraint": "constraint",
    "denoiser": "denoiser",
    "norm": "norm",
    "seed": "seed",
    "steps": "steps",
    "ttc": "t_tc",
    "tes": "t_es",
    "lam": "lam",
    "scale": "scale",
    "content_scale": "content_scale",
}


def _timestamp() -> str:
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())


def _load_json(path) -> dict:
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"missing file {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigurationError(f"invalid JSON in {path}: {e}")


def _normalize_cfg_values(values: dict) -> dict:
    out = dict(values)
    if "constraint" in out:
        alias = str(out["constraint"]).lower()
        if alias not in CONSTRAINT_ALIASES:
            raise ConfigurationError(f"unknown constraint {out['constraint']!r}")
        out["constraint"] = CONSTRAINT_ALIASES[alias]
    return out


def _collect_overrides(args) -> dict:
    overrides = {}
    for flag, key in _FLAG_TO_CFG.items():
        val = getattr(args, flag, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "no_warp_noise", False):
        overrides["warp_noise"] = False
    if getattr(args, "literal_algo1", False):
        overrides["literal_pair_resampling"] = True
    if getattr(args, "no_attention", False):
        overrides["cross_frame_attention"] = False
    if getattr(args, "no_tc_guidance", False):
        overrides["tc_guidance"] = False
    if getattr(args, "no_noise_sharing", False):
        overrides["noise_sharing"] = False
    es = getattr(args, "early_stop", None)
    if es is not None and es != "auto":
        overrides["early_stop"] = es == "on"
    if getattr(args, "flow_dir", None):
        overrides["flow_source"] = "external"
    return overrides


def _build_config(args, manifest: dict | None, fallback: dict | None = None) -> tuple[SamplerConfig, dict]:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(_normalize_cfg_values(_load_json(args.config)))
    if manifest is not None:
        values.update(manifest.get("config", {}))
    overrides = _normalize_cfg_values(_collect_overrides(args))
    values.update(overrides)
    if fallback:
        for key, val in fallback.items():
            values.setdefault(key, val)
    valid = set(SamplerConfig.__dataclass_fields__)
    unknown = set(values) - valid
    if unknown:
        raise ConfigurationError(f"unknown config keys: {sorted(unknown)}")
    cfg = SamplerConfig(**values)
    cfg.validate()
    return cfg, overrides


def _read_gt(args, input_dir: Path, required: bool) -> np.ndarray | None:
    gt_dir = getattr(args, "gt", None)
    if gt_dir is None and (input_dir / "gt").is_dir():
        gt_dir = input_dir / "gt"
    if gt_dir is None:
        if required:
            raise ConfigurationError("this run needs ground truth: pass --gt or keep the gt/ directory")
        return None
    return read_video_pngs(gt_dir)


def _build_operator(task: str, params: dict, input_dir: Path, obs=None):
    mask = kernel = None
    if task == "inpaint":
        mask_file = params.get("mask_file")
        path = (input_dir / mask_file) if mask_file else (input_dir / "mask.png")
        mask = read_mask_png(path)
    if task == "deblur":
        kernel_file = params.get("kernel_file")
        path = (input_dir / kernel_file) if kernel_file else (input_dir / "kernel.txt")
        kernel = read_kernel_txt(path)
    gain = params.get("gain")
    if task == "lowlight" and gain is None:
        if obs is None:
            raise ConfigurationError("lowlight restore needs a recorded gain or observations to estimate it")
        gain = estimate_gain(np.asarray(obs[0]))
    return make_operator(
        task,
        mask=mask,
        kernel=kernel,
        sigma=params.get("sigma", 50.0 / 255.0),
        gain=gain if gain is not None else 0.25,
        noise_seed=params.get("noise_seed", 0),
    )


def _build_denoiser(cfg: SamplerConfig, args, gt: np.ndarray | None, channels: int):
    sched = make_schedule(cfg.steps, cfg.beta_start, cfg.beta_end)
    name = cfg.denoiser
    if name == "oracle":
        if gt is None:
            raise ConfigurationError("oracle denoiser needs ground truth (--gt or input gt/ directory)")
        return OracleDenoiser(sched, gt)
    if name == "shrinkage":
        return ShrinkageDenoiser(sched)
    if name == "tiny-unet":
        spec = TinyUNetSpec(
            in_channels=channels,
            seed=cfg.seed,
            weight_file=getattr(args, "weight_file", None),
        )
        return TinyUNet(spec)
    raise ConfigurationError(f"unknown denoiser {name!r}; expected one of {DENOISERS}")


def _read_observations(input_dir: Path) -> np.ndarray:
    obs_dir = input_dir / "obs" if (input_dir / "obs").is_dir() else input_dir
    if (obs_dir / "frames_manifest.json").exists():
        return read_obs_blobs(obs_dir)
    return read_video_pngs(obs_dir)


def _read_external_flows(flow_dir: Path, n_frames: int, frame_hw: tuple):
    flows = [None]
    for i in range(1, n_frames):
        flow = read_flo(flow_dir / f"flow_{i:05d}.flo")
        if flow.shape[:2] != frame_hw:
            raise ConfigurationError(f"flow_{i:05d}.flo shape {flow.shape[:2]} != frames {frame_hw}")
        occ_path = flow_dir / f"occ_{i:05d}.png"
        mask = read_mask_png(occ_path) if occ_path.exists() else np.ones(frame_hw)
        flows.append((flow, mask))
    return flows


def cmd_degrade(args) -> int:
    input_dir, out_dir = Path(args.input), Path(args.output)
    gt = read_video_pngs(input_dir)
    n, h, w, c = gt.shape
    task = args.task
    params: dict = {"noise_seed": args.seed}

    if task == "inpaint":
        if args.mask_file:
            mask = read_mask_png(args.mask_file)
        else:
            rng = np.random.Generator(np.random.PCG64(args.seed))
            mask = (rng.random((h, w)) >= args.mask_frac).astype(np.float64)
    else:
        mask = None
    if task == "deblur":
        kernel = read_kernel_txt(args.kernel_file) if args.kernel_file else None
    else:
        kernel = None
    params["sigma"] = args.sigma
    params["gain"] = args.gain

    op = make_operator(task, mask=mask, kernel=kernel, sigma=args.sigma, gain=args.gain, noise_seed=args.seed)
    try:
        observations = [op.degrade(gt[i], index=i) for i in range(n)]
    except ConfigurationError as e:
        raise ConfigurationError(f"{e} (input {input_dir})")

    out_dir.mkdir(parents=True, exist_ok=True)
    obs_dir = out_dir / "obs"
    obs_shape = observations[0].shape
    image_shaped = obs_shape[:2] == (h, w) and obs_shape[2] in (1, 3)
    if image_shaped:
        write_video_pngs(obs_dir, np.stack(observations))
    else:
        write_obs_blobs(obs_dir, observations)
    write_video_pngs(out_dir / "gt", gt)
    if mask is not None:
        write_mask_png(out_dir / "mask.png", mask)
        params["mask_file"] = "mask.png"
    if task == "deblur":
        write_kernel_txt(out_dir / "kernel.txt", op.kernel)
        params["kernel_file"] = "kernel.txt"

    (out_dir / "degradation.json").write_text(json.dumps({"task": task, "params": params}, indent=1))
    manifest = {
        "command": "degrade",
        "input_dir": str(input_dir),
        "output_dir": str(out_dir),
        "task": task,
        "overrides": params,
        "seed": args.seed,
        "version": __version__,
        "timestamp": _timestamp(),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1))
    print(f"degraded {n} frames -> {out_dir} (task {task}, obs shape {tuple(obs_shape)})")
    return 0


def cmd_restore(args) -> int:
    input_dir, out_dir = Path(args.input), Path(args.output)
    manifest_in = _load_json(args.manifest) if args.manifest else None
    degr = {}
    if (input_dir / "degradation.json").exists():
        degr = _load_json(input_dir / "degradation.json")
    fallback = {"task": degr["task"]} if "task" in degr else None
    cfg, overrides = _build_config(args, manifest_in, fallback)
    task = cfg.task
    if task not in TASKS:
        raise ConfigurationError(f"unknown task {task!r}; expected one of {TASKS}")

    observations = _read_observations(input_dir)
    gt = _read_gt(args, input_dir, required=cfg.denoiser == "oracle")
    op = _build_operator(task, degr.get("params", {}), input_dir, observations)
    frame_shape = op.frame_shape(observations[0].shape)
    model = _build_denoiser(cfg, args, gt, frame_shape[2])

    external_flows = None
    if args.flow_dir:
        external_flows = _read_external_flows(Path(args.flow_dir), len(observations), frame_shape[:2])

    if manifest_in is not None and not overrides:
        manifest = manifest_in
    else:
        manifest = {
            "command": "restore",
            "input_dir": str(input_dir),
            "output_dir": str(out_dir),
            "task": task,
            "overrides": overrides,
            "seed": cfg.seed,
            "version": __version__,
            "timestamp": _timestamp(),
            "config": asdict(cfg),
        }

    video, report = restore_video(observations, cfg, op, model, external_flows, manifest=manifest)

    out_dir.mkdir(parents=True, exist_ok=True)
    write_video_pngs(out_dir, video)
    if gt is not None:
        if gt.shape != video.shape:
            raise ConfigurationError(f"ground truth shape {gt.shape} != output {video.shape}")
        flow_src = video if getattr(args, "we_flow", "gt") == "output" else gt
        m = evaluate(video, gt, flow_src)
        report.metrics = m.to_dict()
        (out_dir / "metrics.csv").write_text(m.to_csv())
    report_path = Path(args.report) if args.report else out_dir / "report.json"
    report_path.write_text(report.to_json())
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1))
    msg = f"restored {video.shape[0]} frames -> {out_dir}"
    if report.metrics:
        msg += f" (psnr {report.metrics['mean_psnr']:.2f} dB, we_x100 {report.metrics['we_x100']:.4f})"
    print(msg)
    return 0


def cmd_ablate(args) -> int:
    input_dir, out_dir = Path(args.input), Path(args.output)
    degr = {}
    if (input_dir / "degradation.json").exists():
        degr = _load_json(input_dir / "degradation.json")
    fallback = {"task": degr["task"]} if "task" in degr else None
    cfg, overrides = _build_config(args, None, fallback)
    task = cfg.task

    observations = _read_observations(input_dir)
    gt = _read_gt(args, input_dir, required=True)
    op = _build_operator(task, degr.get("params", {}), input_dir, observations)
    frame_shape = op.frame_shape(observations[0].shape)
    model = _build_denoiser(cfg, args, gt, frame_shape[2])

    rows = ablation_run(observations, gt, cfg, op, model)

    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["label,psnr,ssim,we_x100"]
    for row in rows:
        lines.append(f"{row['label']},{row['psnr']:.6f},{row['ssim']:.6f},{row['we_x100']:.6f}")
    (out_dir / "ablation.csv").write_text("\n".join(lines) + "\n")
    (out_dir / "ablation.json").write_text(json.dumps({"task": task, "rows": rows}, indent=1))
    manifest = {
        "command": "ablate",
        "input_dir": str(input_dir),
        "output_dir": str(out_dir),
        "task": task,
        "overrides": overrides,
        "seed": cfg.seed,
        "version": __version__,
        "timestamp": _timestamp(),
        "config": asdict(cfg),
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1))
    for line in lines:
        print(line)
    return 0


def cmd_metrics(args) -> int:
    video = read_video_pngs(args.input)
    gt = read_video_pngs(args.gt)
    if video.shape != gt.shape:
        raise ConfigurationError(f"video shape {video.shape} != ground truth {gt.shape}")
    flow_src = video if args.we_flow == "output" else gt
    m = evaluate(video, gt, flow_src)
    out_path = Path(args.output) if args.output else Path(args.input) / "metrics.csv"
    out_path.write_text(m.to_csv())
    print(m.to_csv(), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zvrd", description="Zero-shot video restoration via guided reverse diffusion")
    p.add_argument("--version", action="version", version=f"zvrd {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--input", required=True, help="input directory")
        sp.add_argument("--seed", type=int, default=None)

    d = sub.add_parser("degrade", help="synthesize degraded observations from clean frames")
    add_common(d)
    d.add_argument("--output", required=True)
    d.add_argument("--task", required=True, choices=TASKS)
    d.add_argument("--mask-file", default=None, help="inpainting mask PNG (0 = missing)")
    d.add_argument("--mask-frac", type=float, default=0.25, help="random missing-pixel fraction")
    d.add_argument("--kernel-file", default=None, help="blur kernel text file")
    d.add_argument("--sigma", type=float, default=50.0 / 255.0, help="noise level in [0,1] scale")
    d.add_argument("--gain", type=float, default=0.25, help="low-light exposure gain")
    d.set_defaults(func=cmd_degrade, seed=0)

    def add_sampler_flags(sp):
        sp.add_argument("--config", default=None, help="JSON config file (flat SamplerConfig keys)")
        sp.add_argument("--task", choices=TASKS, default=None)
        sp.add_argument("--constraint", choices=sorted(CONSTRAINT_ALIASES), default=None)
        sp.add_argument("--denoiser", choices=DENOISERS, default=None)
        sp.add_argument("--weight-file", default=None, help="tiny-unet weight file stem")
        sp.add_argument("--norm", choices=("l2", "charbonnier"), default=None)
        sp.add_argument("--steps", type=int, default=None)
        sp.add_argument("--ttc", type=int, default=None, help="guidance threshold timestep")
        sp.add_argument("--tes", type=int, default=None, help="early stopping timestep")
        sp.add_argument("--lambda", dest="lam", type=float, default=None)
        sp.add_argument("--scale", type=float, default=None, help="temporal gradient scale")
        sp.add_argument("--content-scale", type=float, default=None)
        sp.add_argument("--no-warp-noise", action="store_true", help="blend noise without flow alignment")
        sp.add_argument("--literal-algo1", action="store_true", help="re-sample the previous frame per pair")
        sp.add_argument("--no-attention", action="store_true")
        sp.add_argument("--no-tc-guidance", action="store_true")
        sp.add_argument("--no-noise-sharing", action="store_true")
        sp.add_argument("--early-stop", choices=("on", "off", "auto"), default=None)
        sp.add_argument("--gt", default=None, help="ground-truth frame directory")
        sp.add_argument("--we-flow", choices=("gt", "output"), default="gt")

    r = sub.add_parser("restore", help="run the reverse-diffusion restoration")
    add_common(r)
    r.add_argument("--output", required=True)
    add_sampler_flags(r)
    r.add_argument("--flow-dir", default=None, help="directory of flow_%%05d.flo (+ optional occ_%%05d.png)")
    r.add_argument("--manifest", default=None, help="rerun from a previously written manifest.json")
    r.add_argument("--report", default=None, help="report path (default <output>/report.json)")
    r.set_defaults(func=cmd_restore)

    a = sub.add_parser("ablate", help="cumulative mechanism sweep with metrics per row")
    add_common(a)
    a.add_argument("--output", required=True)
    add_sampler_flags(a)
    a.set_defaults(func=cmd_ablate)

    m = sub.add_parser("metrics", help="PSNR/SSIM/warping error of a frame directory")
    add_common(m)
    m.add_argument("--gt", required=True)
    m.add_argument("--we-flow", choices=("gt", "output"), default="gt")
    m.add_argument("--output", default=None, help="metrics CSV path")
    m.set_defaults(func=cmd_metrics)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigurationError, ContractError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except NumericalFailure as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
