"""Command-line front end wiring the pipeline end to end.

Every command writes a JSON run manifest beside its primary output so any
result can be regenerated from the recorded arguments and seed.  Exit codes:
0 ok, 2 usage, 3 I/O, 4 codec error, 5 capacity/rate-infeasible.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys

import numpy as np

from . import __version__, baselines, evaluation, pohcodec, rate_control
from .cgh import generate_complex_hologram
from .images import read_pbm, read_pgm, write_pgm
from .phase_retrieval import FidocConfig, fidoc
from .wavefield import ComplexField, PhaseHologram, SlmParams, read_cfld, write_cfld


class CliError(Exception):
    def __init__(self, exit_code: int, kind: str, message: str):
        super().__init__(message)
        self.exit_code = exit_code
        self.kind = kind


def _write_manifest(out_path: str, command: str, args: argparse.Namespace) -> None:
    manifest = {
        "command": command,
        "version": __version__,
        "config": {
            k: v for k, v in sorted(vars(args).items()) if k not in ("func",)
        },
        "output": str(out_path),
    }
    with open(str(out_path) + ".manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")


def _slm_from_args(args, width: int | None = None, height: int | None = None) -> SlmParams:
    return SlmParams(
        width=width if width is not None else args.grid,
        height=height if height is not None else args.grid,
        pixel_pitch=args.pitch,
        wavelength=args.wavelength,
    )


def _load_poh(path, args) -> PhaseHologram:
    samples, maxval = read_pgm(path)
    if maxval != 255:
        raise CliError(4, "codec", f"{path}: POH interchange PGMs must be 8-bit")
    h, w = samples.shape
    return PhaseHologram(
        _slm_from_args(args, width=w, height=h), samples.astype(np.uint8)
    )


def _scene_from_args(args, slm: SlmParams):
    return evaluation.scene_from_spec(args.scene, slm, args.depth, args.threshold)


# --- commands ---------------------------------------------------------------


def cmd_gen_cgh(args) -> int:
    slm = _slm_from_args(args)
    scene = _scene_from_args(args, slm)
    field = generate_complex_hologram(scene, slm, args.seed)
    write_cfld(field, args.out)
    _write_manifest(args.out, "gen-cgh", args)
    return 0


def cmd_make_poh(args) -> int:
    raw = read_cfld(args.cfld)
    slm = _slm_from_args(args, width=raw.params.width, height=raw.params.height)
    field = ComplexField(slm, raw.data)
    scene = _scene_from_args(args, slm)
    cfg = FidocConfig(
        iterations=args.iters, beta=args.beta, mask_dilation=args.mask_dilation
    )
    poh, trace = fidoc(field, scene, cfg)
    write_pgm(args.out, poh.samples)
    trace.write_csv(str(args.out) + ".trace.csv")
    _write_manifest(args.out, "make-poh", args)
    return 0


def cmd_encode(args) -> int:
    poh = _load_poh(args.poh, args)
    if args.roi == "full":
        roi = pohcodec.RoiMask.full(poh.params.shape)
    elif args.roi == "auto":
        if args.scene is None:
            raise CliError(2, "usage", "--roi auto requires --scene")
        scene = _scene_from_args(args, poh.params)
        sub = pohcodec.SubhologramParams(
            eyebox_diameter=args.eyebox_diameter,
            eye_relief=args.eye_relief,
            diffraction_cap=args.diffraction_cap,
        )
        roi = pohcodec.roi_from_scene(scene, poh.params, sub)
    else:
        roi = pohcodec.RoiMask(read_pbm(args.roi))
        if roi.mask.shape != poh.params.shape:
            raise CliError(4, "codec", "RoI mask dimensions do not match the POH")
    fill_mode = (
        pohcodec.FILL_CONSTANT if args.fill == "constant" else pohcodec.FILL_SEEDED_RANDOM
    )
    if args.mode == "bitplane":
        stream = pohcodec.encode(poh, roi, args.bits, fill_mode, args.seed)
    else:
        stream = pohcodec.encode_levels(poh, roi, args.levels, fill_mode, args.seed)
    stream.write(args.out)
    _write_manifest(args.out, "encode", args)
    print(
        f"coded_fraction={roi.rho:.6f} bpp_total={stream.bpp_total():.6f} "
        f"bpp_payload={stream.bpp_payload():.6f}"
    )
    return 0


def cmd_decode(args) -> int:
    stream = pohcodec.PohBitstream.read(args.stream)
    poh = pohcodec.decode(stream, args.layers)
    write_pgm(args.out, poh.samples)
    _write_manifest(args.out, "decode", args)
    return 0


def cmd_reconstruct(args) -> int:
    poh = _load_poh(args.poh, args)
    evaluation.emit_reconstruction_png(poh, args.depth, args.out)
    _write_manifest(args.out, "reconstruct", args)
    if args.reference is not None:
        ref = _load_poh(args.reference, args)
        psnr = evaluation.reconstruction_psnr(ref, poh, args.depth)
        print(f"psnr_db={psnr:.4f}")
    return 0


def cmd_eval_rd(args) -> int:
    opts, sweep = evaluation.parse_sweep_config(args.config)
    slm = SlmParams(
        width=opts["grid"],
        height=opts["grid"],
        pixel_pitch=opts["pitch"],
        wavelength=opts["wavelength"],
    )
    scene = evaluation.scene_from_spec(
        opts["scene"], slm, opts["depth"], opts["threshold"]
    )
    points, aggregates = evaluation.rd_sweep(scene, sweep, slm, workers=args.workers)
    evaluation.emit_rd_csv(points, args.out)
    _write_manifest(args.out, "eval-rd", args)
    for agg in aggregates:
        print(
            f"{agg.method}: bpp={agg.bpp_mean:.4f} psnr={agg.psnr_mean:.2f}"
            f"+-{agg.psnr_std:.2f} dB over {agg.n_points} points"
        )
    return 0


def cmd_simulate_session(args) -> int:
    slm = _slm_from_args(args)
    scene = _scene_from_args(args, slm)
    cfg = rate_control.SessionConfig(
        fps=args.fps,
        eyes=args.eyes,
        pixels_per_eye=slm.npixels,
        slm_effective_bits=args.slm_bits,
    )
    model = rate_control.ChannelModel(
        min_mbps=args.channel_min,
        max_mbps=args.channel_max,
        step_mbps=args.channel_step,
        seed=args.seed,
    )
    log = rate_control.run_session(
        scene, cfg, model, args.duration, slm=slm, seed=args.cgh_seed
    )
    rate_control.write_session_csv(log, args.out)
    _write_manifest(args.out, "simulate-session", args)
    infeasible = sum(
        1
        for e in log
        if rate_control.select_coding_params(e.rate_mbps, e.roi_fraction, cfg).rate_infeasible
    )
    if infeasible:
        raise CliError(
            5, "capacity", f"{infeasible} frames were rate-infeasible even at 1 bpp"
        )
    return 0


# --- parser -------------------------------------------------------------------


def _add_grid_flags(p, grid_default=512):
    p.add_argument("--grid", type=int, default=grid_default, help="square grid size in pixels")
    p.add_argument("--pitch", type=float, default=8e-6, help="pixel pitch in meters")
    p.add_argument("--wavelength", type=float, default=638e-9, help="wavelength in meters")


def _add_scene_flags(p):
    p.add_argument(
        "--scene",
        default="builtin:twocards",
        help="builtin:<twocards|symbology|fullframe> or a grayscale image path",
    )
    p.add_argument("--depth", type=float, default=0.5, help="focus depth in meters")
    p.add_argument("--threshold", type=float, default=0.05, help="support threshold")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pohlab",
        description="Phase-only hologram compression laboratory",
    )
    parser.add_argument("--version", action="version", version=f"pohlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-cgh", help="generate a complex hologram (CFLD) from a scene")
    _add_grid_flags(p)
    _add_scene_flags(p)
    p.add_argument("--seed", type=int, default=0, help="diffuser phase seed")
    p.add_argument("--out", required=True, help="output CFLD path")
    p.set_defaults(func=cmd_gen_cgh)

    p = sub.add_parser("make-poh", help="convert a CFLD to an 8-bit POH (PGM)")
    p.add_argument("cfld", help="input CFLD file")
    _add_grid_flags(p)
    _add_scene_flags(p)
    p.add_argument("--iters", type=int, default=30, help="retrieval iterations")
    p.add_argument("--beta", type=float, default=0.5, help="amplitude feedback weight")
    p.add_argument("--mask-dilation", type=int, default=8, help="signal mask dilation in px")
    p.add_argument("--out", required=True, help="output POH PGM path")
    p.set_defaults(func=cmd_make_poh)

    p = sub.add_parser("encode", help="encode a POH PGM into a .poh stream")
    p.add_argument("poh", help="input POH (8-bit PGM)")
    _add_grid_flags(p)
    _add_scene_flags(p)
    p.add_argument(
        "--roi",
        default="full",
        help="'full', 'auto' (derive from --scene) or a PBM mask path",
    )
    p.add_argument("--mode", choices=("bitplane", "level"), default="bitplane")
    p.add_argument("--bits", type=int, default=8, help="bit-plane depth (1..8)")
    p.add_argument("--levels", type=int, default=32, help="level count (2..256)")
    p.add_argument("--fill", choices=("random", "constant"), default="random")
    p.add_argument("--seed", type=int, default=0, help="fill seed or constant value")
    p.add_argument("--eyebox-diameter", type=float, default=4e-3)
    p.add_argument("--eye-relief", type=float, default=20e-3)
    p.add_argument("--diffraction-cap", action="store_true")
    p.add_argument("--out", required=True, help="output .poh path")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a .poh stream to a POH PGM")
    p.add_argument("stream", help="input .poh file")
    p.add_argument("--layers", type=int, default=None, help="layers to use (default all)")
    p.add_argument("--out", required=True, help="output PGM path")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("reconstruct", help="numerically reconstruct a POH to a PNG")
    p.add_argument("poh", help="input POH (8-bit PGM)")
    _add_grid_flags(p)
    p.add_argument("--depth", type=float, default=0.5, help="focus depth in meters")
    p.add_argument(
        "--reference", default=None, help="reference POH PGM; prints psnr_db= line"
    )
    p.add_argument("--out", required=True, help="output PNG path")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("eval-rd", help="run a rate-distortion sweep from a config file")
    p.add_argument("config", help="key = value sweep configuration file")
    p.add_argument(
        "--workers",
        type=int,
        default=None,
        help="parallel workers (default: POHLAB_THREADS or all cores)",
    )
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_eval_rd)

    p = sub.add_parser("simulate-session", help="simulate channel-adaptive streaming")
    _add_grid_flags(p)
    _add_scene_flags(p)
    p.add_argument("--fps", type=float, default=60.0)
    p.add_argument("--eyes", type=int, default=2)
    p.add_argument("--slm-bits", type=int, default=4, help="effective SLM bit depth")
    p.add_argument("--channel-min", type=float, default=60.0, help="Mbit/s")
    p.add_argument("--channel-max", type=float, default=200.0, help="Mbit/s")
    p.add_argument("--channel-step", type=float, default=5.0, help="walk step Mbit/s")
    p.add_argument("--seed", type=int, default=0, help="channel seed")
    p.add_argument("--cgh-seed", type=int, default=0, help="diffuser seed")
    p.add_argument("--duration", type=float, default=1.0, help="seconds")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_simulate_session)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"pohlab: error code={exc.exit_code} kind={exc.kind}: {exc}", file=sys.stderr)
        return exc.exit_code
    except rate_control.CapacityError as exc:
        print(f"pohlab: error code=5 kind=capacity: {exc}", file=sys.stderr)
        return 5
    except (
        pohcodec.PohStreamError,
        baselines.DctStreamError,
        subprocess.CalledProcessError,
    ) as exc:
        print(f"pohlab: error code=4 kind=codec: {exc}", file=sys.stderr)
        return 4
    except OSError as exc:
        print(f"pohlab: error code=3 kind=io: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"pohlab: error code=2 kind=usage: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
