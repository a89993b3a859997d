"""Command-line entry point: ``rppg-wmst <command> ...``.

Exit codes: 0 success, 2 usage error, 3 unreadable or malformed input,
4 numerically degenerate input (e.g. no in-band power).
"""
from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import contrastive, io, plotting, spectral, stats, synth, traditional
from .containers import MAP_CHANNELS, N_SUBSETS, Video
from .errors import ConvergenceError, DegenerateError, FormatError
from .hhh import build_hhh_map
from .weighting import build_mst_map, build_wmst_map

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_NUMERIC = 0, 2, 3, 4


class UsageError(Exception):
    pass


# ------------------------------------------------------------------ helpers


def _write_text(path, text):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def _load_clip(args):
    video = io.read_raw_video(args.video)
    track, width, height = io.read_landmarks(args.landmarks, n_frames=video.n_frames)
    if (width, height) != (video.width, video.height):
        raise FormatError(f"landmarks are for {width}x{height}, video is {video.width}x{video.height}")
    return video, track


def _load_signal(path, row=N_SUBSETS, channel="G"):
    """1-D signal and fps from a map (.rpgm) or a trace (.csv)."""
    path = Path(path)
    if path.suffix == ".rpgm":
        smap = io.read_map(path)
        if not 1 <= row <= N_SUBSETS:
            raise UsageError(f"--row must be in 1..{N_SUBSETS}")
        return smap.row(row, channel).copy(), smap.fps
    if path.suffix == ".csv":
        return io.read_trace(path)
    raise FormatError(f"{path}: expected a .rpgm map or a .csv trace")


def _ref_hr(args):
    if args.ref_hr is not None:
        return args.ref_hr
    if args.truth is not None:
        try:
            return float(json.loads(Path(args.truth).read_text())["hr_bpm"])
        except (KeyError, TypeError, ValueError) as exc:
            raise FormatError(f"{args.truth}: no usable hr_bpm ({exc})") from exc
    return None


# ----------------------------------------------------------------- commands


def _synth_config(args, hr, seed):
    return synth.SynthConfig(
        width=args.width,
        height=args.height,
        fps=args.fps,
        duration_s=args.duration,
        hr_bpm=hr,
        pulse_amplitude=args.pulse_amplitude,
        specular=synth.SpecularConfig(args.specular_count, args.specular_radius, args.specular_intensity),
        shadow=synth.ShadowConfig(args.shadow_depth, args.shadow_speed),
        jitter_px=args.jitter,
        sensor_noise=args.noise,
        seed=seed,
    )


def _write_clip(clip, out):
    out.mkdir(parents=True, exist_ok=True)
    v = clip.video
    io.write_raw_video(v, out / "video.rpgv")
    io.write_landmarks(clip.landmarks, out / "landmarks.json", v.width, v.height)
    io.write_trace(clip.truth.bvp, v.fps, out / "bvp.csv")
    masks = np.zeros(v.frames.shape)
    masks[..., 0] = clip.truth.specular_mask
    masks[..., 1] = clip.truth.shadow_mask
    io.write_raw_video(Video(masks, v.fps), out / "masks.rpgv")
    cfg = clip.config
    truth = {"hr_bpm": cfg.hr_bpm, "fps": cfg.fps, "n_frames": v.n_frames, "seed": cfg.seed}
    _write_text(out / "truth.json", json.dumps(truth, indent=2, sort_keys=True) + "\n")


def cmd_synth(args):
    out = Path(args.out)
    try:
        if args.corpus:
            configs = synth.corpus_configs(args.corpus, seed=args.seed, width=args.width, height=args.height,
                                           duration_s=args.duration)
            for i, cfg in enumerate(configs):
                _write_clip(synth.generate_clip(cfg), out / f"clip_{i:03d}")
            print(f"wrote {len(configs)} clips to {out}")
            return EXIT_OK
        clip = synth.generate_clip(_synth_config(args, args.hr, args.seed))
    except ValueError as exc:
        if isinstance(exc, (FormatError, DegenerateError)):
            raise
        raise UsageError(str(exc)) from exc
    _write_clip(clip, out)
    print(f"wrote {out}")
    return EXIT_OK


def cmd_map(args):
    video, track = _load_clip(args)
    build = build_wmst_map if args.kind == "wmst" else build_mst_map
    io.write_map(build(video, track), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_hhh(args):
    video, track = _load_clip(args)
    io.write_map(build_hhh_map(video, track), args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_trad(args):
    video, track = _load_clip(args)
    rgb = traditional.spatial_rgb_trace(video, track)
    pulse = traditional.extract(args.method, rgb, video.fps, seed=args.seed)
    io.write_trace(pulse, video.fps, args.out)
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_hr(args):
    x, fps = _load_signal(args.input, args.row, args.channel)
    p = spectral.trace_psd(x, fps, args.nfft)
    print(f"{spectral.estimate_hr(p):.2f} ± {60.0 * p.resolution:.2f} bpm")
    return EXIT_OK


def cmd_snr(args):
    x, fps = _load_signal(args.input, args.row, args.channel)
    try:
        value = spectral.trace_snr(x, fps, _ref_hr(args), args.nfft)
    except ValueError as exc:
        if isinstance(exc, (FormatError, DegenerateError)):
            raise
        raise UsageError(str(exc)) from exc
    print(f"{value:.4f} dB")
    return EXIT_OK


def _read_manifest(path):
    base = Path(path).parent
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a text CSV") from exc
    need = {"clip_id", "wmst", "mst", "ref_hr"}
    if not rows or not need <= set(rows[0]):
        raise FormatError(f"{path}: manifest needs columns {sorted(need)}")
    ids, wm, mm, refs = [], [], [], []
    for r in rows:
        ids.append(r["clip_id"])
        wm.append(io.read_map(base / r["wmst"]))
        mm.append(io.read_map(base / r["mst"]))
        try:
            refs.append(float(r["ref_hr"]))
        except ValueError as exc:
            raise FormatError(f"{path}: bad ref_hr {r['ref_hr']!r}") from exc
    return ids, wm, mm, refs


def cmd_compare(args):
    if args.manifest:
        ids, wm, mm, refs = _read_manifest(args.manifest)
    else:
        ids, wm, mm, refs = [], [], [], []
        for i, cfg in enumerate(synth.corpus_configs(args.synthetic, seed=args.seed)):
            clip = synth.generate_clip(cfg)
            ids.append(f"clip_{i:03d}")
            wm.append(build_wmst_map(clip.video, clip.landmarks))
            mm.append(build_mst_map(clip.video, clip.landmarks))
            refs.append(cfg.hr_bpm)
    report = stats.snr_compare(wm, mm, refs, ids, channel=args.channel)
    if args.csv:
        _write_text(args.csv, report.to_csv())
    text = report.summary()
    if args.report:
        _write_text(args.report, text)
    sys.stdout.write(text)
    return EXIT_OK


def _psd_of(path, fps, n_fft, channel):
    path = Path(path)
    if path.suffix == ".rpgm":
        return contrastive.map_psd(io.read_map(path), channel, n_fft, fps)
    x, _ = io.read_trace(path)
    return contrastive.signal_psd(x, fps, n_fft)


def _length_of(path):
    path = Path(path)
    if path.suffix == ".rpgm":
        return io.read_map(path).n_frames
    return len(io.read_trace(path)[0])


def cmd_loss(args):
    if args.mode == "pretrain":
        if not (args.pred and args.target):
            raise UsageError("pretrain mode needs --pred and --target")
        paths = [args.pred, args.target]
    else:
        if not args.anchor or not args.positive:
            raise UsageError("nce mode needs --anchor and at least one --positive")
        if not args.negative and not args.foreign:
            raise UsageError("nce mode needs --negative and/or --foreign with --hhh")
        if args.foreign and not args.hhh:
            raise UsageError("--foreign needs --hhh")
        paths = [args.anchor] + args.positive + args.negative
    first = Path(paths[0])
    fps = io.read_map(first).fps if first.suffix == ".rpgm" else io.read_trace(first)[1]
    lengths = [_length_of(p) for p in paths]
    foreign = [io.read_map(p) for p in args.foreign] if args.mode == "nce" else []
    lengths += [2 * m.n_frames for m in foreign]
    n_fft = args.nfft or spectral.default_nfft(max(lengths))
    psds = [_psd_of(p, fps, n_fft, args.channel) for p in paths]
    if args.mode == "pretrain":
        rep = contrastive.pretrain_loss(psds[0], psds[1], args.lam)
    else:
        anchor, rest = psds[0], psds[1:]
        positives, negatives = rest[: len(args.positive)], rest[len(args.positive):]
        if foreign:
            pool, _ = contrastive.make_negative_pool(foreign, io.read_map(args.hhh), args.seed, fps, n_fft, args.channel)
            negatives = negatives + pool
        rep = contrastive.info_nce(anchor, positives, negatives, include_positive=args.include_positive)
    print(f"loss {rep.loss:.10f}")
    for name in sorted(rep.gradients):
        print(f"grad_norm_{name} {np.linalg.norm(rep.gradients[name]):.10f}")
    return EXIT_OK


def _read_columns(path, columns):
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
    except UnicodeDecodeError as exc:
        raise FormatError(f"{path}: not a text CSV") from exc
    if not rows:
        raise DegenerateError(f"{path}: no data rows")
    names = columns or [c for c in rows[0] if c not in ("clip_id", "t")]
    out = []
    for name in names:
        if name not in rows[0]:
            raise FormatError(f"{path}: no column {name!r}")
        try:
            out.append((name, np.array([float(r[name]) for r in rows])))
        except ValueError as exc:
            raise FormatError(f"{path}: non-numeric value in column {name!r}") from exc
    return out


def cmd_plot(args):
    if args.kind == "line":
        series = []
        for path in args.input:
            y, fps = io.read_trace(path)
            series.append((Path(path).stem, np.arange(len(y)) / fps, y))
        svg = plotting.line_plot_svg(series, title=args.title, xlabel="time (s)", ylabel=args.ylabel)
    else:
        cols = [c for c in args.columns.split(",") if c] if args.columns else None
        datasets = []
        for path in args.input:
            datasets += _read_columns(path, cols)
        svg = plotting.violin_plot_svg(datasets, title=args.title, ylabel=args.ylabel)
    _write_text(args.out, svg)
    print(f"wrote {args.out}")
    return EXIT_OK


# ------------------------------------------------------------------ parser


def _add_clip_inputs(p):
    p.add_argument("--video", required=True, help=".rpgv video")
    p.add_argument("--landmarks", required=True, help="landmark JSON")


def _add_signal_inputs(p):
    p.add_argument("input", help=".rpgm map or .csv trace")
    p.add_argument("--row", type=int, default=N_SUBSETS, help="map subset row, 1..63 (default: all ROIs)")
    p.add_argument("--channel", choices=MAP_CHANNELS, default="G")
    p.add_argument("--nfft", type=int, default=None)


def build_parser():
    parser = argparse.ArgumentParser(prog="rppg-wmst", description="Weighted spatio-temporal maps for remote pulse measurement.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic clip (or a corpus) with ground truth")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--corpus", type=int, default=0, help="render N mixed-corruption clips instead of one")
    p.add_argument("--hr", type=float, default=72.0)
    p.add_argument("--width", type=int, default=64)
    p.add_argument("--height", type=int, default=64)
    p.add_argument("--fps", type=float, default=30.0)
    p.add_argument("--duration", type=float, default=20.0)
    p.add_argument("--pulse-amplitude", type=float, default=0.004)
    p.add_argument("--specular-count", type=int, default=0)
    p.add_argument("--specular-radius", type=float, default=4.0)
    p.add_argument("--specular-intensity", type=float, default=0.0)
    p.add_argument("--shadow-depth", type=float, default=0.0)
    p.add_argument("--shadow-speed", type=float, default=12.0)
    p.add_argument("--jitter", type=float, default=0.0)
    p.add_argument("--noise", type=float, default=synth.CLEAN_NOISE)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("map", help="build a WMST or MST map")
    _add_clip_inputs(p)
    p.add_argument("--kind", choices=("wmst", "mst"), default="wmst")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_map)

    p = sub.add_parser("hhh", help="build the HHH wavelet map")
    _add_clip_inputs(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hhh)

    p = sub.add_parser("trad", help="extract a pulse trace with a classical method")
    _add_clip_inputs(p)
    p.add_argument("--method", choices=traditional.METHODS, required=True)
    p.add_argument("--seed", type=int, default=0, help="FastICA initialization seed")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_trad)

    p = sub.add_parser("hr", help="heart rate from a map row or trace")
    _add_signal_inputs(p)
    p.set_defaults(func=cmd_hr)

    p = sub.add_parser("snr", help="SNR (dB) of a map row or trace")
    _add_signal_inputs(p)
    p.add_argument("--ref-hr", type=float, default=None, help="reference HR in bpm (default: spectral peak)")
    p.add_argument("--truth", default=None, help="truth.json written by synth")
    p.set_defaults(func=cmd_snr)

    p = sub.add_parser("compare", help="paired one-sided tests of WMST vs MST SNR")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--manifest", help="CSV with clip_id,wmst,mst,ref_hr (paths relative to the manifest)")
    src.add_argument("--synthetic", type=int, help="generate an N-clip synthetic corpus in memory")
    p.add_argument("--seed", type=int, default=0, help="corpus seed for --synthetic")
    p.add_argument("--channel", choices=MAP_CHANNELS, default="G")
    p.add_argument("--csv", help="per-clip CSV output")
    p.add_argument("--report", help="text report output")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("loss", help="contrastive or pretraining loss on PSDs")
    p.add_argument("--mode", choices=("nce", "pretrain"), default="nce")
    p.add_argument("--anchor")
    p.add_argument("--positive", nargs="+", default=[])
    p.add_argument("--negative", nargs="+", default=[])
    p.add_argument("--foreign", nargs="+", default=[], help="maps of other videos for the negative pool")
    p.add_argument("--hhh", help="HHH map of the anchor's video (with --foreign)")
    p.add_argument("--include-positive", action="store_true", help="add the positive term to the denominator")
    p.add_argument("--pred")
    p.add_argument("--target")
    p.add_argument("--lam", type=float, default=contrastive.PRETRAIN_LAMBDA)
    p.add_argument("--channel", choices=MAP_CHANNELS, default="G")
    p.add_argument("--nfft", type=int, default=None)
    p.add_argument("--seed", type=int, default=0, help="resize-factor seed for the negative pool")
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("plot", help="SVG line or violin plot from CSV inputs")
    p.add_argument("--kind", choices=("line", "violin"), required=True)
    p.add_argument("--input", nargs="+", required=True)
    p.add_argument("--columns", default=None, help="comma-separated columns for violins")
    p.add_argument("--title", default="")
    p.add_argument("--ylabel", default="")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_plot)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"rppg-wmst {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, OSError, json.JSONDecodeError) as exc:
        print(f"rppg-wmst {args.command}: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except (DegenerateError, ConvergenceError, ArithmeticError) as exc:
        print(f"rppg-wmst {args.command}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"rppg-wmst {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
