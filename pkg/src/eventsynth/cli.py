"""Command-line front end.

Results go to stdout as one JSON object, progress and statistics to stderr.
Exit codes: 0 ok, 1 usage or configuration error, 2 data error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import io as eio
from .ablation import DEFAULT_FACTORS, run_ablation
from .core import DEFAULT_SEED, Frame, GeneratorConfig, ValidationError, sample_thresholds
from .event_gen import generate_events
from .metrics import IGNORE, accuracy, confusion_matrix, iou_per_class, miou_from_confusion
from .representation import EST, SIX_CHANNEL, build_est, build_six_channel, slice_windows
from .saccade import SaccadeConfig, render_saccade
from .upsample import (
    CROSSFADE,
    FLOW_WARP,
    plan_uniform,
    plan_upsampling,
    upsample_sequence,
)

logger = logging.getLogger("eventsynth")

EXIT_USAGE = 1
EXIT_DATA = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _seed(text: str) -> int | str:
    if text == "random":
        return text
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 bits")
    return value


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="key=value file; flags override it")
    parser.add_argument("--seed", type=_seed, default=DEFAULT_SEED,
                        help="RNG seed, or 'random' for fresh entropy (default: %(default)s)")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("-v", "--verbose", action="store_true")


def _generator_opts(parser: argparse.ArgumentParser) -> None:
    g = parser.add_argument_group("event generation")
    g.add_argument("--contrast-pos", type=float, default=0.06)
    g.add_argument("--contrast-neg", type=float, default=0.06)
    g.add_argument("--randomize", action="store_true",
                   help="draw both thresholds from U(c_min, c_max)")
    g.add_argument("--c-min", type=float, default=0.05)
    g.add_argument("--c-max", type=float, default=0.5)
    g.add_argument("--refractory-us", type=int, default=0)
    g.add_argument("--log-eps", type=float, default=1e-3)
    g.add_argument("--interpolation-space", choices=("log", "intensity"), default="log")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="eventsynth", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("convert", help="frames (+ optional flows) to an event file")
    p.add_argument("manifest", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True)
    p.add_argument("--flows", type=Path, help="directory of .flo files, one per frame pair")
    p.add_argument("--upsample-factor", type=int, default=None,
                   help="insert factor-1 frames per pair instead of the adaptive plan")
    p.add_argument("--interpolator", choices=("crossfade", "flowwarp"), default=None)
    _generator_opts(p)
    _common(p)

    p = sub.add_parser("saccade", help="render a still image into frames and flows")
    p.add_argument("image", type=Path, help="8-bit binary PGM")
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--amplitude", type=float, default=7.0, help="pixels")
    p.add_argument("--duration-ms", type=float, default=300.0)
    p.add_argument("--fps", type=float, default=530.0)
    p.add_argument("--fill", type=float, default=None, help="out-of-image intensity (default: mean)")
    _common(p)

    p = sub.add_parser("represent", help="event file to tensor files")
    p.add_argument("events", type=Path)
    p.add_argument("-o", "--output", type=Path, required=True, help="output directory")
    p.add_argument("--kind", choices=(EST, SIX_CHANNEL), default=EST)
    p.add_argument("--bins", type=int, default=15)
    p.add_argument("--window-ms", type=float, default=50.0)
    p.add_argument("--labels", type=Path, help="label timestamps in seconds, one per line")
    _common(p)

    p = sub.add_parser("ablate", help="downsampling ablation on a frame sequence")
    p.add_argument("manifest", type=Path)
    p.add_argument("--flows", type=Path, required=True)
    p.add_argument("--factors", type=int, nargs="+", default=list(DEFAULT_FACTORS))
    _generator_opts(p)
    _common(p)

    p = sub.add_parser("eval", help="accuracy and MIoU of predicted label maps")
    p.add_argument("pred_dir", type=Path)
    p.add_argument("gt_dir", type=Path)
    p.add_argument("--num-classes", type=int, default=None)
    p.add_argument("--include-absent", action="store_true",
                   help="count classes absent from both maps as IoU 0")
    _common(p)
    return parser


def _truthy(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise UsageError(f"expected a boolean, got {text!r}")


def _read_config_file(path: Path) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        values[key.replace("-", "_")] = value
    return values


def _apply_config_file(sub: argparse.ArgumentParser, values: dict[str, str]) -> None:
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for key, raw in values.items():
        action = actions.get(key)
        if action is None or key in ("config", "help") or not action.option_strings:
            raise UsageError(f"unknown config key {key!r}")
        try:
            if isinstance(action, argparse._StoreTrueAction):
                defaults[key] = _truthy(raw)
            elif action.nargs in ("+", "*"):
                defaults[key] = [action.type(v) for v in raw.split()]
            else:
                conv = action.type or str
                defaults[key] = conv(raw)
        except (ValueError, argparse.ArgumentTypeError) as exc:
            raise UsageError(f"config key {key!r}: {exc}") from exc
        if action.choices is not None and defaults[key] not in action.choices:
            raise UsageError(f"config key {key!r}: {raw!r} not in {sorted(action.choices)}")
    sub.set_defaults(**defaults)


def parse_args(argv: list[str] | None) -> argparse.Namespace:
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    first = parser.parse_args(argv)
    if first.config is None:
        return first
    if not first.config.is_file():
        raise UsageError(f"config file not found: {first.config}")
    sub = parser._subparsers._group_actions[0].choices[first.command]
    _apply_config_file(sub, _read_config_file(first.config))
    return parser.parse_args(argv)


def _resolve_seed(seed) -> int:
    if seed == "random":
        return int(np.random.SeedSequence().entropy % 2**64)
    return int(seed)


def generator_config(args) -> GeneratorConfig:
    try:
        return GeneratorConfig(
            c_pos=args.contrast_pos, c_neg=args.contrast_neg, randomize=args.randomize,
            c_min=args.c_min, c_max=args.c_max, refractory_us=args.refractory_us,
            log_eps=args.log_eps, seed=args.seed, interpolation=args.interpolation_space,
        )
    except ValidationError as exc:
        raise UsageError(str(exc)) from exc


def _emit(result: dict) -> None:
    sys.stdout.write(json.dumps(result, sort_keys=True) + "\n")
    sys.stdout.flush()


def cmd_convert(args) -> dict:
    config = generator_config(args)
    if args.threads < 1:
        raise UsageError("--threads must be >= 1")
    if args.upsample_factor is not None and args.upsample_factor < 1:
        raise UsageError("--upsample-factor must be >= 1")
    interpolator = args.interpolator or ("flowwarp" if args.flows else "crossfade")
    if interpolator == "flowwarp" and not args.flows:
        raise UsageError("--interpolator flowwarp needs --flows")

    seq = eio.read_frame_manifest(args.manifest)
    flows = eio.read_flow_dir(args.flows) if args.flows else None
    name = FLOW_WARP if interpolator == "flowwarp" else CROSSFADE
    if args.upsample_factor is not None:
        video = upsample_sequence(seq, flows, name, plan_uniform(seq, args.upsample_factor))
    elif flows is not None:
        video = upsample_sequence(seq, flows, name, plan_upsampling(seq, flows))
    else:
        video = seq
    logger.info("simulating %d frames (%d input)", len(video), len(seq))

    c_pos, c_neg = sample_thresholds(config)
    events = generate_events(video, config, args.threads, (c_pos, c_neg))
    eio.write_events(args.output, events)

    pos, neg = events.counts()
    duration_s = (int(seq.timestamps[-1]) - int(seq.timestamps[0])) / 1e6
    rate = len(events) / duration_s if duration_s > 0 else 0.0
    logger.info("%d events (%d positive, %d negative), %.1f ev/s", len(events), pos, neg, rate)
    return {
        "output": str(args.output), "events": len(events), "positive": pos, "negative": neg,
        "rate_hz": rate, "c_pos": c_pos, "c_neg": c_neg, "seed": config.seed,
        "input_frames": len(seq), "simulated_frames": len(video),
    }


def cmd_saccade(args) -> dict:
    try:
        config = SaccadeConfig(duration_us=int(round(args.duration_ms * 1000)), fps_hz=args.fps,
                               amplitude_px=args.amplitude, fill_value=args.fill)
    except ValidationError as exc:
        raise UsageError(str(exc)) from exc
    image = Frame(eio.read_pgm(args.image).astype(np.float32) / np.float32(255.0))
    seq, flows = render_saccade(image, config)
    out: Path = args.output
    out.mkdir(parents=True, exist_ok=True)
    eio.write_frame_manifest(out / "manifest.txt", seq)
    eio.write_flow_dir(out / "flows", flows)
    logger.info("rendered %d frames of %dx%d", len(seq), seq.width, seq.height)
    return {
        "manifest": str(out / "manifest.txt"), "flows": str(out / "flows"),
        "frames": len(seq), "width": seq.width, "height": seq.height,
        "max_displacement_px": max((f.max_magnitude() for f in flows), default=0.0),
    }


def cmd_represent(args) -> dict:
    if args.bins < 1:
        raise UsageError("--bins must be >= 1")
    window_us = int(round(args.window_ms * 1000))
    if window_us <= 0:
        raise UsageError("--window-ms must be > 0")
    stream = eio.read_events(args.events)
    if args.labels:
        labels = eio.read_timestamps(args.labels)
    else:
        labels = [int(stream.t[-1]) if len(stream) else window_us]
    windows = slice_windows(stream, labels, window_us)
    out: Path = args.output
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for i, win in enumerate(windows):
        tensor = build_est(win, args.bins) if args.kind == EST else build_six_channel(win)
        path = out / f"{i:06d}.tensor"
        eio.write_tensor(path, tensor)
        files.append(str(path))
    logger.info("wrote %d %s tensors", len(files), args.kind)
    return {"kind": args.kind, "windows": len(files), "window_us": window_us,
            "channels": 2 * args.bins if args.kind == EST else 6, "files": files}


def cmd_ablate(args) -> dict:
    config = generator_config(args)
    if any(f < 1 for f in args.factors):
        raise UsageError("--factors must all be >= 1")
    seq = eio.read_frame_manifest(args.manifest)
    flows = eio.read_flow_dir(args.flows)
    result = run_ablation(seq, flows, args.factors, config, args.threads)
    header = "factor " + " ".join(f"{name:>10}" for name in result.distance)
    logger.info(header)
    for k, factor in enumerate(result.factors):
        logger.info("%6d %s", factor, " ".join(f"{d[k]:10.4f}" for d in result.distance.values()))
    return result.as_dict()


def cmd_eval(args) -> dict:
    gt_files = sorted(p.name for p in args.gt_dir.glob("*.pgm"))
    if not gt_files:
        raise ValidationError(f"no .pgm label maps in {args.gt_dir}")
    pairs = []
    for name in gt_files:
        pred_path = args.pred_dir / name
        if not pred_path.is_file():
            raise ValidationError(f"missing prediction {pred_path}")
        pred, gt = eio.read_pgm(pred_path), eio.read_pgm(args.gt_dir / name)
        if pred.shape != gt.shape:
            raise ValidationError(f"{name}: prediction {pred.shape} vs ground truth {gt.shape}")
        pairs.append((pred, gt))
    num_classes = args.num_classes
    if num_classes is None:
        ids = np.concatenate([np.concatenate([p.ravel(), g.ravel()]) for p, g in pairs])
        ids = ids[ids != IGNORE]
        num_classes = int(ids.max()) + 1 if len(ids) else 1
    cm = sum(confusion_matrix(p, g, num_classes) for p, g in pairs)
    iou, present = iou_per_class(cm)
    pred_all = np.concatenate([p.ravel() for p, _ in pairs])
    gt_all = np.concatenate([g.ravel() for _, g in pairs])
    return {
        "files": len(pairs), "num_classes": num_classes,
        "accuracy": accuracy(pred_all, gt_all),
        "miou": miou_from_confusion(cm, exclude_absent=not args.include_absent),
        "iou": [float(v) if present[c] else None for c, v in enumerate(iou)],
    }


COMMANDS = {
    "convert": cmd_convert,
    "saccade": cmd_saccade,
    "represent": cmd_represent,
    "ablate": cmd_ablate,
    "eval": cmd_eval,
}


def main(argv: list[str] | None = None) -> int:
    try:
        args = parse_args(argv)
    except UsageError as exc:
        print(f"eventsynth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                        format="%(message)s", stream=sys.stderr, force=True)
    try:
        args.seed = _resolve_seed(args.seed)
        _emit(COMMANDS[args.command](args))
    except UsageError as exc:
        print(f"eventsynth: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ValidationError, OSError) as exc:
        print(f"eventsynth: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
