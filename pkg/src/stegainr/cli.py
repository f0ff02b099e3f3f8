"""Command-line interface.

Exit codes: 0 success, 1 runtime failure, 2 usage error. Reports are printed
as ``key=value`` lines. The key can come from ``--key`` or the
``STEGAINR_KEY`` environment variable; the flag wins.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
from pathlib import Path

from . import analysis, media, metrics
from .consensus import Scope, make_mask
from .inr import ModelSpec, TrainConfig, parse_arch
from .pipeline import HideConfig, StegaModel, fit_plain, hide, render, reveal

KEY_ENV = "STEGAINR_KEY"
AUDIO_OMEGA0_FIRST = 3000.0
DEFAULT_RATE = 16000


class UsageError(Exception):
    pass


def default_arch(modality: str, channels: int) -> str:
    return {
        media.IMAGE: f"2-256x4-{channels}",
        media.AUDIO: "1-256x3-1",
        media.VIDEO: f"3-1024x3-{channels}",
    }[modality]


def build_spec(args, modality: str, channels: int) -> ModelSpec:
    arch = args.arch or default_arch(modality, channels)
    first = args.omega_first
    if first is None:
        first = AUDIO_OMEGA0_FIRST if modality == media.AUDIO else 30.0
    return parse_arch(arch, omega0_first=first, omega0_hidden=args.omega_hidden)


def parse_key(text) -> int:
    key = int(str(text), 0)
    if not 0 <= key < 2**64:
        raise ValueError("key must be an unsigned 64-bit integer")
    return key


def resolve_key(args) -> int:
    raw = args.key if args.key is not None else os.environ.get(KEY_ENV)
    if raw is None:
        raise UsageError(f"a key is required (--key or ${KEY_ENV})")
    try:
        return parse_key(raw)
    except ValueError as exc:
        raise UsageError(f"bad key: {exc}") from None


def parse_dims(text: str, modality: str) -> tuple[int, ...]:
    try:
        dims = tuple(int(d) for d in text.lower().split("x"))
    except ValueError:
        raise UsageError(f"bad --shape {text!r}") from None
    want = media.IN_DIMS[modality]
    if len(dims) != want or min(dims) < 1:
        raise UsageError(f"--shape for {modality} needs {want} positive dims, got {text!r}")
    return dims


def _train_cfg(args, steps: int) -> TrainConfig:
    return TrainConfig(learning_rate=args.lr, steps=steps, batch=args.batch,
                       sampler_seed=args.sampler_seed)


def _emit(lines) -> None:
    for line in lines:
        print(line)


def _output_modality(args) -> str:
    return args.modality or media.infer_modality(args.out)


def _grid(args, model: StegaModel) -> media.MediaTensor:
    modality = _output_modality(args)
    if media.IN_DIMS[modality] != model.spec.in_dim:
        raise UsageError(f"{modality} output needs a {media.IN_DIMS[modality]}-D model, "
                         f"this one is {model.spec.in_dim}-D")
    dims = parse_dims(args.shape, modality)
    return media.empty_tensor(modality, dims, model.spec.out_dim, args.rate)


def cmd_fit(args) -> None:
    m = media.load_media(args.media, args.modality)
    spec = build_spec(args, m.modality, m.channels)
    model = fit_plain(m, spec, resolve_key(args), _train_cfg(args, args.steps))
    model.save(args.out)
    out = render(model, m)
    _emit([f"arch={spec}", f"steps={args.steps}", f"psnr_db={metrics.psnr(m, out):.4f}"])


def _hide_config(args, key: int, ratio: float) -> HideConfig:
    cover_steps = args.steps if args.steps_cover is None else args.steps_cover
    return HideConfig(key=key, ratio=ratio, scope=Scope.parse(args.scope),
                      secret_train=_train_cfg(args, args.steps),
                      cover_train=_train_cfg(args, cover_steps))


def _load_pair(args):
    secret = media.load_media(args.secret, args.modality)
    cover = media.load_media(args.cover, args.modality)
    if secret.modality != cover.modality or secret.channels != cover.channels:
        raise ValueError("secret and cover must share modality and channel count")
    return secret, cover, build_spec(args, cover.modality, cover.channels)


def cmd_hide(args) -> None:
    key = resolve_key(args)
    if not 0.0 < args.ratio < 1.0:
        raise UsageError("--ratio must lie strictly between 0 and 1")
    secret, cover, spec = _load_pair(args)
    model, report = hide(secret, cover, spec, _hide_config(args, key, args.ratio))
    model.save(args.out)
    _emit([f"arch={spec}", f"ratio={args.ratio}", *report.lines()])


def cmd_reveal(args) -> None:
    key = resolve_key(args)
    model = StegaModel.load(args.model)
    out = reveal(model, key, args.ratio, args.scope, _grid(args, model))
    media.save_media(out, args.out)
    print("note: revealed content cannot be verified without the original secret", file=sys.stderr)
    _emit([f"wrote={args.out}"])


def cmd_render(args) -> None:
    model = StegaModel.load(args.model)
    media.save_media(render(model, _grid(args, model)), args.out)
    _emit([f"wrote={args.out}"])


def cmd_metrics(args) -> None:
    a = media.load_media(args.a, args.modality)
    b = media.load_media(args.b, args.modality)
    if a.modality == media.AUDIO:
        _emit(metrics.audio_mse_stats(a, b).lines())
        return
    r = metrics.image_metrics(a, b)
    psnr_text = "inf" if math.isinf(r.psnr_db) else f"{r.psnr_db:.6f}"
    _emit([f"psnr={psnr_text}", f"ssim={r.ssim:.6f}", f"apd={r.apd:.6f}", f"rmse={r.rmse:.6f}"])


def cmd_attack(args) -> None:
    if not 0.0 <= args.fraction <= 1.0:
        raise UsageError("--fraction must lie in [0, 1]")
    model = StegaModel.load(args.model)
    if args.strategy == "magnitude":
        pruned = analysis.prune_magnitude(model.params, args.fraction)
    else:
        pruned = analysis.prune_random(model.params, args.fraction, args.seed)
    StegaModel(model.spec, pruned).save(args.out)
    _emit([f"strategy={args.strategy}", f"fraction={args.fraction}",
           f"pruned_weights={math.floor(args.fraction * model.spec.n_weights)}"])


def cmd_sweep(args) -> None:
    key = resolve_key(args)
    try:
        ratios = [float(r) for r in args.ratios.split(",") if r.strip()]
    except ValueError:
        raise UsageError(f"bad --ratios {args.ratios!r}") from None
    secret, cover, spec = _load_pair(args)
    rows = analysis.ratio_sweep(secret, cover, spec, _hide_config(args, key, 0.5), ratios)
    Path(args.out).write_text(analysis.sweep_csv(rows), newline="\n")
    _emit([f"rows={len(rows)}", f"wrote={args.out}"])


def cmd_hist(args) -> None:
    model = StegaModel.load(args.model)
    mask = None
    if args.ratio is not None:
        mask = make_mask(model.spec, resolve_key(args), args.ratio, args.scope).bits
    hist = analysis.weight_histogram(model.params, mask)
    Path(args.out).write_text(hist.to_csv(), newline="\n")
    lines = [f"bins={len(hist.counts)}", f"wrote={args.out}"]
    if hist.secret_mean_abs is not None:
        lines.append(f"secret_mean_abs={hist.secret_mean_abs:.6e}")
    if hist.cover_mean_abs is not None:
        lines.append(f"cover_mean_abs={hist.cover_mean_abs:.6e}")
    _emit(lines)


def _add_train_flags(p, steps_cover=False):
    p.add_argument("--arch", help="e.g. 2-256x4-3 or 2-64,64-1 (default depends on modality)")
    p.add_argument("--omega-first", type=float, default=None)
    p.add_argument("--omega-hidden", type=float, default=30.0)
    p.add_argument("--steps", type=int, default=2000)
    if steps_cover:
        p.add_argument("--steps-cover", type=int, default=None, help="default: same as --steps")
    p.add_argument("--lr", type=float, default=1e-4)
    p.add_argument("--batch", type=int, default=None, help="coordinate minibatch (default: full)")
    p.add_argument("--sampler-seed", type=int, default=0)


def _add_key(p, required_help="shared secret key (u64); or set $" + KEY_ENV):
    p.add_argument("--key", default=None, help=required_help)


def _add_scope(p):
    p.add_argument("--scope", choices=["global", "per-layer", "per_layer"], default="global")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stegainr", description="Hide a medium inside the weights of a sine-activated INR of another.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    modality = dict(choices=media.MODALITIES, default=None,
                    help="override extension-based modality detection")

    p = sub.add_parser("fit", help="plain INR fit of one medium")
    p.add_argument("--media", required=True)
    _add_key(p)
    _add_train_flags(p)
    p.add_argument("--modality", **modality)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("hide", help="hide a secret medium in the INR of a cover")
    p.add_argument("--secret", required=True)
    p.add_argument("--cover", required=True)
    _add_key(p)
    p.add_argument("--ratio", type=float, default=0.3)
    _add_scope(p)
    _add_train_flags(p, steps_cover=True)
    p.add_argument("--modality", **modality)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hide)

    p = sub.add_parser("reveal", help="extract the secret with the key")
    p.add_argument("--model", required=True)
    _add_key(p)
    p.add_argument("--ratio", type=float, default=0.3)
    _add_scope(p)
    p.add_argument("--shape", required=True, help="HxW, T or FxHxW")
    p.add_argument("--rate", type=int, default=DEFAULT_RATE, help="audio sample rate")
    p.add_argument("--modality", **modality)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_reveal)

    p = sub.add_parser("render", help="plain inference (the cover)")
    p.add_argument("--model", required=True)
    p.add_argument("--shape", required=True)
    p.add_argument("--rate", type=int, default=DEFAULT_RATE)
    p.add_argument("--modality", **modality)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("metrics", help="compare two media files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--modality", **modality)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("attack", help="prune a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--strategy", choices=["random", "magnitude"], required=True)
    p.add_argument("--fraction", type=float, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("sweep", help="stega-ratio sweep to CSV")
    p.add_argument("--secret", required=True)
    p.add_argument("--cover", required=True)
    _add_key(p)
    p.add_argument("--ratios", default="0.1,0.3,0.5,0.7,0.9")
    _add_scope(p)
    _add_train_flags(p, steps_cover=True)
    p.add_argument("--modality", **modality)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("hist", help="weight-value histogram to CSV")
    p.add_argument("--model", required=True)
    _add_key(p, "key for a secret/cover split (needs --ratio)")
    p.add_argument("--ratio", type=float, default=None)
    _add_scope(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_hist)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog} {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
