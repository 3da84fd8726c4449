"""Command-line surface: analyze, train, sr, eval, prune, inspect.

Flags are canonical; an optional config file (``key = value`` lines,
``#`` comments) supplies defaults that flags override. Failures print
one machine-parsable line, ``error:<category>: <message>``, and exit
nonzero.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

from . import analysis
from . import data
from . import metrics
from . import model as model_mod
from . import report
from . import train as train_mod
from .errors import AwsrnError, ConfigError


def _to_bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _to_kernels(s: str) -> tuple[int, ...]:
    parts = s.replace(",", " ").split()
    if not parts:
        raise ValueError("empty kernel list")
    return tuple(int(p) for p in parts)


# Every key a config file may set, with its parser.
KEY_TYPES = {
    "preset": str,
    "scale": int,
    "n_lfb": int,
    "n_awru": int,
    "c_feat": int,
    "c_wide": int,
    "awms_kernels": _to_kernels,
    "ru_kind": str,
    "use_lrfu": _to_bool,
    "use_awms": _to_bool,
    "init_unit_weight": float,
    "init_branch_weight": float,
    "lr0": float,
    "halve_every": int,
    "batch": int,
    "patch": int,
    "beta1": float,
    "beta2": float,
    "eps": float,
    "max_iters": int,
    "checkpoint_every": int,
    "seed": int,
}

MODEL_KEYS = set(model_mod.ModelConfig.__dataclass_fields__)
TRAIN_KEYS = set(train_mod.TrainConfig.__dataclass_fields__) - {"seed"}


def parse_config_file(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if not sep or not key or not value:
            raise ConfigError(
                f"{path}:{lineno}: expected 'key = value', got {raw.strip()!r}"
            )
        if key not in KEY_TYPES:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            out[key] = KEY_TYPES[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    return out


def resolve_model_config(args, file_cfg: dict) -> tuple[model_mod.ModelConfig, str]:
    """Defaults, then preset, then config file, then flags."""
    preset = getattr(args, "model", None) or file_cfg.get("preset")
    if preset is not None:
        base = model_mod.preset_config(preset).to_dict()
    else:
        base = model_mod.ModelConfig().to_dict()
    for key, value in file_cfg.items():
        if key in MODEL_KEYS:
            base[key] = value
    if getattr(args, "scale", None) is not None:
        base["scale"] = args.scale
    return model_mod.ModelConfig.from_dict(base), preset or "custom"


def model_config_given(args, file_cfg: dict) -> bool:
    if getattr(args, "model", None) or getattr(args, "scale", None) is not None:
        return True
    return bool(MODEL_KEYS.intersection(file_cfg)) or "preset" in file_cfg


def resolve_train_config(args, file_cfg: dict) -> train_mod.TrainConfig:
    kwargs = {k: v for k, v in file_cfg.items() if k in TRAIN_KEYS}
    flag_map = {
        "iters": "max_iters",
        "batch": "batch",
        "patch": "patch",
        "lr": "lr0",
        "checkpoint_every": "checkpoint_every",
    }
    for flag, key in flag_map.items():
        value = getattr(args, flag, None)
        if value is not None:
            kwargs[key] = value
    seed = args.seed if args.seed is not None else file_cfg.get("seed", 0)
    return train_mod.TrainConfig(seed=seed, **kwargs)


def parse_out_size(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise ConfigError(f"expected WxH, got {text!r}")
    try:
        w, h = int(parts[0]), int(parts[1])
    except ValueError as exc:
        raise ConfigError(f"expected WxH, got {text!r}") from exc
    if w < 1 or h < 1:
        raise ConfigError(f"output size must be positive, got {text!r}")
    return w, h


def sr_image(model: model_mod.AwsrnModel, img: data.Image) -> data.Image:
    """Super-resolve one image through the checkpointed network."""
    out = model.infer(data.image_to_tensor(img, dtype=model.dtype))
    return data.tensor_to_image(out)


def evaluate_pairs(sr_fn, pairs, shave: int) -> list[report.EvalRow]:
    """Score a super-resolver and the bicubic baseline on LR/HR pairs.

    Per-image failures become annotated rows; the run continues.
    """
    rows = []
    for q in pairs:
        try:
            sr = sr_fn(q.lr)
            psnr = metrics.psnr_y(sr, q.hr, shave)
            ssim = metrics.ssim_y(sr, q.hr)
            bic = data.bicubic_resize(q.lr, float(q.scale))
            psnr_b = metrics.psnr_y(bic, q.hr, shave)
            ssim_b = metrics.ssim_y(bic, q.hr)
            rows.append(report.EvalRow(q.image_id, psnr, ssim, psnr_b, ssim_b))
        except AwsrnError as exc:
            nan = float("nan")
            rows.append(
                report.EvalRow(q.image_id, nan, nan, nan, nan,
                               note=f"{exc.category}: {exc}")
            )
    return rows


def _fmt_db(v: float) -> str:
    if math.isinf(v):
        return "identical"
    if math.isnan(v):
        return "-"
    return f"{v:.4f}"


def _fmt_val(v: float) -> str:
    if math.isnan(v):
        return "-"
    return f"{v:.4f}"


def _mean(values: list[float]) -> float:
    finite = [v for v in values if not math.isnan(v)]
    if not finite:
        return float("nan")
    return sum(finite) / len(finite)


def cmd_analyze(args) -> int:
    file_cfg = parse_config_file(args.config) if args.config else {}
    cfg, label = resolve_model_config(args, file_cfg)
    out_w, out_h = parse_out_size(args.out_size)
    rep = analysis.complexity_report(cfg, out_w, out_h)
    print(f"model: {label}")
    print(f"scale: {cfg.scale}")
    print(f"output-size: {out_w}x{out_h}")
    print(f"params: {rep.total_params} ({rep.total_params / 1e3:.1f}K)")
    print(f"multi-adds: {rep.multi_adds} ({rep.multi_adds / 1e9:.2f}G)")
    print("layer params multi-adds")
    for layer in rep.layers:
        print(f"{layer.name} {layer.params} {layer.mults}")
    print(f"total {rep.total_params} {rep.multi_adds}")
    if args.report_dir:
        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write_complexity_csv(rep, out / "complexity.csv")
        report.plot_complexity(rep, out / "complexity.png")
        print(f"report: {out / 'complexity.csv'} {out / 'complexity.png'}")
    return 0


def cmd_train(args) -> int:
    file_cfg = parse_config_file(args.config) if args.config else {}
    cfg, label = resolve_model_config(args, file_cfg)
    tcfg = resolve_train_config(args, file_cfg)
    if args.resume:
        expect = cfg if model_config_given(args, file_cfg) else None
        net = model_mod.load_checkpoint(args.resume, expect_config=expect)
        cfg = net.config
    else:
        net = model_mod.build(cfg, seed=tcfg.seed)
    pairs = data.load_pairs(args.data, cfg.scale)
    step = max(1, tcfg.max_iters // 10)

    def progress(t: int, value: float) -> None:
        if (t + 1) % step == 0 or (t + 1) == tcfg.max_iters:
            lr = train_mod.lr_schedule(t, tcfg.lr0, tcfg.halve_every)
            print(f"iter {t + 1}/{tcfg.max_iters} loss {value:.6f} lr {lr:.2e}")

    net, trace = train_mod.train(
        net, pairs, tcfg, checkpoint_path=args.out, progress=progress
    )
    model_mod.save_checkpoint(net, args.out)
    trace_path = args.trace or f"{args.out}.trace"
    train_mod.write_trace(trace_path, trace)
    rows = evaluate_pairs(lambda lr: sr_image(net, lr), pairs, shave=cfg.scale)
    psnr = _mean([r.psnr for r in rows])
    psnr_b = _mean([r.psnr_bicubic for r in rows])
    print(f"model: {label}")
    print(f"iterations: {len(trace)}")
    print(f"final-loss: {trace[-1]:.6f}" if trace else "final-loss: -")
    print(f"train-psnr: {_fmt_db(psnr)} dB")
    print(f"bicubic-psnr: {_fmt_db(psnr_b)} dB")
    gain = psnr - psnr_b
    print(f"psnr-gain: {gain:+.4f} dB" if math.isfinite(gain) else "psnr-gain: -")
    print(f"checkpoint: {args.out}")
    print(f"trace: {trace_path}")
    if args.report_dir:
        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.plot_loss_curve(trace, out / "loss_curve.png")
        print(f"report: {out / 'loss_curve.png'}")
    return 0


def cmd_sr(args) -> int:
    net = model_mod.load_checkpoint(args.ckpt)
    img = data.load_png(args.input)
    out = sr_image(net, img)
    data.save_png(out, args.out)
    print(f"wrote {args.out} ({out.width}x{out.height}, x{net.config.scale})")
    return 0


def cmd_eval(args) -> int:
    net = model_mod.load_checkpoint(args.ckpt)
    s = net.config.scale
    if args.scale is not None and args.scale != s:
        raise ConfigError(f"checkpoint is x{s} but --scale asked for x{args.scale}")
    shave = args.shave if args.shave is not None else s
    pairs = data.load_pairs(args.hr_dir, s)
    rows = evaluate_pairs(lambda lr: sr_image(net, lr), pairs, shave)
    print("image psnr ssim psnr-bicubic ssim-bicubic note")
    for r in rows:
        print(
            f"{r.image_id} {_fmt_db(r.psnr)} {_fmt_val(r.ssim)} "
            f"{_fmt_db(r.psnr_bicubic)} {_fmt_val(r.ssim_bicubic)} {r.note or '-'}"
        )
    print(
        f"mean {_fmt_db(_mean([r.psnr for r in rows]))} "
        f"{_fmt_val(_mean([r.ssim for r in rows]))} "
        f"{_fmt_db(_mean([r.psnr_bicubic for r in rows]))} "
        f"{_fmt_val(_mean([r.ssim_bicubic for r in rows]))} -"
    )
    print(
        f"bicubic-baseline {_fmt_db(_mean([r.psnr_bicubic for r in rows]))} "
        f"{_fmt_val(_mean([r.ssim_bicubic for r in rows]))}"
    )
    if args.report_dir:
        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write_eval_csv(rows, out / "eval.csv")
        report.plot_eval(rows, out / "eval.png")
        print(f"report: {out / 'eval.csv'} {out / 'eval.png'}")
    return 0


def cmd_prune(args) -> int:
    net = model_mod.load_checkpoint(args.ckpt)
    pruned, removed = analysis.prune_branches(net, args.threshold)
    model_mod.save_checkpoint(pruned, args.out)
    print(f"removed-kernels: {','.join(str(k) for k in removed) if removed else 'none'}")
    print(f"params: {analysis.count_params(net)} -> {analysis.count_params(pruned)}")
    print(f"wrote {args.out}")
    return 0


def cmd_inspect(args) -> int:
    net = model_mod.load_checkpoint(args.ckpt)
    rep = analysis.inspect_weights(net)
    print("kind depth block unit kernel w_res w_x alpha")
    for u in rep.units:
        print(f"unit {u.depth} {u.block} {u.unit} - {u.w_res:.6g} {u.w_x:.6g} -")
    for b in rep.blocks:
        print(f"block - {b.block} - - {b.w_res:.6g} {b.w_x:.6g} -")
    for br in rep.branches:
        print(f"branch - - - {br.kernel} - - {br.alpha:.6g}")
    if args.report_dir:
        out = Path(args.report_dir)
        out.mkdir(parents=True, exist_ok=True)
        report.write_weights_csv(rep, out / "weights.csv")
        report.plot_weights(rep, out / "weights.png")
        print(f"report: {out / 'weights.csv'} {out / 'weights.png'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="awsrn",
        description="Adaptive weighted super-resolution: analyze, train, "
        "super-resolve, evaluate, prune, inspect.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="parameter and multi-adds accounting")
    p.add_argument("--model", "-m", help="preset name (awsrn, awsrn-m, awsrn-s, awsrn-sd)")
    p.add_argument("--config", help="config file with model keys")
    p.add_argument("--scale", type=int, help="upscaling factor")
    p.add_argument("--out-size", default="1280x720", help="output size WxH for multi-adds")
    p.add_argument("--report-dir", help="write complexity.csv and complexity.png here")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("train", help="train on a directory or manifest of HR images")
    p.add_argument("--data", required=True, help="HR image directory or manifest file")
    p.add_argument("--model", "-m", help="preset name")
    p.add_argument("--config", help="config file with model and training keys")
    p.add_argument("--scale", type=int, help="upscaling factor")
    p.add_argument("--out", required=True, help="checkpoint output path")
    p.add_argument("--resume", help="checkpoint to continue from")
    p.add_argument("--iters", type=int, help="training iterations")
    p.add_argument("--batch", type=int, help="patches per batch")
    p.add_argument("--patch", type=int, help="LR patch size")
    p.add_argument("--lr", type=float, help="initial learning rate")
    p.add_argument("--checkpoint-every", type=int, dest="checkpoint_every",
                   help="periodic checkpoint cadence (iterations)")
    p.add_argument("--trace", help="loss trace output path (default: OUT.trace)")
    p.add_argument("--seed", type=int, help="seed for init and sampling (default 0)")
    p.add_argument("--report-dir", help="write loss_curve.png here")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("sr", help="super-resolve one image")
    p.add_argument("--ckpt", required=True, help="model checkpoint")
    p.add_argument("--in", dest="input", required=True, help="input image")
    p.add_argument("--out", required=True, help="output image path")
    p.set_defaults(func=cmd_sr)

    p = sub.add_parser("eval", help="PSNR/SSIM against bicubic on an HR set")
    p.add_argument("--ckpt", required=True, help="model checkpoint")
    p.add_argument("--hr-dir", required=True, help="HR image directory or manifest")
    p.add_argument("--scale", type=int, help="expected scale (checked against checkpoint)")
    p.add_argument("--shave", type=int, help="border shave in pixels (default: scale)")
    p.add_argument("--report-dir", help="write eval.csv and eval.png here")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("prune", help="drop low-weight reconstruction branches")
    p.add_argument("--ckpt", required=True, help="input checkpoint")
    p.add_argument("--threshold", type=float, required=True,
                   help="remove branches with |alpha| below this")
    p.add_argument("--out", required=True, help="pruned checkpoint path")
    p.set_defaults(func=cmd_prune)

    p = sub.add_parser("inspect", help="print the adaptive weight report")
    p.add_argument("--ckpt", required=True, help="model checkpoint")
    p.add_argument("--report-dir", help="write weights.csv and weights.png here")
    p.set_defaults(func=cmd_inspect)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except AwsrnError as exc:
        print(f"error:{exc.category}: {exc}", file=sys.stderr)
        return 1


def entrypoint() -> None:
    sys.exit(main())
