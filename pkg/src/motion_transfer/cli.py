"""Command-line entry point: generate-data, train, infer, eval, gradcheck."""
import argparse
import sys
from pathlib import Path

from .errors import ArgumentError, CheckpointError, ConfigError, DimensionError, ParseError, TrainingError

EXPECTED_ERRORS = (ArgumentError, CheckpointError, ConfigError, DimensionError, ParseError, TrainingError, OSError)


def cmd_generate_data(args):
    from .data.dataset import dataset_generate
    path = dataset_generate(args.out, args.identities, args.frames, (args.size, args.size), args.seed)
    print(f"wrote {args.identities * args.frames} frames, manifest {path}")
    return 0


def cmd_train(args):
    from .config import load_config
    from .train import train
    cfg = load_config(args.config)
    overrides = {}
    if args.epochs is not None:
        overrides["epochs"] = args.epochs
    if args.out_dir is not None:
        overrides["out_dir"] = args.out_dir
    if overrides:
        cfg = type(cfg)(**{**cfg.to_dict(), **overrides})

    def report(row):
        if row["step"] % cfg.log_every == 0:
            print(f"step {row['step']} epoch {row['epoch']} total {row['total']:.4f} rec {row['rec']:.4f} "
                  f"adv_d {row['adv_d']:.4f}", flush=True)

    trainer = train(cfg, resume=args.resume, max_steps=args.max_steps, on_step=None if args.quiet else report)
    print(f"finished at step {trainer.step}; checkpoints in {cfg.out_dir}")
    return 0


def cmd_infer(args):
    from .data.skeleton import load_skeleton
    from .data.imageio import load_image
    from .infer import infer
    source = load_image(args.source)
    canvas = source.shape[1:]
    skel_paths = sorted(Path(args.skeletons).glob("*.json")) if Path(args.skeletons).is_dir() \
        else [Path(args.skeletons)]
    if not skel_paths:
        raise ArgumentError(f"no skeleton files found under {args.skeletons}")
    skeletons = [load_skeleton(p, canvas) for p in skel_paths]
    src_skel = load_skeleton(args.source_skeleton, canvas) if args.source_skeleton else None
    if args.normalize and src_skel is None:
        raise ArgumentError("--normalize requires --source-skeleton")
    frames = infer(args.ckpt, source, args.bg, skeletons, args.out, normalize=args.normalize,
                   source_skeleton=src_skel)
    print(f"wrote {len(frames)} frames to {args.out}")
    return 0


def cmd_eval(args):
    from .data.imageio import load_image
    from .metrics import MetricReport
    pred_dir, gt_dir = Path(args.pred_dir), Path(args.gt_dir)
    names = sorted(p.name for p in pred_dir.iterdir() if p.suffix.lower() in (".png", ".ppm"))
    if not names:
        raise ArgumentError(f"no images in {pred_dir}")
    report = MetricReport()
    for name in names:
        if not (gt_dir / name).exists():
            raise ArgumentError(f"{gt_dir / name} missing for prediction {name}")
        report.add(name, load_image(pred_dir / name), load_image(gt_dir / name))
    csv = report.to_csv()
    if args.csv:
        Path(args.csv).write_text(csv)
    sys.stdout.write(csv)
    s = report.summary()
    print(f"mean PSNR {s['psnr_mean']:.4f} dB (std {s['psnr_std']:.4f}); "
          f"mean SSIM {s['ssim_mean']:.6f} (std {s['ssim_std']:.6f})")
    return 0


def cmd_gradcheck(args):
    from .gradsuite import run_suite
    failures = run_suite(seeds=range(args.seeds), inject_fault=args.inject_fault, verbose=True)
    print(f"{'FAIL' if failures else 'PASS'}: {len(failures)} failing checks")
    return 1 if failures else 0


def build_parser():
    p = argparse.ArgumentParser(prog="motion-transfer", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate-data", help="render a synthetic figure dataset")
    g.add_argument("--out", required=True)
    g.add_argument("--identities", type=int, default=1)
    g.add_argument("--frames", type=int, default=8)
    g.add_argument("--size", type=int, default=64)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate_data)

    t = sub.add_parser("train", help="train from a key = value config file")
    t.add_argument("--config", required=True)
    t.add_argument("--resume", help="checkpoint to continue from")
    t.add_argument("--epochs", type=int, help="override the configured epoch count")
    t.add_argument("--out-dir", help="override the configured output directory")
    t.add_argument("--max-steps", type=int, help="stop after this many further steps")
    t.add_argument("--quiet", action="store_true")
    t.set_defaults(func=cmd_train)

    i = sub.add_parser("infer", help="render frames for a skeleton sequence")
    i.add_argument("--ckpt", required=True)
    i.add_argument("--source", required=True, help="source image")
    i.add_argument("--bg", required=True, help="background plate")
    i.add_argument("--skeletons", required=True, help="skeleton JSON file or directory of them")
    i.add_argument("--out", required=True)
    i.add_argument("--normalize", action="store_true", help="rescale targets to the source body")
    i.add_argument("--source-skeleton", help="source skeleton JSON (needed by --normalize)")
    i.set_defaults(func=cmd_infer)

    e = sub.add_parser("eval", help="PSNR/SSIM of predicted frames against ground truth")
    e.add_argument("--pred-dir", required=True)
    e.add_argument("--gt-dir", required=True)
    e.add_argument("--csv", help="also write the per-frame CSV here")
    e.set_defaults(func=cmd_eval)

    c = sub.add_parser("gradcheck", help="finite-difference check of every differentiable op")
    c.add_argument("--seeds", type=int, default=5)
    c.add_argument("--inject-fault", action="store_true", help="corrupt one backward rule to test the checker")
    c.set_defaults(func=cmd_gradcheck)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except EXPECTED_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
