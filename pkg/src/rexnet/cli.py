"""Command-line interface: train, explain, evaluate, serve."""

import argparse
import sys
from pathlib import Path

from .config import load_config
from .emotions import EMOTIONS


def _add_common(p):
    p.add_argument("--config", help="JSON config file (flags override it)")
    p.add_argument("--seed", type=int, help="master RNG seed")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="rexnet",
        description="Vocal emotion recognition with contrastive saliency, "
                    "counterfactual, and cue-relation explanations.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train all model phases")
    _add_common(p)
    p.add_argument("--out", default="checkpoints", help="checkpoint directory")
    p.add_argument("--synthetic", action="store_true", default=None,
                   help="use the built-in synthetic corpus")
    p.add_argument("--ravdess", dest="ravdess_root", help="RAVDESS root directory")
    p.add_argument("--n-per-class", type=int, dest="n_per_class")
    p.add_argument("--epochs", type=int, dest="m0_epochs",
                   help="base classifier epochs")
    p.add_argument("--joint-epochs", type=int, dest="joint_epochs")
    p.add_argument("--gan-epochs", type=int, dest="gan_epochs")
    p.add_argument("--skip-gan", action="store_true",
                   help="skip conversion-GAN training")
    p.add_argument("--quiet", action="store_true")

    p = sub.add_parser("explain", help="write explanation bundles for clips")
    p.add_argument("--checkpoints", default="checkpoints")
    p.add_argument("--out", default="bundles", help="bundle output directory")
    p.add_argument("--clip", required=True, help="clip id (or 'test' for the "
                   "whole test split)")
    p.add_argument("--contrasts", default="all",
                   help="'all' or comma-separated contrast emotions")

    p = sub.add_parser("evaluate", help="run the metrics suite")
    p.add_argument("--checkpoints", default="checkpoints")
    p.add_argument("--out", help="metrics JSON path "
                   "(default: <checkpoints>/metrics.json)")
    p.add_argument("--k-fraction", type=float, dest="k_fraction",
                   help="ablated fraction of spectrogram bins")

    p = sub.add_parser("serve", help="serve bundles and the explorer UI")
    p.add_argument("--bundles", default="bundles")
    p.add_argument("--port", type=int, default=8765)
    return parser


def cmd_train(args):
    overrides = {k: getattr(args, k, None) for k in (
        "seed", "synthetic", "ravdess_root", "n_per_class", "m0_epochs",
        "joint_epochs", "gan_epochs")}
    if args.skip_gan:
        overrides["train_gan"] = False
    cfg = load_config(args.config, overrides)
    from .workspace import train_all
    log_fn = (lambda *_: None) if args.quiet else print
    train_all(cfg, args.out, log_fn=log_fn)
    return 0


def _contrast_list(spec_text):
    if spec_text == "all":
        return None
    contrasts = [c.strip() for c in spec_text.split(",") if c.strip()]
    for c in contrasts:
        if c not in EMOTIONS:
            raise SystemExit(f"unknown emotion '{c}'; choose from {', '.join(EMOTIONS)}")
    return contrasts


def cmd_explain(args):
    from .bundle import write_bundle
    from .pipeline import explain_clip
    from .workspace import load_workspace
    wanted = _contrast_list(args.contrasts)
    ws = load_workspace(args.checkpoints)
    if args.clip == "test":
        clip_ids = [m.clip_id for m, _ in ws.corpus.subset("test")]
    else:
        if not ws.corpus.has(args.clip):
            sample = ", ".join(ws.corpus.ids()[:8])
            raise SystemExit(f"unknown clip '{args.clip}'; valid ids start with: {sample} ...")
        clip_ids = [args.clip]
    for cid in clip_ids:
        # The bundle always carries the full contrast set (schema invariant);
        # an explicit --contrasts list is validated against the prediction.
        record = explain_clip(ws.corpus, cid, ws.emotion, ws.heads, ws.features,
                              ws.assets, ws.cfg.salience_threshold, gan=ws.gan)
        for c in wanted or []:
            if c == record.predicted:
                raise SystemExit(f"'{c}' is the predicted emotion for {cid}; "
                                 "a contrast must differ")
        path = write_bundle(record, ws.corpus, args.out)
        print(f"wrote {path} (predicted: {record.predicted})")
    return 0


def cmd_evaluate(args):
    from .evalsuite import evaluate
    from .workspace import load_workspace
    ws = load_workspace(args.checkpoints)
    k = args.k_fraction if args.k_fraction is not None else ws.cfg.k_fraction
    report = evaluate(ws.corpus, ws.features, ws.emotion, ws.heads, ws.assets,
                      ws.table, speaker_model=ws.speaker, gan=ws.gan,
                      k_fraction=k, seed=ws.cfg.seed, log_fn=print)
    out = Path(args.out) if args.out else Path(args.checkpoints) / "metrics.json"
    out.write_text(report.to_json())
    table_path = out.with_suffix(".txt")
    table_path.write_text(report.text_table() + "\n")
    print(report.text_table())
    print(f"wrote {out} and {table_path}")
    return 0


def cmd_serve(args):
    from .server import serve
    serve(args.bundles, args.port)
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    handlers = {"train": cmd_train, "explain": cmd_explain,
                "evaluate": cmd_evaluate, "serve": cmd_serve}
    return handlers[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
