"""Command-line entry point: ``python -m chainseg <subcommand> ...``.

Exit status is 0 on success, 1 on a domain error (a JSON object with
``error`` and ``message`` goes to stderr) and 2 on a usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path


from . import predictor
from .contour import PolarChain, resample, save_chain
from .dataset import (
    AugmentSpec, SynthSpec, augment_dataset, image_center, load_dataset, load_image, load_label,
    read_manifest, split, synth_generate, write_dataset,
)
from .errata import errata_report, to_markdown
from .errors import ChainsegError
from .gradcheck import model_gradcheck, run_gradcheck
from .segment_loss import jm_loss, mse_loss
from .trainer import TrainConfig, evaluate, render_overlay, train, write_evaluation

log = logging.getLogger("chainseg")


class UsageError(Exception):
    pass


class _JsonFormatter(logging.Formatter):
    def format(self, record):
        return json.dumps({"level": record.levelname.lower(), "logger": record.name,
                           "message": record.getMessage()})


def _setup_logging(level):
    handler = logging.StreamHandler(sys.stderr)
    if level == "json":
        handler.setFormatter(_JsonFormatter())
        level = "info"
    else:
        handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root = logging.getLogger("chainseg")
    root.handlers[:] = [handler]
    root.setLevel(level.upper())
    root.propagate = False


def _write_json(obj, path=None):
    text = json.dumps(obj, indent=1, sort_keys=True) + "\n"
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def _parse_center(text, size=None):
    if text == "auto":
        if size is None:
            raise UsageError("--center auto needs --size or --image")
        return image_center(size)
    try:
        x, y = (float(v) for v in text.split(","))
    except ValueError:
        raise UsageError(f"--center must be 'auto' or 'x,y', got {text!r}") from None
    return (x, y)


def _load_chain_pair(path):
    """(lumen, media) from a chain file; a single chain gives (chain, None)."""
    doc = json.loads(Path(path).read_text())
    if "lumen" in doc:
        return PolarChain.from_json(doc["lumen"]), PolarChain.from_json(doc["media"])
    return PolarChain.from_json(doc), None


# --------------------------------------------------------------------------
# subcommands


def cmd_resample(args):
    contour = load_label(args.labels)
    size = args.size
    if size is None and args.image:
        size = load_image(args.image).shape[1]
    chain = resample(contour, _parse_center(args.center, size), args.nv, args.r_max)
    if args.out:
        save_chain(chain, args.out)
    else:
        _write_json(chain.to_json())


def cmd_loss(args):
    pl, pm = _load_chain_pair(args.pred)
    gl, gm = _load_chain_pair(args.gt)
    # a single chain is scored as the lumen with a perfect media
    if pm is None and gm is None:
        pm = gm = gl
    elif pm is None or gm is None:
        raise UsageError("--pred and --gt must both hold one chain or both hold a lumen/media pair")
    if args.backend == "mse":
        rep = mse_loss(pl, pm, gl, gm)
    else:
        rep = jm_loss(pl, pm, gl, gm, backend=args.backend, fallback=not args.no_fallback)
    _write_json(rep.to_json(include_grad=args.grad), args.out)


def cmd_gradcheck(args):
    if args.backend == "model":
        err = model_gradcheck(seed=args.seed)
        summary = {"backend": "model", "max_rel_err": err, "tol": args.tol, "passed": err < args.tol}
        ok = summary["passed"]
    else:
        summary = run_gradcheck(args.backend, args.trials, args.eps, args.tol, args.seed)
        ok = summary["pass_fraction"] >= args.min_pass
    _write_json(summary, args.out)
    if not ok:
        raise ChainsegError(f"gradient check failed: {json.dumps(summary, sort_keys=True)}")


def cmd_synth(args):
    spec = SynthSpec(count=args.count, size=args.size, n_v=args.nv, harmonics=args.harmonics,
                     alpha_max=args.alpha_max, seed=args.seed)
    raws = synth_generate(spec)
    manifest = write_dataset(raws, args.out, spec.to_json())
    log.info("wrote %d samples to %s", len(raws), manifest.parent)


def cmd_augment(args):
    samples = load_dataset(args.manifest, args.size, args.nv)
    spec = AugmentSpec(noise_variance_255=args.noise_variance_255, seed=args.seed,
                       noise_original=args.noise_original)
    out = augment_dataset(samples, spec)
    write_dataset(out, args.out)
    log.info("wrote %d samples (%d originals) to %s", len(out), len(samples), args.out)


def _relative_entries(entries, out_dir):
    return [{"id": e["id"], **{k: os.path.relpath(e[k], out_dir) for k in ("image", "lumen", "media")}}
            for e in entries]


def cmd_train(args):
    source = args.manifest or args.synth_dir
    if source is None:
        raise UsageError("train needs --manifest or --synth-dir")
    entries = read_manifest(source)
    samples = load_dataset(source, args.size, args.nv)
    config = TrainConfig(
        n_v=args.nv, loss=args.loss, epochs=args.epochs, batch=args.batch, optimizer=args.optimizer,
        lr=args.lr, seed=args.seed, split_fraction=args.split, split_seed=args.split_seed,
        augment=args.augment, noise_variance_255=args.noise_variance_255,
        input_standardize=not args.no_standardize, eval_every=args.eval_every,
        checkpoint_every=args.checkpoint_every, weight_decay=args.weight_decay)
    try:
        config.validate()
    except ValueError as e:
        raise UsageError(str(e)) from None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    by_id = {e["id"]: e for e in entries}
    # ids the split will place in validation, with paths relative to the output
    val = split(samples, config.split_fraction, config.split_seed)[1] if config.split_fraction < 1 else []
    val_entries = _relative_entries([by_id[s.id] for s in val], out)
    result = train(config, samples, out, val_entries)
    final = result.log[-1]
    _write_json({"epochs": config.epochs, "final": final, "model": str(out / "model.pcsg")})


def _model_settings(model_path):
    cfg = Path(model_path).parent / "config.json"
    if cfg.exists():
        return json.loads(cfg.read_text())
    return {}


def cmd_eval(args):
    state = predictor.load(args.model)
    desc = state.descriptor
    settings = _model_settings(args.model)
    standardize = settings.get("input_standardize", True) if args.standardize is None else args.standardize
    samples = load_dataset(args.manifest, desc.input_size, desc.n_v)
    ev = evaluate(state, samples, args.resolution, standardize, args.hd_scale)
    out = Path(args.out) if args.out else Path(args.model).parent / "eval"
    write_evaluation(ev, out, args.csv, args.hist)
    preds = {s.id: {"lumen": PolarChain(image_center(s.size), p[:desc.n_v]).to_json(),
                    "media": PolarChain(image_center(s.size), p[desc.n_v:]).to_json()}
             for s, p in zip(samples, ev.predictions)}
    (out / "predictions.json").write_text(json.dumps(preds, indent=1, sort_keys=True) + "\n")
    _write_json(ev.summary())


def cmd_render(args):
    doc = json.loads(Path(args.pred).read_text())
    if args.id is not None:
        doc = doc[args.id]
    if "lumen" in doc:
        pred = (PolarChain.from_json(doc["lumen"]), PolarChain.from_json(doc["media"]))
    else:
        pred = (PolarChain.from_json(doc),)
    gt = [load_label(p) for p in (args.gt_lumen, args.gt_media) if p]
    image = load_image(args.image)
    render_overlay(image, pred, gt, args.out, scale=args.scale)


def cmd_errata(args):
    report = errata_report(args.trials, args.seed)
    md = to_markdown(report)
    if args.out:
        out = Path(args.out)
        _write_json(report, out)
        out.with_suffix(".md").write_text(md)
    sys.stdout.write(md)


# --------------------------------------------------------------------------
# parser


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument("--log-level", default="warning",
                        choices=["debug", "info", "warning", "error", "json"])
    common.add_argument("--threads", type=int, default=None,
                        help="cap on worker threads (exported to BLAS/OpenMP of child processes)")

    p = argparse.ArgumentParser(prog="chainseg", parents=[common],
                                description="Polar-chain contour regression tools.")
    sub = p.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    def add(name, func, help_text):
        sp = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        sp.set_defaults(func=func)
        return sp

    sp = add("resample", cmd_resample, "Sample a label contour on n_v equally spaced rays.")
    sp.add_argument("--labels", required=True, help="label text file (x y per line)")
    sp.add_argument("--center", default="auto", help="'auto' (image center) or 'x,y'")
    sp.add_argument("--nv", type=int, default=32)
    sp.add_argument("--size", type=int, help="image side length for --center auto")
    sp.add_argument("--image", help="image whose width gives --center auto")
    sp.add_argument("--r-max", type=float, default=None)
    sp.add_argument("--out", help="chain JSON (default stdout)")

    sp = add("loss", cmd_loss, "Per-wedge Jaccard (or MSE) loss between chain files.")
    sp.add_argument("--pred", required=True)
    sp.add_argument("--gt", required=True)
    sp.add_argument("--backend", default="exact", choices=["exact", "paper", "mse"])
    sp.add_argument("--grad", action="store_true", help="include the gradient")
    sp.add_argument("--no-fallback", action="store_true",
                    help="fail on singular paper-backend wedges instead of using the exact value")
    sp.add_argument("--out")

    sp = add("gradcheck", cmd_gradcheck, "Finite-difference check of analytic gradients.")
    sp.add_argument("--backend", default="exact", choices=["exact", "paper", "mse", "model"])
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--eps", type=float, default=None, help="step (default 1e-5 * r_max)")
    sp.add_argument("--tol", type=float, default=1e-4)
    sp.add_argument("--min-pass", type=float, default=0.99)
    sp.add_argument("--out")

    sp = add("synth", cmd_synth, "Generate a synthetic dataset directory.")
    sp.add_argument("--count", type=int, default=500)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--nv", type=int, default=32)
    sp.add_argument("--harmonics", type=int, default=SynthSpec.harmonics)
    sp.add_argument("--alpha-max", type=float, default=SynthSpec.alpha_max)
    sp.add_argument("--out", required=True)

    sp = add("augment", cmd_augment, "Write originals plus flipped/rotated noisy variants.")
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--nv", type=int, default=32)
    sp.add_argument("--noise-variance-255", type=float, default=AugmentSpec.noise_variance_255)
    sp.add_argument("--noise-original", action="store_true")

    sp = add("train", cmd_train, "Train a regressor.")
    src = sp.add_mutually_exclusive_group()
    src.add_argument("--manifest")
    src.add_argument("--synth-dir")
    sp.add_argument("--size", type=int, default=64)
    sp.add_argument("--nv", type=int, default=32)
    sp.add_argument("--loss", default="jm-exact", choices=["jm-exact", "jm-paper", "mse"])
    sp.add_argument("--epochs", type=int, default=200)
    sp.add_argument("--batch", type=int, default=32)
    sp.add_argument("--lr", type=float, default=None)
    sp.add_argument("--optimizer", default="adam", choices=["adam", "sgd"])
    sp.add_argument("--weight-decay", type=float, default=0.0)
    sp.add_argument("--split", type=float, default=0.9)
    sp.add_argument("--split-seed", type=int, default=0)
    sp.add_argument("--augment", action="store_true")
    sp.add_argument("--noise-variance-255", type=float, default=AugmentSpec.noise_variance_255)
    sp.add_argument("--no-standardize", action="store_true")
    sp.add_argument("--eval-every", type=int, default=10)
    sp.add_argument("--checkpoint-every", type=int, default=0)
    sp.add_argument("--out", required=True)

    sp = add("eval", cmd_eval, "Score a trained model on a manifest.")
    sp.add_argument("--model", required=True)
    sp.add_argument("--manifest", required=True)
    sp.add_argument("--resolution", type=int, default=1024)
    sp.add_argument("--hd-scale", type=float, default=1.0)
    sp.add_argument("--csv")
    sp.add_argument("--hist")
    sp.add_argument("--out", help="directory for metrics.json/predictions.json (default <model dir>/eval)")
    g = sp.add_mutually_exclusive_group()
    g.add_argument("--standardize", dest="standardize", action="store_true", default=None)
    g.add_argument("--no-standardize", dest="standardize", action="store_false")

    sp = add("render", cmd_render, "Draw predicted and ground-truth contours over an image.")
    sp.add_argument("--image", required=True)
    sp.add_argument("--pred", required=True, help="chain JSON, lumen/media pair, or predictions.json")
    sp.add_argument("--id", help="entry of a predictions.json")
    sp.add_argument("--gt-lumen")
    sp.add_argument("--gt-media")
    sp.add_argument("--scale", type=int, default=4)
    sp.add_argument("--out", required=True)

    sp = add("errata-report", cmd_errata, "Published closed forms vs exact IoU, per case.")
    sp.add_argument("--trials", type=int, default=10000)
    sp.add_argument("--out", help="JSON path; a .md table is written beside it")
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    _setup_logging(args.log_level)
    if args.threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(args.threads)
    try:
        args.func(args)
    except UsageError as e:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"chainseg: error: {e}\n")
        return 2
    except (ChainsegError, OSError, ValueError, KeyError, json.JSONDecodeError) as e:
        sys.stderr.write(json.dumps({"error": type(e).__name__, "message": str(e)}) + "\n")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
