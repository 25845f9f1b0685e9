"""Training and evaluation loops for the radial regressor."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from PIL import Image, ImageDraw

from . import predictor
from .contour import PolarChain, to_cartesian
from .dataset import AugmentSpec, augment_dataset, image_center, split, to_uint8
from .errors import NonFiniteLoss
from .metrics import evaluate_contours, global_jm, summarize, write_metrics_csv
from .segment_loss import batch_loss

log = logging.getLogger(__name__)

LOSSES = ("jm-exact", "jm-paper", "mse")


@dataclass
class TrainConfig:
    """Training settings.

    ``lr=None`` picks the optimizer default (Adam 1e-3, SGD 0.01).
    ``input_standardize`` rescales every image to zero mean and unit variance
    before it enters the network. ``split_fraction=1`` trains on everything
    and skips validation.
    """

    n_v: int = 32
    loss: str = "jm-exact"
    epochs: int = 200
    batch: int = 32
    optimizer: str = "adam"
    lr: Optional[float] = None
    momentum: float = 0.9
    weight_decay: float = 0.0
    seed: int = 0
    split_fraction: float = 0.9
    split_seed: int = 0
    augment: bool = False
    noise_variance_255: float = 0.2 * 255
    noise_original: bool = False
    input_standardize: bool = True
    eval_every: int = 10
    eval_resolution: int = 512
    checkpoint_every: int = 0
    channels: tuple = (16, 32, 64, 128)
    hidden: int = 256

    def validate(self):
        if self.batch < 1:
            raise ValueError("batch must be >= 1")
        if self.loss not in LOSSES:
            raise ValueError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"optimizer must be adam or sgd, got {self.optimizer!r}")
        if self.n_v < 3:
            raise ValueError("n_v must be >= 3")
        if self.n_v not in (16, 32, 64):
            log.info("n_v=%d is outside the usual {16, 32, 64}", self.n_v)

    def descriptor(self, input_size):
        return predictor.Descriptor(
            input_size=input_size, in_channels=3, n_v=self.n_v, channels=tuple(self.channels),
            kernel_sizes=(3,) * len(self.channels), hidden=self.hidden,
            r_max=float(math.hypot(input_size, input_size) / 2))

    def make_optimizer(self):
        if self.optimizer == "adam":
            return predictor.OptimizerState.adam(lr=1e-3 if self.lr is None else self.lr,
                                                 weight_decay=self.weight_decay)
        return predictor.OptimizerState.sgd(lr=0.01 if self.lr is None else self.lr,
                                            momentum=self.momentum, weight_decay=self.weight_decay)

    def to_json(self):
        d = asdict(self)
        d["channels"] = list(self.channels)
        return d


def standardize(images):
    """Per-image zero mean, unit variance (constant images map to zeros)."""
    x = np.asarray(images, dtype=np.float32)
    axes = tuple(range(1, x.ndim))
    mu = x.mean(axis=axes, keepdims=True)
    sd = x.std(axis=axes, keepdims=True)
    return (x - mu) / np.where(sd > 1e-6, sd, 1.0)


def network_input(samples, config_or_flag):
    flag = getattr(config_or_flag, "input_standardize", config_or_flag)
    x = np.stack([s.image for s in samples]).astype(np.float32)
    return standardize(x) if flag else x


def predict(state, images, batch=64):
    """Radii (N, 2 n_v) for already-prepared network input."""
    out = []
    for i in range(0, len(images), batch):
        out.append(predictor.forward(state, images[i:i + batch])[0])
    return np.concatenate(out).astype(np.float64)


def _batches(order, size):
    """Consecutive batches of ``order``; the last one is padded from the front."""
    n = len(order)
    for i in range(0, n, size):
        idx = order[i:i + size]
        if len(idx) < size:
            idx = np.concatenate([idx, np.resize(order, size - len(idx))])
        yield idx


@dataclass
class TrainResult:
    state: predictor.RegressorState
    log: list
    train_ids: list
    val: list = field(repr=False)


def train(config, samples, out_dir=None, val_entries=None):
    """Fit a regressor to ``samples`` (list of LabeledSample).

    Splits off a validation set, optionally augments the training part, and
    runs ``config.epochs`` epochs of shuffled mini-batch descent. When
    ``out_dir`` is given, writes ``train_log.jsonl``, ``config.json``,
    ``val_manifest.json``, periodic checkpoints and ``model.pcsg``.

    Raises:
        NonFiniteLoss: a batch produced a non-finite loss or gradient.
    """
    config.validate()
    if not samples:
        raise ValueError("empty dataset")
    if config.split_fraction >= 1:
        train_set, val_set = list(samples), []
    else:
        train_set, val_set = split(samples, config.split_fraction, config.split_seed)
    if config.augment:
        spec = AugmentSpec(noise_variance_255=config.noise_variance_255,
                           noise_original=config.noise_original, seed=config.seed)
        train_set = augment_dataset(train_set, spec)
    size = samples[0].size
    desc = config.descriptor(size)
    state = predictor.init(desc, seed=config.seed)
    opt = config.make_optimizer()
    theta = 2 * math.pi / config.n_v

    X = network_input(train_set, config)
    Y = np.stack([s.target() for s in train_set])
    Xv = network_input(val_set, config) if val_set else None

    out = Path(out_dir) if out_dir is not None else None
    log_fh = None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        (out / "config.json").write_text(json.dumps(config.to_json(), indent=1, sort_keys=True) + "\n")
        val_doc = val_entries if val_entries is not None else [{"id": s.id} for s in val_set]
        (out / "val_manifest.json").write_text(json.dumps(val_doc, indent=1) + "\n")
        log_fh = open(out / "train_log.jsonl", "w")

    rng = np.random.default_rng(config.seed)
    records = []
    try:
        for epoch in range(1, config.epochs + 1):
            order = rng.permutation(len(X))
            total, seen, fallbacks = 0.0, 0, 0
            for idx in _batches(order, config.batch):
                pred, cache = predictor.forward(state, X[idx])
                values, grad, nf = batch_loss(pred, Y[idx], theta, config.loss)
                bad = ~(np.isfinite(values) & np.all(np.isfinite(grad), axis=1))
                if bad.any():
                    raise NonFiniteLoss(
                        f"epoch {epoch}: non-finite {config.loss} loss or gradient on samples "
                        f"{[train_set[i].id for i in idx[bad]][:5]}")
                grads = predictor.backward(state, cache, grad / len(idx))
                predictor.step(state, opt, grads)
                total += float(values.sum())
                seen += len(idx)
                fallbacks += nf
            rec = {"epoch": epoch, "train_loss": round(total / seen, 8), "fallbacks": fallbacks}
            if val_set and (epoch % config.eval_every == 0 or epoch == config.epochs):
                rec["val"] = _val_metrics(state, val_set, Xv, theta, config.eval_resolution)
            records.append(rec)
            if log_fh is not None:
                log_fh.write(json.dumps(rec, sort_keys=True) + "\n")
                log_fh.flush()
            log.info("epoch %d loss %.6f%s", epoch, rec["train_loss"],
                     f" val_jm {rec['val']['jm_lumen']:.4f}/{rec['val']['jm_media']:.4f}" if "val" in rec else "")
            if out is not None and config.checkpoint_every and epoch % config.checkpoint_every == 0:
                predictor.save(state, out / f"checkpoint_{epoch:05d}.pcsg")
    finally:
        if log_fh is not None:
            log_fh.close()
    if out is not None:
        predictor.save(state, out / "model.pcsg")
    return TrainResult(state, records, [s.id for s in train_set], val_set)


def _val_metrics(state, val_set, Xv, theta, resolution):
    pred = predict(state, Xv)
    gt = np.stack([s.target() for s in val_set])
    jm_loss_mean = float(batch_loss(pred, gt, theta, "jm-exact")[0].mean())
    jl, jmed = [], []
    for s, p in zip(val_set, pred):
        lum, med = chains_from_radii(p, s.size)
        jl.append(global_jm(to_cartesian(lum), s.lumen_gt, resolution))
        jmed.append(global_jm(to_cartesian(med), s.media_gt, resolution))
    return {"jm_loss": round(jm_loss_mean, 8), "jm_lumen": round(float(np.mean(jl)), 8),
            "jm_media": round(float(np.mean(jmed)), 8)}


def chains_from_radii(radii, size):
    n_v = len(radii) // 2
    c = image_center(size)
    return PolarChain(c, radii[:n_v]), PolarChain(c, radii[n_v:])


# --------------------------------------------------------------------------
# evaluation


@dataclass
class ErrorHistogram:
    """Histogram of radial errors ``r_i - a_i`` (px), lumen and media pooled."""

    edges: np.ndarray
    counts: np.ndarray
    mean: float
    std: float

    @classmethod
    def from_errors(cls, errors, bin_width=0.5):
        e = np.asarray(errors, dtype=float).ravel()
        # bins centered on multiples of bin_width, so zero sits mid-bin
        k = np.floor(e / bin_width + 0.5).astype(np.int64)
        lo, hi = int(k.min()), int(k.max())
        counts = np.bincount(k - lo, minlength=hi - lo + 1)
        edges = (np.arange(lo, hi + 2) - 0.5) * bin_width
        return cls(edges, counts, float(e.mean()), float(e.std()))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["bin_left", "bin_right", "count"])
            for l, r, c in zip(self.edges[:-1], self.edges[1:], self.counts):
                w.writerow([f"{l:.6f}", f"{r:.6f}", int(c)])

    def to_json(self):
        return {"mean": self.mean, "std": self.std, "n": int(self.counts.sum()),
                "bin_width": float(self.edges[1] - self.edges[0])}


@dataclass
class Evaluation:
    reports: list
    histogram: ErrorHistogram
    predictions: np.ndarray

    def summary(self):
        return {**summarize(self.reports), "radial_error": self.histogram.to_json(), "n_images": len(self.reports)}


def evaluate(state, samples, resolution=1024, input_standardize=True, hd_scale=1.0,
             predictions=None, bin_width=0.5):
    """Metrics against each sample's original contours plus the error histogram.

    ``predictions`` (N, 2 n_v) bypasses the network, e.g. to score the ground
    truth chains themselves.
    """
    if predictions is None:
        predictions = predict(state, network_input(samples, input_standardize))
    predictions = np.asarray(predictions, dtype=float)
    reports = []
    errors = []
    for s, p in zip(samples, predictions):
        lum, med = chains_from_radii(p, s.size)
        reports.append(evaluate_contours(s.id, to_cartesian(lum), to_cartesian(med),
                                         s.lumen_gt, s.media_gt, resolution, hd_scale))
        errors.append(p - s.target())
    return Evaluation(reports, ErrorHistogram.from_errors(np.concatenate(errors), bin_width), predictions)


def write_evaluation(ev, out_dir, csv_path=None, hist_path=None):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_metrics_csv(ev.reports, csv_path or out / "metrics.csv")
    ev.histogram.to_csv(hist_path or out / "histogram.csv")
    doc = {"summary": ev.summary(), "images": [r.to_json() for r in ev.reports]}
    (out / "metrics.json").write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


# --------------------------------------------------------------------------
# overlays

DEFAULT_COLORS = {
    "gt_lumen": (0, 0, 255),
    "gt_media": (0, 255, 255),
    "pred_lumen": (255, 0, 255),
    "pred_media": (255, 255, 255),
}


def _to_canvas(points, scale):
    p = (np.asarray(points, dtype=float) + 0.5) * scale - 0.5
    return [tuple(q) for q in p] + [tuple(p[0])]


def render_overlay(image, pred_chains, gt_contours, path, colors=None, scale=4, width=1):
    """Draw ground-truth and predicted outlines over a grayscale image.

    Args:
        image: (H, W) or (H, W, C) array in [0, 1].
        pred_chains: (lumen, media) PolarChains or CartesianContours.
        gt_contours: (lumen, media) CartesianContours.
        path: output PNG path.
        colors: overrides for the keys of ``DEFAULT_COLORS``.
        scale: integer upsampling of the canvas.
    """
    colors = {**DEFAULT_COLORS, **(colors or {})}
    img = np.asarray(image, dtype=float)
    if img.ndim == 3:
        img = img[..., 0]
    gray = to_uint8(img)
    canvas = Image.fromarray(gray, mode="L").resize((gray.shape[1] * scale, gray.shape[0] * scale),
                                                     Image.NEAREST).convert("RGB")
    draw = ImageDraw.Draw(canvas)
    for key, shape in zip(("gt_lumen", "gt_media"), gt_contours):
        draw.line(_to_canvas(shape.points, scale), fill=colors[key], width=width)
    for key, shape in zip(("pred_lumen", "pred_media"), pred_chains):
        pts = to_cartesian(shape).points if isinstance(shape, PolarChain) else shape.points
        draw.line(_to_canvas(pts, scale), fill=colors[key], width=width)
    canvas.save(path, format="PNG")
    return canvas
