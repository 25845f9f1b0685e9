"""Images and contour labels: file I/O, resizing, augmentation, synthesis.

Coordinates are pixel indices: column ``x``, row ``y``, with pixel (x, y)
centered on the integer point. Chains are taken about ``(S/2, S/2)`` of the
``S x S`` working image.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import map_coordinates

from .contour import CartesianContour, PolarChain, ray_radius, resample
from .errors import InvalidSpec, NestingViolation, ParseError, TooFewPoints

_SPLIT = re.compile(r"[\s,;]+")


# --------------------------------------------------------------------------
# labels and images


def load_label(path):
    """Read a contour from a text file with one ``x y`` pair per line.

    Whitespace, commas or semicolons separate the two numbers. Blank lines and
    lines starting with ``#`` are skipped.

    Raises:
        ParseError: a line does not hold exactly two numbers.
        TooFewPoints: fewer than three points.
    """
    pts = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.strip()
            if not text or text.startswith("#"):
                continue
            fields = [f for f in _SPLIT.split(text) if f]
            if len(fields) != 2:
                raise ParseError(f"expected 2 coordinates, got {len(fields)}: {text!r}", lineno)
            try:
                x, y = float(fields[0]), float(fields[1])
            except ValueError:
                raise ParseError(f"not a number: {text!r}", lineno) from None
            if not (math.isfinite(x) and math.isfinite(y)):
                raise ParseError(f"non-finite coordinate: {text!r}", lineno)
            pts.append((x, y))
    if len(pts) < 3:
        raise TooFewPoints(f"{path}: {len(pts)} point(s), need at least 3")
    return CartesianContour(pts)


def format_points(points):
    return "".join(f"{x:.6f} {y:.6f}\n" for x, y in np.asarray(points))


def save_label(contour, path):
    Path(path).write_text(format_points(contour.points))


def load_image(path):
    """Grayscale image as float64 in [0, 1]; color input is converted to luma."""
    with Image.open(path) as im:
        arr = np.asarray(im.convert("L"), dtype=np.float64)
    return arr / 255.0


def to_uint8(image):
    return np.round(np.clip(image, 0, 1) * 255).astype(np.uint8)


def save_image(image, path):
    """Write a [0, 1] grayscale (or the first channel of an H x W x C) image."""
    img = np.asarray(image)
    if img.ndim == 3:
        img = img[..., 0]
    Image.fromarray(to_uint8(img), mode="L").save(path)


# --------------------------------------------------------------------------
# samples


@dataclass
class RawSample:
    """Image and labels at their original resolution."""

    id: str
    image: np.ndarray  # (H0, W0) in [0, 1]
    lumen: CartesianContour
    media: CartesianContour


@dataclass
class LabeledSample:
    id: str
    image: np.ndarray  # (S, S, 3) float in [0, 1]
    lumen_gt: CartesianContour
    media_gt: CartesianContour
    lumen_chain: PolarChain
    media_chain: PolarChain

    @property
    def size(self):
        return self.image.shape[0]

    def target(self):
        """Concatenated lumen then media radii, shape (2 n_v,)."""
        return np.concatenate([self.lumen_chain.radii, self.media_chain.radii])


def image_center(size):
    return (size / 2.0, size / 2.0)


def check_nesting(lumen_chain, media_chain, sample_id=""):
    """Raise NestingViolation unless media radii >= lumen radii on every ray."""
    bad = np.flatnonzero(media_chain.radii < lumen_chain.radii)
    if bad.size:
        k = int(bad[0])
        raise NestingViolation(
            f"sample {sample_id!r}: media inside lumen on {bad.size} ray(s), first ray {k} "
            f"(lumen {lumen_chain.radii[k]:.6f} > media {media_chain.radii[k]:.6f})")


def chains_for(lumen, media, size, n_v, sample_id="", r_max=None):
    c = image_center(size)
    r_max = size / math.sqrt(2) if r_max is None else r_max
    lc = resample(lumen, c, n_v, r_max)
    mc = resample(media, c, n_v, r_max)
    check_nesting(lc, mc, sample_id)
    return lc, mc


def resize_bilinear(image, out_h, out_w):
    """Bilinear resize with pixel centers aligned (constant images stay constant)."""
    h, w = image.shape
    if (h, w) == (out_h, out_w):
        return image.copy()
    ys = (np.arange(out_h) + 0.5) * (h / out_h) - 0.5
    xs = (np.arange(out_w) + 0.5) * (w / out_w) - 0.5
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    return map_coordinates(image, [yy, xx], order=1, mode="nearest")


def replicate_channels(gray, channels=3):
    return np.repeat(gray[..., None], channels, axis=-1)


def preprocess(raw, size=64, n_v=32, r_max=None):
    """Resize a raw sample to ``size x size``, scale its labels and resample chains.

    Raises:
        CenterOutside: the image center is outside a scaled contour.
        NestingViolation: media chain falls inside the lumen chain.
    """
    h0, w0 = raw.image.shape
    scale = np.array([size / w0, size / h0])
    lumen = CartesianContour(raw.lumen.points * scale)
    media = CartesianContour(raw.media.points * scale)
    gray = resize_bilinear(raw.image, size, size)
    lc, mc = chains_for(lumen, media, size, n_v, raw.id, r_max)
    return LabeledSample(raw.id, replicate_channels(gray), lumen, media, lc, mc)


# --------------------------------------------------------------------------
# augmentation


@dataclass(frozen=True)
class AugmentSpec:
    """Augmentation settings.

    ``noise_variance_255`` is the Gaussian noise variance in 0..255 intensity
    units, so the noise sigma on [0, 1] images is ``sqrt(v) / 255``.
    """

    max_rotation_deg: float = 45.0
    noise_variance_255: float = 0.2 * 255
    noise_original: bool = False
    seed: int = 0

    @property
    def noise_sigma(self):
        return math.sqrt(self.noise_variance_255) / 255.0


def flip_lr_points(points, size):
    p = np.array(points, dtype=float)
    p[:, 0] = size - 1 - p[:, 0]
    return p


def flip_ud_points(points, size):
    p = np.array(points, dtype=float)
    p[:, 1] = size - 1 - p[:, 1]
    return p


def rotate_points(points, angle, center):
    """Rotate by ``angle`` radians (CCW in the x/y frame) about ``center``."""
    c, s = math.cos(angle), math.sin(angle)
    d = np.asarray(points, dtype=float) - center
    return np.column_stack([center[0] + c * d[:, 0] - s * d[:, 1], center[1] + s * d[:, 0] + c * d[:, 1]])


def rotate_image(image, angle, center):
    """Bilinear rotation matching :func:`rotate_points`; outside pixels become 0."""
    h, w = image.shape[:2]
    yy, xx = np.meshgrid(np.arange(h, dtype=float), np.arange(w, dtype=float), indexing="ij")
    # sample the source at the inverse-rotated location
    c, s = math.cos(angle), math.sin(angle)
    dx, dy = xx - center[0], yy - center[1]
    sx = center[0] + c * dx + s * dy
    sy = center[1] - s * dx + c * dy
    if image.ndim == 2:
        return map_coordinates(image, [sy, sx], order=1, mode="constant", cval=0.0)
    return np.stack([map_coordinates(image[..., k], [sy, sx], order=1, mode="constant", cval=0.0)
                     for k in range(image.shape[2])], axis=-1)


def _transformed(sample, suffix, image, lumen_pts, media_pts, n_v):
    lumen = CartesianContour(lumen_pts)
    media = CartesianContour(media_pts)
    lc, mc = chains_for(lumen, media, sample.size, n_v, sample.id + suffix, _r_max_of(sample))
    return LabeledSample(sample.id + suffix, image, lumen, media, lc, mc)


def _r_max_of(sample):
    return sample.size / math.sqrt(2)


def add_noise(image, sigma, rng):
    return np.clip(image + rng.normal(0.0, sigma, image.shape), 0.0, 1.0)


def augment(sample, spec, rng):
    """The left-right, up-down, both-flip and random-rotation variants of a sample.

    Labels go through the same map as the image. Noise is added to every
    returned image. ``rng`` is a numpy Generator.
    """
    S = sample.size
    n_v = sample.lumen_chain.n_v
    lum, med = sample.lumen_gt.points, sample.media_gt.points
    angle_deg = rng.uniform(-spec.max_rotation_deg, spec.max_rotation_deg)
    angle = math.radians(angle_deg)
    c = image_center(S)
    out = [
        _transformed(sample, "_lr", sample.image[:, ::-1].copy(),
                     flip_lr_points(lum, S), flip_lr_points(med, S), n_v),
        _transformed(sample, "_ud", sample.image[::-1].copy(),
                     flip_ud_points(lum, S), flip_ud_points(med, S), n_v),
        _transformed(sample, "_lrud", sample.image[::-1, ::-1].copy(),
                     flip_ud_points(flip_lr_points(lum, S), S), flip_ud_points(flip_lr_points(med, S), S), n_v),
        _transformed(sample, "_rot", rotate_image(sample.image, angle, c),
                     rotate_points(lum, angle, c), rotate_points(med, angle, c), n_v),
    ]
    for s in out:
        s.image = add_noise(s.image, spec.noise_sigma, rng)
    return out


def augment_dataset(samples, spec):
    """Originals followed by their variants, each sample seeded from (seed, index)."""
    out = []
    for idx, sample in enumerate(samples):
        rng = np.random.default_rng([spec.seed, idx])
        variants = augment(sample, spec, rng)
        original = sample
        if spec.noise_original:
            original = replace(sample, image=add_noise(sample.image, spec.noise_sigma, rng))
        out.append(original)
        out.extend(variants)
    return out


# --------------------------------------------------------------------------
# synthetic data


@dataclass(frozen=True)
class SynthSpec:
    """Procedural vessel cross-sections.

    Lumen radius ``r(phi) = R_L (1 + sum_h alpha_h cos(h phi + psi_h))`` with
    ``alpha_h`` uniform in ``[-alpha_max, alpha_max]``; the media uses a base
    ``media_ratio`` times larger and amplitudes scaled by ``media_alpha_scale``.
    Radii are fractions of the image size.
    """

    count: int = 500
    size: int = 64
    n_v: int = 32
    harmonics: int = 3
    alpha_max: float = 0.08
    lumen_radius: tuple = (0.14, 0.22)
    media_ratio: tuple = (1.45, 1.75)
    media_alpha_scale: float = 0.5
    label_points: int = 90
    lumen_level: float = 0.12
    media_level: float = 0.78
    background_level: float = 0.38
    speckle: float = 0.2
    noise_sigma: float = 0.03
    seed: int = 0

    def validate(self):
        if self.count < 1:
            raise InvalidSpec("count must be >= 1")
        if self.size < 16:
            raise InvalidSpec("size must be >= 16")
        if self.n_v < 3:
            raise InvalidSpec("n_v must be >= 3")
        if self.harmonics < 0 or self.alpha_max < 0 or self.media_alpha_scale < 0:
            raise InvalidSpec("harmonics and amplitudes must be nonnegative")
        lo, hi = self.lumen_radius
        mlo, mhi = self.media_ratio
        if not 0 < lo <= hi or not 1 < mlo <= mhi:
            raise InvalidSpec("radius ranges must be positive and media_ratio > 1")
        wl = self.harmonics * self.alpha_max
        wm = wl * self.media_alpha_scale
        if wl >= 1 or wm >= 1:
            raise InvalidSpec(f"harmonic amplitudes sum to {wl:.3f}; contours would not be star-shaped")
        # worst lumen excursion must stay inside the worst media excursion
        if (1 + wl) >= mlo * (1 - wm):
            raise InvalidSpec("amplitudes permit the lumen to cross the media")
        if hi * mhi * (1 + wm) >= 0.5:
            raise InvalidSpec("media can leave the image")
        if self.label_points < 8:
            raise InvalidSpec("label_points must be >= 8")

    def to_json(self):
        d = asdict(self)
        d["lumen_radius"] = list(self.lumen_radius)
        d["media_ratio"] = list(self.media_ratio)
        return d

    @classmethod
    def from_json(cls, d):
        d = dict(d)
        d["lumen_radius"] = tuple(d["lumen_radius"])
        d["media_ratio"] = tuple(d["media_ratio"])
        return cls(**d)


def _radius_fn(base, alphas, phases):
    h = np.arange(1, len(alphas) + 1)

    def r(phi):
        phi = np.asarray(phi, dtype=float)
        return base * (1 + np.cos(np.multiply.outer(phi, h) + phases) @ alphas)

    return r


def _label_contour(rfn, center, n_points, offset):
    phi = offset + 2 * np.pi * np.arange(n_points) / n_points
    r = rfn(phi)
    pts = np.column_stack([center[0] + r * np.cos(phi), center[1] + r * np.sin(phi)])
    # labels are stored with 6 decimals; keep memory and disk identical
    return CartesianContour(np.round(pts, 6))


def _render(spec, lum_fn, med_fn, rng):
    S = spec.size
    cx, cy = image_center(S)
    yy, xx = np.meshgrid(np.arange(S, dtype=float), np.arange(S, dtype=float), indexing="ij")
    rho = np.hypot(xx - cx, yy - cy)
    phi = np.arctan2(yy - cy, xx - cx)
    # one-pixel soft edges
    in_lumen = np.clip(lum_fn(phi) - rho + 0.5, 0, 1)
    in_media = np.clip(med_fn(phi) - rho + 0.5, 0, 1)
    img = (spec.background_level * (1 - in_media)
           + spec.media_level * (in_media - in_lumen)
           + spec.lumen_level * in_lumen)
    img = img * (1 + spec.speckle * rng.standard_normal(img.shape))
    img = img + spec.noise_sigma * rng.standard_normal(img.shape)
    return to_uint8(img).astype(np.float64) / 255.0


def synth_sample(spec, idx):
    """Sample ``idx`` of a synthetic set; depends only on (spec, idx)."""
    rng = np.random.default_rng([spec.seed, idx])
    S = spec.size
    H = spec.harmonics
    base_l = rng.uniform(*spec.lumen_radius) * S
    base_m = base_l * rng.uniform(*spec.media_ratio)
    a_l = rng.uniform(-spec.alpha_max, spec.alpha_max, H)
    p_l = rng.uniform(0, 2 * np.pi, H)
    a_m = rng.uniform(-1, 1, H) * spec.alpha_max * spec.media_alpha_scale
    p_m = rng.uniform(0, 2 * np.pi, H)
    lum_fn = _radius_fn(base_l, a_l, p_l)
    med_fn = _radius_fn(base_m, a_m, p_m)
    offset = rng.uniform(0, 2 * np.pi / spec.label_points)
    c = image_center(S)
    lumen = _label_contour(lum_fn, c, spec.label_points, offset)
    media = _label_contour(med_fn, c, spec.label_points, offset)
    image = _render(spec, lum_fn, med_fn, rng)
    return RawSample(f"{idx:05d}", image, lumen, media)


def synth_generate(spec):
    """All ``spec.count`` raw samples (already at ``spec.size``)."""
    spec.validate()
    return [synth_sample(spec, i) for i in range(spec.count)]


# --------------------------------------------------------------------------
# datasets on disk


def write_dataset(samples, out_dir, extra=None):
    """Write images/*.png, labels/*.lum.txt, labels/*.med.txt and manifest.json."""
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "labels").mkdir(parents=True, exist_ok=True)
    manifest = []
    for s in samples:
        img = f"images/{s.id}.png"
        lum = f"labels/{s.id}.lum.txt"
        med = f"labels/{s.id}.med.txt"
        image = s.image if isinstance(s, RawSample) else s.image[..., 0]
        save_image(image, out / img)
        lumen = s.lumen if isinstance(s, RawSample) else s.lumen_gt
        media = s.media if isinstance(s, RawSample) else s.media_gt
        save_label(lumen, out / lum)
        save_label(media, out / med)
        manifest.append({"id": s.id, "image": img, "lumen": lum, "media": med})
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    if extra is not None:
        (out / "synth_spec.json").write_text(json.dumps(extra, indent=1, sort_keys=True) + "\n")
    return out / "manifest.json"


def read_manifest(path):
    """Manifest entries with paths resolved against the manifest's directory."""
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    entries = json.loads(path.read_text())
    if not isinstance(entries, list):
        raise ParseError(f"{path}: manifest must be a JSON list")
    base = path.parent
    out = []
    for k, e in enumerate(entries):
        try:
            out.append({"id": str(e["id"]), **{key: str(base / e[key]) for key in ("image", "lumen", "media")}})
        except (KeyError, TypeError):
            raise ParseError(f"{path}: entry {k} lacks id/image/lumen/media") from None
    return out


def load_raw(entry):
    return RawSample(entry["id"], load_image(entry["image"]), load_label(entry["lumen"]), load_label(entry["media"]))


def load_dataset(path, size=64, n_v=32):
    """Load and preprocess every sample of a manifest (or synth directory)."""
    return [preprocess(load_raw(e), size, n_v) for e in read_manifest(path)]


def split(items, fraction=0.9, seed=0):
    """Seeded disjoint split; ``floor(fraction * n)`` items go to the first part.

    Both parts keep the input order.
    """
    if not 0 < fraction < 1:
        raise ValueError(f"fraction must be in (0, 1), got {fraction}")
    n = len(items)
    k = math.floor(fraction * n + 1e-9)
    perm = np.random.default_rng(seed).permutation(n)
    first = set(perm[:k].tolist())
    train = [items[i] for i in range(n) if i in first]
    val = [items[i] for i in range(n) if i not in first]
    return train, val
