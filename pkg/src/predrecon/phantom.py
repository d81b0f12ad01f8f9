"""Seedable multi-contrast ellipse phantoms with paired longitudinal variants.

Each instance is built from one random ellipse layout (shared anatomy) and
three per-tissue intensity tables (one per contrast), so the contrasts look
different while their geometry is pixel-identical — the property that makes
contrast-to-contrast prediction learnable. Slices adjacent to the center
slice come from smooth per-ellipse parameter drift, giving a cheap stand-in
for through-plane structure at any integer offset.

Everything is a pure function of the spec: same spec, same bits.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .kspace import CoilMaps
from .register import IDENTITY, RigidTransform2D
from .tensorio import save_tensor

CONTRASTS = ("c1", "c2", "c3")

# tissue paint classes; later entries overwrite earlier ones where they overlap
BACKGROUND, BRAIN, CSF, WHITE, LESION, RIM = range(6)

# per-contrast intensity for each tissue class (rows: class, cols: c1/c2/c3)
_BASE_LUT = np.array(
    [
        [0.00, 0.00, 0.00],  # background
        [0.62, 0.48, 0.58],  # brain parenchyma
        [0.16, 1.00, 0.14],  # csf / ventricle
        [0.92, 0.30, 0.38],  # white-matter-like
        [0.35, 0.85, 1.00],  # lesion-like (bright on c3)
        [0.90, 0.40, 0.18],  # outer rim, c3 value replaced when fat rim is on
    ]
)
_RIM_FAT_C3 = 1.05

HEAD_AXES = (0.92, 0.78)  # (ay, ax) in normalized [-1, 1] coordinates
BRAIN_SCALE = 0.90  # support boundary as a fraction of the head ellipse
VENTRICLE_DILATION_SPAN = 0.55  # axis scale at change_magnitude = 1

# declared normalization ranges for the 8-float metadata vector
FLAIR_META_RANGES = (
    ("tr_c1", 8.0, 12.0),
    ("te_c1", 2.5, 5.0),
    ("tr_c2", 3000.0, 5500.0),
    ("te_c2", 80.0, 120.0),
    ("tr_c3", 7000.0, 9500.0),
    ("te_c3", 80.0, 140.0),
    ("ti_c3", 2000.0, 2600.0),
    ("fat", 0.0, 1.0),
)
LONGITUDINAL_META_RANGES = (
    ("tr_first", 8.0, 12.0),
    ("te_first", 2.5, 5.0),
    ("tr_second", 8.0, 12.0),
    ("te_second", 2.5, 5.0),
    ("interval_months", 12.0, 96.0),
    ("age_years", 55.0, 93.0),
    ("cdr", 3.0, 5.0),
    ("pad", 0.0, 1.0),
)


def interval_for_change(change_magnitude: float) -> float:
    """Declared monotone map from structural-change fraction to scan interval."""
    return 12.0 + 84.0 * change_magnitude


def change_for_interval(interval_months: float) -> float:
    return (interval_months - 12.0) / 84.0


@dataclass(frozen=True)
class PhantomSpec:
    seed: int
    size: int = 64
    n_ellipses: int = 6
    fat_rim_flag: bool = False
    change_magnitude: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.size < 32 or self.size % 2:
            raise ValueError("size must be even and >= 32")
        if not 0.0 <= self.change_magnitude <= 1.0:
            raise ValueError("change_magnitude must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")


@dataclass(frozen=True)
class Ellipse:
    cy: float
    cx: float
    ay: float
    ax: float
    phi_deg: float
    tissue: int


@dataclass(frozen=True)
class PhantomGeometry:
    """Paint-ordered ellipse table; exposed so tests can reason about regions."""

    ellipses: tuple[Ellipse, ...]
    ventricle_indices: tuple[int, ...]
    head_axes: tuple[float, float] = HEAD_AXES
    brain_scale: float = BRAIN_SCALE


@dataclass(frozen=True)
class PhantomInstance:
    spec: PhantomSpec
    images: np.ndarray  # (contrast, slice: prev/center/next, H, W) float64
    support_mask: np.ndarray  # (H, W) bool
    meta: np.ndarray  # (8,) normalized to [0, 1]
    meta_raw: dict
    geometry: PhantomGeometry

    @property
    def c1(self):
        return self.images[0, 1]

    @property
    def c2(self):
        return self.images[1, 1]

    @property
    def c3(self):
        return self.images[2, 1]

    def stack(self, contrast: int) -> np.ndarray:
        """(3, H, W) prev/center/next slices of one contrast."""
        return self.images[contrast]


@dataclass(frozen=True)
class LongitudinalPair:
    first: PhantomInstance
    second: PhantomInstance  # acquisition frame: rigid offset applied
    second_aligned: PhantomInstance  # same anatomy in the first scan's frame
    offset: RigidTransform2D
    change_map: np.ndarray  # |second_aligned.c1 - first.c1|, first frame


def _rng(spec_seed: int, stream: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(spec_seed), stream]))


def _layout(spec: PhantomSpec) -> PhantomGeometry:
    rng = _rng(spec.seed, 0)
    ellipses = [Ellipse(0.0, 0.0, HEAD_AXES[0], HEAD_AXES[1], 0.0, BRAIN)]
    interior = (WHITE, LESION, CSF)
    for i in range(spec.n_ellipses):
        cy = float(rng.uniform(-0.45, 0.45))
        cx = float(rng.uniform(-0.40, 0.40))
        ay = float(rng.uniform(0.07, 0.24))
        ax = float(rng.uniform(0.07, 0.24))
        phi = float(rng.uniform(0.0, 180.0))
        ellipses.append(Ellipse(cy, cx, ay, ax, phi, interior[i % 3]))
    # two mirrored ventricles painted last so they stay visible
    vy = float(rng.uniform(-0.08, 0.02))
    vsep = float(rng.uniform(0.10, 0.16))
    vay = float(rng.uniform(0.16, 0.22))
    vax = float(rng.uniform(0.07, 0.10))
    tilt = float(rng.uniform(-8.0, 8.0))
    n = len(ellipses)
    ellipses.append(Ellipse(vy, -vsep, vay, vax, tilt, CSF))
    ellipses.append(Ellipse(vy, vsep, vay, vax, -tilt, CSF))
    return PhantomGeometry(tuple(ellipses), (n, n + 1))


def _drift_table(spec: PhantomSpec, n: int) -> np.ndarray:
    """Per-ellipse (dcy, dcx, daxes) drift rates for through-plane variation."""
    rng = _rng(spec.seed, 4)
    drift = rng.uniform(-1.0, 1.0, size=(n, 3))
    drift[0] = 0.0  # head stays put so support is slice-independent
    return drift


def _ellipses_at_offset(
    geom: PhantomGeometry, drift: np.ndarray, offset: float
) -> tuple[Ellipse, ...]:
    out = []
    for e, d in zip(geom.ellipses, drift):
        out.append(
            Ellipse(
                e.cy + 0.012 * offset * d[0],
                e.cx + 0.012 * offset * d[1],
                e.ay * (1.0 + 0.03 * offset * d[2]),
                e.ax * (1.0 + 0.03 * offset * d[2]),
                e.phi_deg,
                e.tissue,
            )
        )
    return tuple(out)


def _ellipse_field(e: Ellipse, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    phi = np.radians(e.phi_deg)
    dy = ys - e.cy
    dx = xs - e.cx
    u = np.cos(phi) * dx + np.sin(phi) * dy
    v = -np.sin(phi) * dx + np.cos(phi) * dy
    return (u / e.ax) ** 2 + (v / e.ay) ** 2


def _label_map(ellipses, size: int, oversample: int = 2) -> np.ndarray:
    s = size * oversample
    coords = (np.arange(s) + 0.5) / s * 2.0 - 1.0
    ys = coords[:, None]
    xs = coords[None, :]
    labels = np.zeros((s, s), dtype=np.int8)
    head = ellipses[0]
    head_field = _ellipse_field(head, ys, xs)
    labels[head_field <= 1.0] = BRAIN
    for e in ellipses[1:]:
        labels[_ellipse_field(e, ys, xs) <= 1.0] = e.tissue
    # rim annulus between the brain boundary and the head boundary
    rim_zone = (head_field <= 1.0) & (head_field > BRAIN_SCALE**2)
    labels[rim_zone] = RIM
    return labels


def _render(labels: np.ndarray, lut: np.ndarray, size: int) -> np.ndarray:
    per_pixel = lut[labels]
    k = labels.shape[0] // size
    return per_pixel.reshape(size, k, size, k).mean(axis=(1, 3))


def _support_mask(geom: PhantomGeometry, size: int) -> np.ndarray:
    coords = (np.arange(size) + 0.5) / size * 2.0 - 1.0
    head = geom.ellipses[0]
    field = _ellipse_field(head, coords[:, None], coords[None, :])
    return field <= BRAIN_SCALE**2


def _instance_luts(spec: PhantomSpec) -> np.ndarray:
    rng = _rng(spec.seed, 1)
    lut = _BASE_LUT * (1.0 + rng.uniform(-0.04, 0.04, size=_BASE_LUT.shape))
    lut[BACKGROUND] = 0.0
    if spec.fat_rim_flag:
        lut[RIM, 2] = _RIM_FAT_C3 * (1.0 + float(rng.uniform(-0.04, 0.04)))
    return lut


def _draw_flair_meta(spec: PhantomSpec) -> tuple[np.ndarray, dict]:
    rng = _rng(spec.seed, 2)
    raw, norm = {}, []
    for name, lo, hi in FLAIR_META_RANGES:
        if name == "fat":
            value = float(spec.fat_rim_flag)
        else:
            value = float(rng.uniform(lo, hi))
        raw[name] = value
        norm.append((value - lo) / (hi - lo))
    return np.array(norm), raw


def _draw_longitudinal_meta(spec: PhantomSpec) -> tuple[np.ndarray, dict]:
    rng = _rng(spec.seed, 2)
    raw, norm = {}, []
    for name, lo, hi in LONGITUDINAL_META_RANGES:
        if name == "interval_months":
            value = interval_for_change(spec.change_magnitude)
        elif name == "pad":
            value = 0.0
        else:
            value = float(rng.uniform(lo, hi))
        raw[name] = value
        norm.append((value - lo) / (hi - lo))
    return np.array(norm), raw


def _render_instance(
    spec: PhantomSpec,
    geom: PhantomGeometry,
    meta: np.ndarray,
    meta_raw: dict,
    noise_stream: int = 3,
) -> PhantomInstance:
    lut = _instance_luts(spec)
    drift = _drift_table(spec, len(geom.ellipses))
    support = _support_mask(geom, spec.size)
    noise_rng = _rng(spec.seed, noise_stream)
    images = np.empty((3, 3, spec.size, spec.size))
    for s_idx, offset in enumerate((-1.0, 0.0, 1.0)):
        labels = _label_map(_ellipses_at_offset(geom, drift, offset), spec.size)
        for c in range(3):
            img = _render(labels, lut[:, c], spec.size)
            if spec.noise_sigma > 0:
                img = img + spec.noise_sigma * noise_rng.normal(size=img.shape)
            elif spec.noise_sigma == 0:
                # keep the stream position contrast-independent of sigma
                pass
            images[c, s_idx] = img
    # volume-style scaling: the center slice fixes each contrast's factor
    for c in range(3):
        std = images[c, 1][support].std()
        images[c] /= std
    return PhantomInstance(spec, images, support, meta, meta_raw, geom)


def generate(spec: PhantomSpec) -> PhantomInstance:
    """Three contrasts of one anatomy, plus support mask and metadata."""
    geom = _layout(spec)
    meta, meta_raw = _draw_flair_meta(spec)
    return _render_instance(spec, geom, meta, meta_raw)


def slice_at(spec: PhantomSpec, contrast: int, offset: int) -> np.ndarray:
    """Render one contrast at an arbitrary integer through-plane offset.

    Used to build the long prior stacks the through-plane search needs.
    Matches the emitted neighbor slices at offsets -1/0/+1.
    """
    geom = _layout(spec)
    inst = generate(spec)
    if offset in (-1, 0, 1):
        return inst.images[contrast, offset + 1]
    lut = _instance_luts(spec)
    drift = _drift_table(spec, len(geom.ellipses))
    labels = _label_map(_ellipses_at_offset(geom, drift, float(offset)), spec.size)
    img = _render(labels, lut[:, contrast], spec.size)
    support = _support_mask(geom, spec.size)
    std = inst.images[contrast, 1][support].std()
    # reuse the center-slice scale; noise is not replayed off the emitted grid
    center = _render(_label_map(_ellipses_at_offset(geom, drift, 0.0), spec.size), lut[:, contrast], spec.size)
    return img / center[support].std() * (center[support].std() / std)


def _transform_geometry(
    geom: PhantomGeometry, offset: RigidTransform2D, size: int
) -> PhantomGeometry:
    """Carry a pixel-space rigid transform onto normalized ellipse parameters."""
    half = size / 2.0
    rot = offset.matrix()
    moved = []
    for e in geom.ellipses:
        xy = np.array([e.cx, e.cy]) * half
        nxy = rot @ xy + np.array([offset.dx, offset.dy])
        moved.append(
            Ellipse(
                float(nxy[1] / half),
                float(nxy[0] / half),
                e.ay,
                e.ax,
                e.phi_deg + offset.theta_deg,
                e.tissue,
            )
        )
    return PhantomGeometry(tuple(moved), geom.ventricle_indices, geom.head_axes, geom.brain_scale)


def _dilate_ventricles(geom: PhantomGeometry, change_magnitude: float) -> PhantomGeometry:
    scale = 1.0 + VENTRICLE_DILATION_SPAN * change_magnitude
    ellipses = list(geom.ellipses)
    for i in geom.ventricle_indices:
        e = ellipses[i]
        ellipses[i] = Ellipse(e.cy, e.cx, e.ay * scale, e.ax * scale, e.phi_deg, e.tissue)
    return PhantomGeometry(tuple(ellipses), geom.ventricle_indices, geom.head_axes, geom.brain_scale)


def generate_longitudinal(
    spec: PhantomSpec, offset: RigidTransform2D | None = None
) -> LongitudinalPair:
    """Baseline scan plus a follow-up with dilated ventricles.

    The follow-up is emitted twice: aligned to the baseline frame (for the
    change map) and with a small rigid repositioning offset applied (the
    acquisition frame). Pass ``offset`` explicitly to control repositioning;
    the default draws a seeded offset within 4 degrees / 3 pixels.
    """
    geom1 = _layout(spec)
    meta, meta_raw = _draw_longitudinal_meta(spec)
    first = _render_instance(spec, geom1, meta, meta_raw, noise_stream=3)

    if offset is None:
        orng = _rng(spec.seed, 5)
        offset = RigidTransform2D(
            float(orng.uniform(-4.0, 4.0)),
            float(orng.uniform(-3.0, 3.0)),
            float(orng.uniform(-3.0, 3.0)),
        )

    geom2 = _dilate_ventricles(geom1, spec.change_magnitude)
    second_aligned = _render_instance(spec, geom2, meta, meta_raw, noise_stream=6)
    geom2_moved = _transform_geometry(geom2, offset, spec.size)
    second = _render_instance(spec, geom2_moved, meta, meta_raw, noise_stream=6)
    change_map = np.abs(second_aligned.c1 - first.c1)
    return LongitudinalPair(first, second, second_aligned, offset, change_map)


def simulate_coil_maps(n_coils: int, size: int) -> CoilMaps:
    """Smooth Gaussian-profile complex maps, normalized so sum |s|^2 = 1.

    Coil centers sit on a circle around the image. A single coil normalizes
    to the identity map, which keeps the single-channel path exact.
    """
    if n_coils < 1:
        raise ValueError("need at least one coil")
    coords = np.arange(size) - (size - 1) / 2.0
    ys, xs = coords[:, None], coords[None, :]
    radius = 0.62 * size
    width = 0.55 * size
    mags = np.empty((n_coils, size, size))
    phases = np.empty((n_coils, size, size))
    for c in range(n_coils):
        ang = 2.0 * np.pi * c / n_coils
        cy, cx = radius * np.sin(ang), radius * np.cos(ang)
        d2 = (ys - cy) ** 2 + (xs - cx) ** 2
        mags[c] = np.exp(-d2 / (2.0 * width**2))
        if n_coils > 1:
            ramp = (np.cos(ang) * xs + np.sin(ang) * ys) / size
            phases[c] = 0.8 * ramp + ang
        else:
            phases[c] = 0.0
    norm = np.sqrt((mags**2).sum(axis=0))
    maps = (mags / norm) * np.exp(1j * phases)
    return CoilMaps(n_coils, maps)


def coil_map_gradient_bound(size: int) -> float:
    """Declared smoothness bound: max per-pixel finite difference of any map."""
    return 10.0 / size


# ---------------------------------------------------------------------------
# corpus on disk


def _instance_payload(inst: PhantomInstance) -> dict[str, np.ndarray]:
    return {
        "c1": inst.images[0].astype(np.float32),
        "c2": inst.images[1].astype(np.float32),
        "c3": inst.images[2].astype(np.float32),
        "support": inst.support_mask.astype(np.float32),
        "meta": inst.meta.astype(np.float32),
    }


def _longitudinal_payload(pair: LongitudinalPair) -> dict[str, np.ndarray]:
    return {
        "first_c1": pair.first.images[0].astype(np.float32),
        "second_c1": pair.second.images[0].astype(np.float32),
        "second_aligned_c1": pair.second_aligned.c1.astype(np.float32),
        "support": pair.first.support_mask.astype(np.float32),
        "second_support": pair.second.support_mask.astype(np.float32),
        "change": pair.change_map.astype(np.float32),
        "meta": pair.first.meta.astype(np.float32),
    }


SPLIT_SEED_OFFSETS = {"train": 0, "val": 100_000, "test": 200_000}


def split_seed(base_seed: int, split: str, index: int) -> int:
    return base_seed + SPLIT_SEED_OFFSETS[split] + index


def _spec_for(base: PhantomSpec, split: str, index: int, task: str) -> PhantomSpec:
    seed = split_seed(base.seed, split, index)
    rng = _rng(seed, 7)
    fat = bool(rng.integers(0, 2))
    change = float(rng.uniform(0.0, 1.0)) if task == "longitudinal" else base.change_magnitude
    return replace(base, seed=seed, fat_rim_flag=fat, change_magnitude=change)


def build_corpus(
    n_train: int,
    n_val: int,
    n_test: int,
    base_spec: PhantomSpec,
    root,
    task: str = "flair",
) -> Path:
    """Write a train/val/test corpus with disjoint seed ranges and a manifest."""
    if min(n_train, n_val, n_test) < 1:
        raise ValueError("each split needs at least one instance")
    if task not in ("flair", "longitudinal"):
        raise ValueError(f"unknown task {task!r}")
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    manifest = {
        "task": task,
        "base_spec": {
            "seed": base_spec.seed,
            "size": base_spec.size,
            "n_ellipses": base_spec.n_ellipses,
            "noise_sigma": base_spec.noise_sigma,
        },
        "splits": {},
    }
    for split, count in (("train", n_train), ("val", n_val), ("test", n_test)):
        entries = []
        for i in range(count):
            spec = _spec_for(base_spec, split, i, task)
            if task == "flair":
                payload = _instance_payload(generate(spec))
                extra = {}
            else:
                pair = generate_longitudinal(spec)
                payload = _longitudinal_payload(pair)
                extra = {"offset": json.loads(pair.offset.to_json())}
            inst_id = f"{split}-{i:04d}"
            inst_dir = root / split / inst_id
            inst_dir.mkdir(parents=True, exist_ok=True)
            digest = hashlib.sha256()
            for name in sorted(payload):
                path = inst_dir / f"{name}.prt"
                save_tensor(path, payload[name])
                digest.update(name.encode())
                digest.update(path.read_bytes())
            entry = {
                "id": inst_id,
                "split": split,
                "seed": spec.seed,
                "fat_rim_flag": spec.fat_rim_flag,
                "change_magnitude": spec.change_magnitude,
                "path": str(Path(split) / inst_id),
                "sha256": digest.hexdigest(),
            }
            entry.update(extra)
            entries.append(entry)
        manifest["splits"][split] = entries
    manifest_path = root / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return manifest_path


def load_manifest(root) -> dict:
    return json.loads((Path(root) / "manifest.json").read_text())
