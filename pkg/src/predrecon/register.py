"""Rigid alignment of a prior image to the acquisition frame.

The transform convention used repo-wide: rotate by ``theta_deg``
(counter-clockwise in (x=col, y=row) coordinates) about the image center,
then translate by ``(dx, dy)`` pixels. ``apply_rigid`` resamples with
bilinear interpolation and zero fill; ``estimate_rigid`` recovers the
transform by normalized cross-correlation over a coarse grid followed by
golden-section refinement.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .kspace import KSpaceData, adjoint


@dataclass(frozen=True)
class RigidTransform2D:
    theta_deg: float
    dx: float
    dy: float

    def matrix(self) -> np.ndarray:
        t = math.radians(self.theta_deg)
        return np.array([[math.cos(t), -math.sin(t)], [math.sin(t), math.cos(t)]])

    def apply_points(self, xy: np.ndarray, center: np.ndarray) -> np.ndarray:
        """Map (N, 2) points (x, y) through rotate-about-center then translate."""
        rot = self.matrix()
        return (xy - center) @ rot.T + center + np.array([self.dx, self.dy])

    def inverse(self) -> "RigidTransform2D":
        rot_inv = self.matrix().T
        tx, ty = -rot_inv @ np.array([self.dx, self.dy])
        return RigidTransform2D(-self.theta_deg, float(tx), float(ty))

    def compose(self, other: "RigidTransform2D") -> "RigidTransform2D":
        """Transform equivalent to applying ``other`` first, then ``self``."""
        rot = self.matrix()
        tx, ty = rot @ np.array([other.dx, other.dy]) + np.array([self.dx, self.dy])
        return RigidTransform2D(self.theta_deg + other.theta_deg, float(tx), float(ty))

    def is_identity(self, tol: float = 0.0) -> bool:
        return (
            abs(self.theta_deg) <= tol and abs(self.dx) <= tol and abs(self.dy) <= tol
        )

    def to_json(self) -> str:
        return json.dumps(
            {"theta_deg": self.theta_deg, "dx_px": self.dx, "dy_px": self.dy}
        )

    @staticmethod
    def from_json(text: str) -> "RigidTransform2D":
        d = json.loads(text)
        return RigidTransform2D(d["theta_deg"], d["dx_px"], d["dy_px"])


IDENTITY = RigidTransform2D(0.0, 0.0, 0.0)


def apply_rigid(img, transform: RigidTransform2D) -> np.ndarray:
    """Resample ``img`` under the transform (bilinear, zero outside).

    The identity transform returns the input bit-identically.
    """
    arr = np.asarray(img, dtype=float)
    if arr.ndim != 2:
        raise ValueError("apply_rigid expects a 2D image")
    if not all(map(math.isfinite, (transform.theta_deg, transform.dx, transform.dy))):
        raise ValueError("transform parameters must be finite")
    if transform.is_identity():
        return arr.copy()
    h, w = arr.shape
    center = np.array([(w - 1) / 2.0, (h - 1) / 2.0])
    cols, rows = np.meshgrid(np.arange(w), np.arange(h))
    pts = np.stack([cols.ravel(), rows.ravel()], axis=1).astype(float)
    src = transform.inverse().apply_points(pts, center)
    coords = np.stack([src[:, 1].reshape(h, w), src[:, 0].reshape(h, w)])
    return ndimage.map_coordinates(arr, coords, order=1, mode="constant", cval=0.0)


def ncc(a, b) -> float:
    """Normalized cross-correlation of two equal-shape images."""
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    a = a - a.mean()
    b = b - b.mean()
    denom = np.linalg.norm(a) * np.linalg.norm(b)
    if denom == 0:
        raise ValueError("NCC undefined for constant images")
    return float(np.dot(a, b) / denom)


def light_recon(y: KSpaceData, net=None) -> np.ndarray:
    """Registration target from undersampled data.

    With a trained light net: one feed-forward pass on the zero-filled
    reconstruction. Without one: the zero-filled reconstruction itself.
    """
    zf = adjoint(y)
    if net is None:
        return zf
    from .netcore import forward

    stack = np.stack([zf.real, zf.imag])[None]
    out = forward(net, stack)[0]
    return out[0] + 1j * out[1]


def _golden_max(f, lo, hi, tol, max_iter=40):
    """Golden-section maximization of a unimodal-ish 1D function."""
    invphi = (math.sqrt(5.0) - 1) / 2
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a < tol:
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    return (c, fc) if fc > fd else (d, fd)


def _shift_scores(rotated: np.ndarray, fixed: np.ndarray, max_shift: int):
    """Overlap-normalized correlation of integer shifts via FFT, both signs.

    Returns a (2*max_shift+1, 2*max_shift+1) score grid indexed by
    (dy + max_shift, dx + max_shift).
    """
    h, w = fixed.shape
    ph, pw = h + 2 * max_shift, w + 2 * max_shift
    f = fixed - fixed.mean()
    g = rotated - rotated.mean()
    fpad = np.zeros((ph, pw))
    fpad[max_shift : max_shift + h, max_shift : max_shift + w] = f
    big_f = np.fft.rfft2(fpad)
    big_g = np.fft.rfft2(g, s=(ph, pw))
    corr = np.fft.irfft2(big_f * np.conj(big_g), s=(ph, pw))
    # energy of the shifted prior inside the frame, for normalization
    ones = np.zeros((ph, pw))
    ones[max_shift : max_shift + h, max_shift : max_shift + w] = 1.0
    big_m = np.fft.rfft2(ones)
    g2 = np.fft.irfft2(big_m * np.conj(np.fft.rfft2(g * g, s=(ph, pw))), s=(ph, pw))
    norm = np.sqrt(np.maximum(g2, 1e-12)) * (np.linalg.norm(f) + 1e-12)
    scores = corr / norm
    # shift (dy, dx) of the prior lands at padded lag (dy + max_shift, dx + max_shift)
    return scores[: 2 * max_shift + 1, : 2 * max_shift + 1]


def estimate_rigid(
    moving,
    fixed,
    theta_range: float = 10.0,
    shift_frac: float = 0.10,
    coarse_theta_step: float = 1.0,
    refine_tol: float = 0.02,
) -> RigidTransform2D:
    """Estimate the rigid transform T maximizing NCC(apply_rigid(moving, T), fixed).

    Searches theta in [-theta_range, theta_range] degrees and translations
    within ``shift_frac`` of each dimension: a coarse 1 degree / 1 pixel
    grid scored by FFT correlation, then golden-section refinement of each
    parameter in turn on the direct NCC objective.
    """
    mov = np.asarray(moving, dtype=float)
    fix = np.asarray(fixed, dtype=float)
    if mov.shape != fix.shape:
        raise ValueError("moving and fixed must share a shape")
    if np.ptp(mov) == 0 or np.ptp(fix) == 0:
        raise ValueError("cannot register constant images")
    h, w = fix.shape
    max_shift = max(1, int(round(shift_frac * max(h, w))))

    best = (-2.0, 0.0, 0, 0)
    thetas = np.arange(-theta_range, theta_range + 1e-9, coarse_theta_step)
    for theta in thetas:
        rotated = apply_rigid(mov, RigidTransform2D(float(theta), 0.0, 0.0))
        grid = _shift_scores(rotated, fix, max_shift)
        idx = int(np.argmax(grid))
        dy, dx = divmod(idx, grid.shape[1])
        score = grid[dy, dx]
        if score > best[0]:
            best = (score, float(theta), dx - max_shift, dy - max_shift)

    _, theta0, dx0, dy0 = best
    params = [theta0, float(dx0), float(dy0)]

    def objective(p):
        resampled = apply_rigid(mov, RigidTransform2D(p[0], p[1], p[2]))
        if np.ptp(resampled) == 0:
            return -2.0
        return ncc(resampled, fix)

    spans = [1.5 * coarse_theta_step, 1.5, 1.5]
    for _ in range(3):
        for i in range(3):
            lo = params[i] - spans[i]
            hi = params[i] + spans[i]
            if i == 0:
                lo, hi = max(lo, -theta_range), min(hi, theta_range)
            else:
                bound = shift_frac * (w if i == 1 else h)
                lo, hi = max(lo, -bound), min(hi, bound)

            def f1(v, i=i):
                q = list(params)
                q[i] = v
                return objective(q)

            params[i], _ = _golden_max(f1, lo, hi, refine_tol)
        spans = [s * 0.5 for s in spans]
    return RigidTransform2D(params[0], params[1], params[2])


def z_align(prior_stack, target, max_shift: int = 5) -> int:
    """Through-plane search: the integer slice shift in [-max_shift, max_shift]
    whose prior slice correlates best with ``target``.

    ``prior_stack`` holds 2*k+1 slices centered on the nominal index with
    k >= max_shift. Ties break toward the smaller |shift| (negative first).
    """
    stack = np.asarray(prior_stack, dtype=float)
    if stack.ndim != 3:
        raise ValueError("prior stack must be (slices, H, W)")
    n = stack.shape[0]
    if n % 2 == 0 or n < 2 * max_shift + 1:
        raise ValueError(
            f"need an odd stack of >= {2 * max_shift + 1} slices, got {n}"
        )
    center = n // 2
    tgt = np.asarray(target, dtype=float)
    best_shift, best_score = 0, -np.inf
    order = [0]
    for k in range(1, max_shift + 1):
        order.extend([-k, k])
    for shift in order:
        score = ncc(stack[center + shift], tgt)
        if score > best_score:
            best_shift, best_score = shift, score
    return best_shift
