"""Centered Fourier operators, Cartesian line undersampling, and coil combination.

Conventions fixed here and relied on everywhere else:

* images are 2D complex arrays; axis 0 (rows) is the phase-encode axis that
  gets undersampled, axis 1 is always fully sampled,
* the transform pair is centered (zero frequency at ``H//2, W//2``) and
  orthonormal, so the adjoint of the masked forward operator is its
  pseudo-inverse on the sampled subspace,
* unsampled k-space entries are stored as exact zeros.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def as_complex_image(img) -> np.ndarray:
    """Validate and return ``img`` as a 2D complex128 array."""
    arr = np.asarray(img, dtype=np.complex128)
    if arr.ndim != 2:
        raise ValueError(f"expected a 2D image, got shape {arr.shape}")
    h, w = arr.shape
    if h < 4 or w < 4 or h % 2 or w % 2:
        raise ValueError(f"image dims must be even and >= 4, got {h}x{w}")
    return arr


@dataclass(frozen=True)
class CartesianMask:
    """Boolean selection over phase-encode lines (image rows)."""

    line_count: int
    selected: np.ndarray
    acceleration: int

    def __post_init__(self):
        sel = np.asarray(self.selected, dtype=bool)
        object.__setattr__(self, "selected", sel)
        if sel.shape != (self.line_count,):
            raise ValueError("selected vector length must equal line_count")
        if self.acceleration < 1:
            raise ValueError("acceleration must be >= 1")
        budget = self.line_count // self.acceleration
        if int(sel.sum()) != budget:
            raise ValueError(
                f"mask holds {int(sel.sum())} lines, budget is exactly {budget}"
            )

    @property
    def n_selected(self) -> int:
        return int(self.selected.sum())

    def line_indices(self) -> np.ndarray:
        return np.flatnonzero(self.selected)


def full_mask(line_count: int) -> CartesianMask:
    """R=1 mask selecting every line."""
    return CartesianMask(line_count, np.ones(line_count, dtype=bool), 1)


@dataclass(frozen=True)
class KSpaceData:
    """Measured k-space with its acquisition mask; unsampled rows are zero."""

    data: np.ndarray
    mask: CartesianMask

    def __post_init__(self):
        arr = as_complex_image(self.data)
        if arr.shape[0] != self.mask.line_count:
            raise ValueError("mask line_count must match k-space rows")
        if np.any(arr[~self.mask.selected] != 0):
            raise ValueError("unsampled k-space lines must be exactly zero")
        object.__setattr__(self, "data", arr)

    @property
    def shape(self):
        return self.data.shape


@dataclass(frozen=True)
class CoilMaps:
    """Complex sensitivity maps, normalized so sum_c |s_c|^2 = 1 pixelwise."""

    n_coils: int
    maps: np.ndarray  # (n_coils, H, W) complex

    def __post_init__(self):
        arr = np.asarray(self.maps, dtype=np.complex128)
        if arr.ndim != 3 or arr.shape[0] != self.n_coils:
            raise ValueError("maps must be (n_coils, H, W)")
        object.__setattr__(self, "maps", arr)


def fft2c(img) -> np.ndarray:
    """Centered orthonormal 2D FFT (image -> k-space)."""
    arr = as_complex_image(img)
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(arr), norm="ortho"))


def ifft2c(ksp) -> np.ndarray:
    """Centered orthonormal 2D inverse FFT (k-space -> image)."""
    arr = as_complex_image(ksp)
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(arr), norm="ortho"))


def apply_forward(img, mask: CartesianMask) -> KSpaceData:
    """Measure ``img``: y = M F x, with unselected lines exactly zero."""
    arr = as_complex_image(img)
    if arr.shape[0] != mask.line_count:
        raise ValueError(
            f"mask has {mask.line_count} lines but image has {arr.shape[0]} rows"
        )
    ksp = fft2c(arr)
    ksp[~mask.selected, :] = 0.0
    return KSpaceData(ksp, mask)


def adjoint(y: KSpaceData) -> np.ndarray:
    """Zero-filled reconstruction x = F^H M^T y."""
    return ifft2c(y.data)


def data_consistency(x_hat, y: KSpaceData) -> np.ndarray:
    """Project ``x_hat`` onto the set of images agreeing with the measurements.

    In k-space the result equals ``y`` on selected lines and ``F x_hat`` on
    the rest; the projection is idempotent.
    """
    arr = as_complex_image(x_hat)
    if arr.shape != y.shape:
        raise ValueError(f"shape mismatch {arr.shape} vs {y.shape}")
    ksp = fft2c(arr)
    ksp[y.mask.selected, :] = y.data[y.mask.selected, :]
    return ifft2c(ksp)


def simulate_coil_kspace(img, maps: CoilMaps, mask: CartesianMask) -> list[KSpaceData]:
    """Forward-simulate per-coil measurements y_c = M F (s_c * x)."""
    arr = as_complex_image(img)
    return [apply_forward(arr * maps.maps[c], mask) for c in range(maps.n_coils)]


def simulate_and_combine(coil_kspaces, maps: CoilMaps) -> np.ndarray:
    """Sensitivity-weighted combination of per-coil zero-filled images.

    Returns sum_c conj(s_c) * F^H y_c. With normalized maps and a full mask
    this recovers the underlying image exactly.
    """
    if len(coil_kspaces) != maps.n_coils:
        raise ValueError(
            f"got {len(coil_kspaces)} coil k-spaces for {maps.n_coils} maps"
        )
    ref_mask = coil_kspaces[0].mask
    for y in coil_kspaces[1:]:
        if y.mask.selected.shape != ref_mask.selected.shape or np.any(
            y.mask.selected != ref_mask.selected
        ):
            raise ValueError("all coil k-spaces must share one mask")
    combined = np.zeros(coil_kspaces[0].shape, dtype=np.complex128)
    for c, y in enumerate(coil_kspaces):
        combined += np.conj(maps.maps[c]) * ifft2c(y.data)
    return combined
