"""Fourier grids, spectral vector/tensor fields, and the shared operators.

Fields live on a periodic box of side ``2*pi*M`` (``M = box_scale``), sampled
on an ``n**3`` lattice.  A coefficient array ``c`` stores the Fourier-series
amplitudes of a real field, ``f(x) = sum_k c(k) exp(i k.x)`` with wavenumbers
``k = j / M`` for signed integer indices ``j`` in FFT layout, so derivatives
are exact multiplications by ``i k`` and Parseval sums need only the box
volume as a prefactor.

Gradient convention is the Jacobian one, ``(grad u)_{jl} = d u_j / d x_l``,
which fixes the signs of the deformation and vorticity tensors.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as _fft

# Symmetric 3x3 tensors keep six components in this fixed order; the weights
# count each off-diagonal entry twice in Frobenius sums.
SYM_COMPONENTS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
SYM_WEIGHTS = np.array([1.0, 1.0, 1.0, 2.0, 2.0, 2.0])
# Antisymmetric tensors keep the strict upper triangle.
ASYM_COMPONENTS = ((0, 1), (0, 2), (1, 2))
ASYM_WEIGHTS = np.array([2.0, 2.0, 2.0])


def fft_workers() -> int:
    """Worker count for FFT calls, capped by the OLDB_THREADS variable (0 = auto)."""
    raw = os.environ.get("OLDB_THREADS", "0")
    try:
        n = int(raw)
    except ValueError:
        n = 0
    auto = os.cpu_count() or 1
    return auto if n <= 0 else min(n, auto)


class GridMismatchError(ValueError):
    """Raised when an operation combines fields living on different grids."""


@dataclass(frozen=True)
class FourierGrid:
    """Truncated Fourier lattice for the periodic box of side ``2*pi*box_scale``.

    Attributes:
        n_per_axis: modes per axis (even, positive).
        box_scale: period divided by ``2*pi``; wavenumbers are multiples of
            ``1/box_scale``.
    """

    n_per_axis: int
    box_scale: float = 16.0

    dimension = 3

    def __post_init__(self):
        if self.n_per_axis <= 0 or self.n_per_axis % 2 != 0:
            raise ValueError(f"n_per_axis must be a positive even integer, got {self.n_per_axis}")
        if not self.box_scale > 0:
            raise ValueError(f"box_scale must be positive, got {self.box_scale}")

    @property
    def period(self) -> float:
        return 2.0 * np.pi * self.box_scale

    @property
    def volume(self) -> float:
        return self.period**3

    @cached_property
    def index_1d(self) -> np.ndarray:
        """Signed integer mode indices in FFT layout: 0..n/2-1, -n/2..-1."""
        n = self.n_per_axis
        return np.fft.fftfreq(n, d=1.0 / n)

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        """Wavenumber components, shape (3, n, n, n)."""
        j = self.index_1d / self.box_scale
        kx, ky, kz = np.meshgrid(j, j, j, indexing="ij")
        return np.stack([kx, ky, kz])

    @cached_property
    def k_squared(self) -> np.ndarray:
        k = self.wavenumbers
        return k[0] ** 2 + k[1] ** 2 + k[2] ** 2

    @cached_property
    def k_mag(self) -> np.ndarray:
        return np.sqrt(self.k_squared)

    @cached_property
    def dealias_mask(self) -> np.ndarray:
        """Two-thirds rule: keep modes with |j_i| < n/3 on every axis."""
        keep_1d = np.abs(self.index_1d) < self.n_per_axis / 3.0
        return (
            keep_1d[:, None, None] & keep_1d[None, :, None] & keep_1d[None, None, :]
        )

    @cached_property
    def wavenumbers_half(self) -> np.ndarray:
        return np.ascontiguousarray(self.wavenumbers[..., : self.n_per_axis // 2 + 1])

    @cached_property
    def dealias_mask_half(self) -> np.ndarray:
        return np.ascontiguousarray(self.dealias_mask[..., : self.n_per_axis // 2 + 1])

    def shape(self, ncomp: int) -> tuple[int, ...]:
        n = self.n_per_axis
        return (ncomp, n, n, n)


@dataclass(frozen=True)
class FluidParams:
    """Physical parameters of the constitutive model.

    omega is the polymer coupling in (0,1), a the slip parameter in [-1,1],
    and reynolds/weissenberg the usual dimensionless numbers (both 1 in the
    regime all rate predictions assume).
    """

    omega: float = 0.5
    a: float = 0.0
    reynolds: float = 1.0
    weissenberg: float = 1.0

    def __post_init__(self):
        if not 0.0 < self.omega < 1.0:
            raise ValueError(f"omega must lie strictly inside (0, 1), got {self.omega}")
        if not -1.0 <= self.a <= 1.0:
            raise ValueError(f"a must lie in [-1, 1], got {self.a}")
        if not self.reynolds > 0:
            raise ValueError(f"reynolds must be positive, got {self.reynolds}")
        if not self.weissenberg > 0:
            raise ValueError(f"weissenberg must be positive, got {self.weissenberg}")


def _validate_coeffs(grid: FourierGrid, coeffs: np.ndarray, ncomp: int) -> np.ndarray:
    coeffs = np.asarray(coeffs, dtype=np.complex128)
    if coeffs.shape != grid.shape(ncomp):
        raise ValueError(f"coefficient array must have shape {grid.shape(ncomp)}, got {coeffs.shape}")
    return coeffs


@dataclass(frozen=True)
class SpectralVectorField:
    """Three complex coefficient components of a real 3-vector field."""

    grid: FourierGrid
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _validate_coeffs(self.grid, self.coeffs, 3))

    @classmethod
    def zeros(cls, grid: FourierGrid) -> "SpectralVectorField":
        return cls(grid, np.zeros(grid.shape(3), dtype=np.complex128))

    def copy(self) -> "SpectralVectorField":
        return SpectralVectorField(self.grid, self.coeffs.copy())


@dataclass(frozen=True)
class SpectralTensorField:
    """Symmetric 3x3 tensor field; six components stored, order 11,22,33,12,13,23."""

    grid: FourierGrid
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _validate_coeffs(self.grid, self.coeffs, 6))

    @classmethod
    def zeros(cls, grid: FourierGrid) -> "SpectralTensorField":
        return cls(grid, np.zeros(grid.shape(6), dtype=np.complex128))

    def copy(self) -> "SpectralTensorField":
        return SpectralTensorField(self.grid, self.coeffs.copy())


@dataclass(frozen=True)
class AntisymmetricTensorField:
    """Antisymmetric 3x3 tensor field; stores the strict upper triangle 12,13,23."""

    grid: FourierGrid
    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _validate_coeffs(self.grid, self.coeffs, 3))


Field = SpectralVectorField | SpectralTensorField | AntisymmetricTensorField


def _require_same_grid(*fields: Field) -> FourierGrid:
    grid = fields[0].grid
    for f in fields[1:]:
        if f.grid != grid:
            raise GridMismatchError("fields live on different grids")
    return grid


def to_physical(coeffs: np.ndarray) -> np.ndarray:
    """Evaluate the Fourier series on the lattice; returns the real samples."""
    return _fft.ifftn(coeffs, axes=(-3, -2, -1), norm="forward", workers=fft_workers()).real


def from_physical(values: np.ndarray) -> np.ndarray:
    """Fourier-series coefficients of real lattice samples."""
    return _fft.fftn(values, axes=(-3, -2, -1), norm="forward", workers=fft_workers())


def half_spectrum(coeffs: np.ndarray) -> np.ndarray:
    """Nonredundant half of a Hermitian spectrum (rfft layout on the last axis)."""
    n = coeffs.shape[-1]
    return coeffs[..., : n // 2 + 1]


def full_from_half(half: np.ndarray, n: int) -> np.ndarray:
    """Rebuild the full Hermitian spectrum from its rfft-layout half."""
    h = n // 2 + 1
    full = np.empty(half.shape[:-1] + (n,), dtype=np.complex128)
    full[..., :h] = half
    tail = half[..., n - h : 0 : -1]  # sources n-j3 for targets j3 = h..n-1
    tail = np.roll(np.flip(tail, axis=(-3, -2)), shift=(1, 1), axis=(-3, -2))
    full[..., h:] = np.conj(tail)
    return full


def to_physical_half(half: np.ndarray, n: int) -> np.ndarray:
    """Physical samples from the half spectrum of a real field."""
    return _fft.irfftn(half, s=(n, n, n), axes=(-3, -2, -1), norm="forward",
                       workers=fft_workers())


def from_physical_half(values: np.ndarray) -> np.ndarray:
    """Half-spectrum coefficients of real lattice samples."""
    return _fft.rfftn(values, axes=(-3, -2, -1), norm="forward", workers=fft_workers())


def hermitianize(coeffs: np.ndarray) -> np.ndarray:
    """Project a coefficient array onto the Hermitian-symmetric subspace."""
    flipped = np.conj(np.roll(coeffs[..., ::-1, ::-1, ::-1], 1, axis=(-3, -2, -1)))
    return 0.5 * (coeffs + flipped)


def hermitian_defect(field: Field) -> float:
    """Max absolute deviation from c(-k) = conj(c(k))."""
    c = field.coeffs
    return float(np.max(np.abs(c - hermitianize(c))))


def divergence_values(u: SpectralVectorField) -> np.ndarray:
    k = u.grid.wavenumbers
    return 1j * (k[0] * u.coeffs[0] + k[1] * u.coeffs[1] + k[2] * u.coeffs[2])


def solenoidal_defect(u: SpectralVectorField) -> float:
    """Relative size of k.u_hat(k), zero for divergence-free fields."""
    dv = np.abs(divergence_values(u))
    scale = np.max(u.grid.k_mag * np.max(np.abs(u.coeffs), axis=0))
    if scale == 0.0:
        return 0.0
    return float(np.max(dv) / scale)


def leray_project(v: SpectralVectorField) -> SpectralVectorField:
    """Project onto divergence-free fields: (delta_jl - k_j k_l / |k|^2) v_l.

    The k = 0 mode has no projector and passes through unchanged, preserving
    the mean flow.
    """
    grid = v.grid
    k = grid.wavenumbers
    k2 = grid.k_squared.copy()
    k2[0, 0, 0] = 1.0  # mean mode passes through
    kv = (k[0] * v.coeffs[0] + k[1] * v.coeffs[1] + k[2] * v.coeffs[2]) / k2
    kv[0, 0, 0] = 0.0
    out = v.coeffs - k * kv[None]
    return SpectralVectorField(grid, out)


def deformation(u: SpectralVectorField) -> SpectralTensorField:
    """Symmetric velocity-gradient part, per mode (i/2)(k_l u_j + k_j u_l)."""
    grid = u.grid
    k = grid.wavenumbers
    c = u.coeffs
    out = np.empty(grid.shape(6), dtype=np.complex128)
    for idx, (j, l) in enumerate(SYM_COMPONENTS):
        out[idx] = 0.5j * (k[l] * c[j] + k[j] * c[l])
    return SpectralTensorField(grid, out)


def vorticity_tensor(u: SpectralVectorField) -> AntisymmetricTensorField:
    """Antisymmetric velocity-gradient part, per mode (i/2)(k_l u_j - k_j u_l)."""
    grid = u.grid
    k = grid.wavenumbers
    c = u.coeffs
    out = np.empty(grid.shape(3), dtype=np.complex128)
    for idx, (j, l) in enumerate(ASYM_COMPONENTS):
        out[idx] = 0.5j * (k[l] * c[j] - k[j] * c[l])
    return AntisymmetricTensorField(grid, out)


def velocity_gradient(u: SpectralVectorField) -> np.ndarray:
    """Full Jacobian coefficients, shape (3, 3, n, n, n): (grad u)_{jl} = i k_l u_j."""
    k = u.grid.wavenumbers
    return 1j * k[None, :] * u.coeffs[:, None]


def sym_to_full(coeffs6: np.ndarray) -> np.ndarray:
    """Expand six symmetric components to the full (3, 3, ...) array."""
    full = np.empty((3, 3) + coeffs6.shape[1:], dtype=coeffs6.dtype)
    for idx, (j, l) in enumerate(SYM_COMPONENTS):
        full[j, l] = coeffs6[idx]
        full[l, j] = coeffs6[idx]
    return full


def asym_to_full(coeffs3: np.ndarray) -> np.ndarray:
    """Expand three antisymmetric components to the full (3, 3, ...) array."""
    full = np.zeros((3, 3) + coeffs3.shape[1:], dtype=coeffs3.dtype)
    for idx, (j, l) in enumerate(ASYM_COMPONENTS):
        full[j, l] = coeffs3[idx]
        full[l, j] = -coeffs3[idx]
    return full


def tensor_divergence(tau: SpectralTensorField) -> SpectralVectorField:
    """Row divergence (div tau)_j = i k_l tau_{lj}."""
    grid = tau.grid
    k = grid.wavenumbers
    full = sym_to_full(tau.coeffs)
    out = np.empty(grid.shape(3), dtype=np.complex128)
    for j in range(3):
        out[j] = 1j * (k[0] * full[0, j] + k[1] * full[1, j] + k[2] * full[2, j])
    return SpectralVectorField(grid, out)


def advect(u: SpectralVectorField, f: Field) -> Field:
    """Pseudo-spectral advection (u . grad) f, dealiased.

    Both fields are transformed to physical space, the pointwise products are
    formed there, and the forward transform is masked by the two-thirds rule,
    so the retained modes carry the exact convolution.
    """
    grid = _require_same_grid(u, f)
    k = grid.wavenumbers
    u_phys = to_physical(u.coeffs)
    c = f.coeffs
    grad = np.empty((c.shape[0], 3) + c.shape[1:], dtype=np.complex128)
    for comp in range(c.shape[0]):
        for l in range(3):
            grad[comp, l] = 1j * k[l] * c[comp]
    grad_phys = to_physical(grad)
    prod = np.einsum("l...,cl...->c...", u_phys, grad_phys)
    out = from_physical(prod) * grid.dealias_mask
    return type(f)(grid, out)


def g_a_term(tau: SpectralTensorField, u: SpectralVectorField, a: float) -> SpectralTensorField:
    """Objective-derivative coupling tau W - W tau - a (D tau + tau D), dealiased.

    The matrix products are evaluated pointwise in physical space; the result
    is symmetric by construction (only the upper triangle is retained).
    """
    grid = _require_same_grid(tau, u)
    d_phys = to_physical(sym_to_full(deformation(u).coeffs))
    w_phys = to_physical(asym_to_full(vorticity_tensor(u).coeffs))
    t_phys = to_physical(sym_to_full(tau.coeffs))
    tw = np.einsum("ab...,bc...->ac...", t_phys, w_phys)
    g = tw - np.einsum("ab...,bc...->ac...", w_phys, t_phys)
    if a != 0.0:
        dt = np.einsum("ab...,bc...->ac...", d_phys, t_phys)
        g -= a * (dt + np.einsum("ab...,bc...->ac...", t_phys, d_phys))
    comps = np.stack([g[j, l] for (j, l) in SYM_COMPONENTS])
    out = from_physical(comps) * grid.dealias_mask
    return SpectralTensorField(grid, out)


def _component_weights(field: Field) -> np.ndarray:
    if isinstance(field, SpectralVectorField):
        return np.ones(3)
    if isinstance(field, SpectralTensorField):
        return SYM_WEIGHTS
    return ASYM_WEIGHTS


def sobolev_seminorm(field: Field, k: int) -> float:
    """Squared homogeneous Sobolev seminorm via Parseval.

    Returns ``vol * sum |k_vec|^(2k) |f_hat|^2`` over all retained modes,
    which equals the physical-space integral of |grad^k f|^2.
    """
    if k not in (0, 1, 2):
        raise ValueError(f"derivative order must be 0, 1 or 2, got {k}")
    grid = field.grid
    w = _component_weights(field)
    mags = np.einsum("c,c...->...", w, np.abs(field.coeffs) ** 2)
    return float(grid.volume * np.sum(grid.k_squared**k * mags))


def l2_inner(a: Field, b: Field) -> float:
    """Real L2 inner product of two fields of the same kind."""
    grid = _require_same_grid(a, b)
    if type(a) is not type(b):
        raise TypeError("inner product requires fields of the same kind")
    w = _component_weights(a)
    s = np.einsum("c,c...->...", w, (np.conj(a.coeffs) * b.coeffs).real)
    return float(grid.volume * np.sum(s))
