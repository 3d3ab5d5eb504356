"""
Spectral grids, Fourier transforms, and the exact free Schrödinger flow.

Conventions
-----------
The continuum transform is  ĝ(ξ) = (2π)^{-n/2} ∫ e^{-ix·ξ} g(x) dx,
discretized on the centered periodic lattice x ∈ dx·{-N/2, …, N/2-1}
with dual lattice ξ ∈ (2π/L)·{-N/2, …, N/2-1}.  With Riemann weights
dxⁿ (physical) and dξⁿ (frequency) the discrete transform is unitary:
the weighted L² norms agree exactly, and F(f∗g) = (2π)^{n/2} F(f)F(g)
holds with the dx-weighted discrete convolution.

The free flow e^{itΔ/2} is the exact multiplier e^{-it|ξ|²/2}; it is an
L² isometry on the grid and composes additively in t.

All field values are stored in centered (ascending-coordinate) order in
both spaces; the fft-layout shuffles are internal.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np
import scipy.fft as sfft
from scipy.signal import czt


def _workers() -> int:
    """FFT worker count, capped by MODSCATTER_THREADS (default 1)."""
    try:
        return max(1, int(os.environ.get("MODSCATTER_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class Grid:
    """Isotropic periodic box [-L/2, L/2)ⁿ sampled on Nⁿ points, N a power of two."""

    dim: int
    points_per_dim: int
    box_length: float

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ValueError(f"dim must be 1, 2 or 3, got {self.dim}")
        n = self.points_per_dim
        if n < 8 or (n & (n - 1)) != 0:
            raise ValueError(f"points_per_dim must be a power of two >= 8, got {n}")
        if not (self.box_length > 0):
            raise ValueError(f"box_length must be positive, got {self.box_length}")

    @property
    def dx(self) -> float:
        return self.box_length / self.points_per_dim

    @property
    def dxi(self) -> float:
        return 2.0 * np.pi / self.box_length

    @property
    def nyquist(self) -> float:
        """Largest resolvable |ξ| component, π/dx."""
        return np.pi / self.dx

    @property
    def shape(self) -> tuple:
        return (self.points_per_dim,) * self.dim

    @property
    def size(self) -> int:
        return self.points_per_dim**self.dim

    @property
    def cell_volume(self) -> float:
        return self.dx**self.dim

    @property
    def freq_cell_volume(self) -> float:
        return self.dxi**self.dim

    def axis(self) -> np.ndarray:
        """Centered spatial coordinates along one dimension."""
        n = self.points_per_dim
        return (np.arange(n) - n // 2) * self.dx

    def freq_axis(self) -> np.ndarray:
        """Centered frequency coordinates along one dimension."""
        n = self.points_per_dim
        return (np.arange(n) - n // 2) * self.dxi

    def meshes(self) -> list:
        return list(np.meshgrid(*([self.axis()] * self.dim), indexing="ij"))

    def freq_meshes(self) -> list:
        return list(np.meshgrid(*([self.freq_axis()] * self.dim), indexing="ij"))

    def radius2(self) -> np.ndarray:
        """|x|² on the centered mesh."""
        ax2 = self.axis() ** 2
        out = ax2
        for _ in range(self.dim - 1):
            out = out[..., None] + ax2
        return out

    def freq_radius2(self) -> np.ndarray:
        """|ξ|² on the centered mesh."""
        ax2 = self.freq_axis() ** 2
        out = ax2
        for _ in range(self.dim - 1):
            out = out[..., None] + ax2
        return out


@dataclass(frozen=True)
class ComplexField:
    """Complex samples on a grid, tagged with a time and the space they live in."""

    grid: Grid
    values: np.ndarray
    time: float
    space: str  # "physical" | "frequency"

    def __post_init__(self):
        if self.space not in ("physical", "frequency"):
            raise ValueError(f"space must be 'physical' or 'frequency', got {self.space!r}")
        v = np.ascontiguousarray(self.values, dtype=np.complex128)
        if v.shape != self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match grid shape {self.grid.shape}")
        if not np.all(np.isfinite(v.view(np.float64))):
            raise ValueError("field contains non-finite values")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    def l2(self) -> float:
        w = self.grid.cell_volume if self.space == "physical" else self.grid.freq_cell_volume
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * w))

    def linf(self) -> float:
        return float(np.max(np.abs(self.values)))


@dataclass(frozen=True)
class NormReport:
    """Norms of a solution/profile pair at one instant."""

    time: float
    l2: float
    linf: float
    hdot_m0: float  # ‖ |∇|^m u ‖₂
    hdot_0m: float  # ‖ |x|^m f ‖₂
    m: int


def _fftn(values, workers=None):
    return sfft.fftn(values, workers=workers or _workers())


def _ifftn(values, workers=None):
    return sfft.ifftn(values, workers=workers or _workers())


def forward_transform(f: ComplexField) -> ComplexField:
    """Scaled DFT realizing ĝ(ξ) = (2π)^{-n/2} Σ_x e^{-ix·ξ} g(x) dxⁿ on the lattice."""
    if f.space != "physical":
        raise ValueError("forward_transform expects a physical-space field")
    g = f.grid
    scale = g.cell_volume * (2.0 * np.pi) ** (-g.dim / 2.0)
    vals = sfft.fftshift(_fftn(sfft.ifftshift(f.values))) * scale
    return ComplexField(g, vals, f.time, "frequency")


def inverse_transform(f: ComplexField) -> ComplexField:
    """Inverse of forward_transform: g(x) = (2π)^{-n/2} Σ_ξ e^{+ix·ξ} ĝ(ξ) dξⁿ."""
    if f.space != "frequency":
        raise ValueError("inverse_transform expects a frequency-space field")
    g = f.grid
    scale = g.size * g.freq_cell_volume * (2.0 * np.pi) ** (-g.dim / 2.0)
    vals = sfft.fftshift(_ifftn(sfft.ifftshift(f.values))) * scale
    return ComplexField(g, vals, f.time, "physical")


def free_propagate(f: ComplexField, t_delta: float) -> ComplexField:
    """Apply the exact linear flow e^{i t_delta Δ/2} (multiplier e^{-i t_delta |ξ|²/2})."""
    if t_delta == 0.0:
        return f
    g = f.grid
    phase = np.exp(-0.5j * t_delta * g.freq_radius2())
    if f.space == "frequency":
        return ComplexField(g, f.values * phase, f.time + t_delta, "frequency")
    fh = forward_transform(f)
    out = ComplexField(g, fh.values * phase, f.time + t_delta, "frequency")
    return inverse_transform(out)


def transform_at(f: ComplexField, targets: list) -> np.ndarray:
    """
    Evaluate the band-limited (trigonometric) interpolant of the forward
    transform at off-lattice frequencies.

    targets is one uniformly spaced 1D array per dimension; the result has
    shape (len(targets[0]), ..., len(targets[dim-1])).  Uses the chirp-z
    transform, so it is O(N log N) per axis and exact for lattice targets.
    """
    if f.space != "physical":
        raise ValueError("transform_at expects a physical-space field")
    g = f.grid
    n = g.points_per_dim
    c = n // 2
    dx = g.dx
    vals = np.asarray(f.values)
    for ax, tgt in enumerate(targets):
        tgt = np.asarray(tgt, dtype=np.float64)
        if tgt.size > 1:
            dxi = (tgt[-1] - tgt[0]) / (tgt.size - 1)
            model = tgt[0] + dxi * np.arange(tgt.size)
            tol = 1e-9 * max(1.0, float(np.max(np.abs(tgt))))
            if np.max(np.abs(tgt - model)) > tol:
                raise ValueError("transform_at targets must be uniformly spaced")
        else:
            dxi = 0.0
        xi0 = tgt[0]
        # S[j] = Σ_k g_k e^{-i (k-c) dx (xi0 + j dxi)}; czt gives Σ_k x_k a^{-k} w^{jk}
        a = np.exp(1j * dx * xi0)
        w = np.exp(-1j * dx * dxi)
        moved = np.moveaxis(vals, ax, -1)
        out = czt(moved, m=tgt.size, w=w, a=a)
        out = out * np.exp(1j * c * dx * tgt)
        vals = np.moveaxis(out, -1, ax)
    return vals * g.cell_volume * (2.0 * np.pi) ** (-g.dim / 2.0)


def free_asymptotic(f: ComplexField, t: float) -> ComplexField:
    """
    Leading-order factorization of the free flow for t >= 1:
        (i t)^{-n/2} e^{i|x|²/(2t)} ĝ(x/t),
    with ĝ(x/t) obtained by band-limited interpolation of the discrete
    transform (zero outside the resolved band).
    """
    if t < 1:
        raise ValueError("free_asymptotic requires t >= 1")
    if f.space != "physical":
        raise ValueError("free_asymptotic expects a physical-space field")
    g = f.grid
    targets = [g.axis() / t] * g.dim
    ghat = transform_at(f, targets)
    mask1d = np.abs(g.axis() / t) <= g.nyquist
    mask = mask1d
    for _ in range(g.dim - 1):
        mask = mask[..., None] & mask1d
    amp = (1j * t) ** (-g.dim / 2.0)
    vals = amp * np.exp(0.5j * g.radius2() / t) * ghat * mask
    return ComplexField(g, vals, f.time + t, "physical")


def lp_norm(f: ComplexField, p: float) -> float:
    """Discrete Lᵖ norm, Riemann sum with weight dxⁿ (max for p = inf)."""
    w = f.grid.cell_volume if f.space == "physical" else f.grid.freq_cell_volume
    a = np.abs(f.values)
    if np.isinf(p):
        return float(a.max())
    return float(np.sum(a**p) * w) ** (1.0 / p)


def dispersive_ratio(f: ComplexField, t: float, p: float) -> float:
    """
    ‖e^{itΔ/2} g‖_p · t^{n(1/2-1/p)} / ‖g‖_{p'}, the constant in the
    dispersive estimate, with p' the conjugate exponent.
    """
    if not t > 0:
        raise ValueError("dispersive_ratio requires t > 0")
    if not (2 <= p or np.isinf(p)):
        raise ValueError("dispersive_ratio requires p in [2, inf]")
    pprime = 1.0 if np.isinf(p) else p / (p - 1.0)
    denom = lp_norm(f, pprime)
    if denom == 0.0:
        raise ValueError("dispersive_ratio requires a nonzero field")
    u = free_propagate(f, t)
    inv_p = 0.0 if np.isinf(p) else 1.0 / p
    return lp_norm(u, p) * t ** (f.grid.dim * (0.5 - inv_p)) / denom


def compute_norms(u: ComplexField, f: ComplexField, m: int) -> NormReport:
    """
    Norm record for a solution u and its profile f (both physical space):
    ‖u‖₂, ‖u‖∞, ‖|∇|^m u‖₂ via the frequency multiplier |ξ|^m, and
    ‖|x|^m f‖₂ via the physical weight.
    """
    if u.grid != f.grid:
        raise ValueError("u and f must share a grid")
    if abs(u.time - f.time) > 1e-9 * max(1.0, abs(u.time)):
        raise ValueError("u and f must share a timestamp")
    if u.space != "physical" or f.space != "physical":
        raise ValueError("compute_norms expects physical-space fields")
    g = u.grid
    uhat = forward_transform(u)
    xi_m = g.freq_radius2() ** (m / 2.0)
    hdot_m0 = float(np.sqrt(np.sum(np.abs(xi_m * uhat.values) ** 2) * g.freq_cell_volume))
    x_m = g.radius2() ** (m / 2.0)
    hdot_0m = float(np.sqrt(np.sum(np.abs(x_m * f.values) ** 2) * g.cell_volume))
    return NormReport(u.time, u.l2(), u.linf(), hdot_m0, hdot_0m, m)


def sobolev_norms(f: ComplexField, m: int) -> tuple:
    """Inhomogeneous pair (‖⟨∇⟩^m g‖₂, ‖⟨x⟩^m g‖₂) for a physical-space field."""
    if f.space != "physical":
        raise ValueError("sobolev_norms expects a physical-space field")
    g = f.grid
    fh = forward_transform(f)
    wm = (1.0 + g.freq_radius2()) ** (m / 2.0)
    h_m0 = float(np.sqrt(np.sum(np.abs(wm * fh.values) ** 2) * g.freq_cell_volume))
    xm = (1.0 + g.radius2()) ** (m / 2.0)
    h_0m = float(np.sqrt(np.sum(np.abs(xm * f.values) ** 2) * g.cell_volume))
    return h_m0, h_0m
