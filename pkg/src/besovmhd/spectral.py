"""Fourier representation of real fields on the periodic box [0, L)^dim.

Fields are plain complex arrays of Fourier coefficients.  A scalar field has
shape ``grid.shape``; a vector field has a leading component axis,
``(dim,) + grid.shape``; gradients of vector fields carry two leading axes.
Every operation broadcasts over leading axes.

Normalization: ``forward`` divides the DFT by ``N**dim``, so the coefficients
are the Fourier-series coefficients ``f(x) = sum_k c_k exp(i xi_k . x)`` and

    ||f||_{L^2}^2 = L^dim * sum_k |c_k|^2.

With ``L = 1`` this coincides with the ``(L/N)^dim``-scaled transform.
Coefficients are stored in numpy FFT index order along each axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft as sfft

DEALIAS_MODES = ("padded", "two_thirds")
LEBESGUE_EXPONENTS = (1.0, 2.0, 3.0, 6.0, np.inf)


class GridMismatch(ValueError):
    pass


class DomainError(ValueError):
    pass


@dataclass(frozen=True)
class FourierGrid:
    dim: int
    N: int
    L: float = 2 * np.pi

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise ValueError(f"dim must be 2 or 3, got {self.dim}")
        if self.N < 8 or self.N % 2:
            raise ValueError(f"N must be even and >= 8, got {self.N}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.N,) * self.dim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.dim, 0))

    @property
    def dx(self) -> float:
        return self.L / self.N

    @property
    def volume(self) -> float:
        return self.L**self.dim

    @property
    def k0(self) -> float:
        """Box frequency 2*pi/L."""
        return 2 * np.pi / self.L

    @cached_property
    def k(self) -> np.ndarray:
        """Integer wavevectors, shape (dim,) + shape, in [-N/2, N/2)."""
        k1 = np.fft.fftfreq(self.N, 1.0 / self.N).astype(np.int64)
        return np.stack(np.meshgrid(*([k1] * self.dim), indexing="ij"))

    @cached_property
    def xi(self) -> np.ndarray:
        return self.k0 * self.k.astype(float)

    @cached_property
    def xi2(self) -> np.ndarray:
        return np.sum(self.xi**2, axis=0)

    @cached_property
    def xi_abs(self) -> np.ndarray:
        return np.sqrt(self.xi2)

    @cached_property
    def nyquist(self) -> np.ndarray:
        return np.any(self.k == -self.N // 2, axis=0)

    @cached_property
    def lattice_mask(self) -> np.ndarray:
        """1.0 on retained modes, 0.0 on Nyquist lines."""
        return (~self.nyquist).astype(float)

    @property
    def xi_max(self) -> float:
        return self.k0 * (self.N / 2) * np.sqrt(self.dim)

    @cached_property
    def x(self) -> np.ndarray:
        """Physical sample coordinates, shape (dim,) + shape."""
        x1 = np.arange(self.N) * self.dx
        return np.stack(np.meshgrid(*([x1] * self.dim), indexing="ij"))

    # ------------------------------------------------------------------
    # transforms

    def check(self, f: np.ndarray) -> None:
        if f.shape[f.ndim - self.dim:] != self.shape:
            raise GridMismatch(f"field shape {f.shape} does not end with {self.shape}")

    def forward(self, samples: np.ndarray) -> np.ndarray:
        """Physical samples -> Fourier coefficients (no Nyquist filtering)."""
        samples = np.asarray(samples)
        self.check(samples)
        return sfft.fftn(samples, axes=self.axes) / self.N**self.dim

    def inverse(self, coeffs: np.ndarray) -> np.ndarray:
        """Fourier coefficients -> real physical samples."""
        self.check(coeffs)
        return sfft.ifftn(coeffs, axes=self.axes).real * self.N**self.dim

    def clean(self, coeffs: np.ndarray) -> np.ndarray:
        """Zero the Nyquist lines and restore exact Hermitian symmetry."""
        self.check(coeffs)
        c = coeffs * self.lattice_mask
        return 0.5 * (c + np.conj(self.reflect(c)))

    def to_spectral(self, samples: np.ndarray) -> np.ndarray:
        return self.clean(self.forward(samples))

    def reflect(self, coeffs: np.ndarray) -> np.ndarray:
        """Return g with g(k) = coeffs(-k)."""
        c = np.flip(coeffs, axis=self.axes)
        return np.roll(c, 1, axis=self.axes)

    def hermitian_defect(self, coeffs: np.ndarray) -> float:
        scale = np.max(np.abs(coeffs))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(coeffs - np.conj(self.reflect(coeffs)))) / scale)

    # ------------------------------------------------------------------
    # linear operators

    def grad(self, f: np.ndarray) -> np.ndarray:
        """Gradient; the new derivative axis is prepended."""
        self.check(f)
        xi = self.xi.reshape((self.dim,) + (1,) * (f.ndim - self.dim) + self.shape)
        return 1j * xi * f[None]

    def div(self, v: np.ndarray) -> np.ndarray:
        self.check(v)
        return np.sum(1j * self.xi * v, axis=0)

    def laplacian(self, f: np.ndarray) -> np.ndarray:
        return -self.xi2 * f

    def fractional_laplacian(self, f: np.ndarray, s: float) -> np.ndarray:
        """Lambda^s: multiplier |xi|^s, zero mode sent to 0."""
        self.check(f)
        if s == 0:
            return f.copy()
        if s < 0:
            zero = f[(...,) + (0,) * self.dim]
            if np.max(np.abs(zero)) > 1e-13 * max(np.max(np.abs(f)), 1e-300):
                raise DomainError("Lambda^s with s < 0 needs a zero-mean field")
        mult = np.zeros(self.shape)
        nz = self.xi2 > 0
        mult[nz] = self.xi_abs[nz] ** s
        return mult * f

    def leray(self, v: np.ndarray) -> np.ndarray:
        """Project onto divergence-free fields: v - xi (xi.v)/|xi|^2."""
        self.check(v)
        inv = np.zeros(self.shape)
        nz = self.xi2 > 0
        inv[nz] = 1.0 / self.xi2[nz]
        xv = np.sum(self.xi * v, axis=0)
        return v - self.xi * (xv * inv)

    def truncate(self, f: np.ndarray, R: float | None) -> np.ndarray:
        """Sharp Fourier truncation S_R onto |xi| <= R (None: identity)."""
        self.check(f)
        if R is None or R >= self.xi_max:
            return f.copy()
        if not R > 0:
            raise ValueError(f"R must be positive, got {R}")
        return np.where(self.xi_abs <= R, f, 0.0)

    def ball_mask(self, R: float | None) -> np.ndarray:
        if R is None:
            return np.ones(self.shape, dtype=bool)
        return self.xi_abs <= R

    def divergence_defect(self, v: np.ndarray) -> float:
        scale = np.max(np.abs(v))
        if scale == 0:
            return 0.0
        return float(np.max(np.abs(np.sum(self.xi * v, axis=0))) / scale)

    # ------------------------------------------------------------------
    # quadratic products

    @property
    def M(self) -> int:
        """Padded size per axis for alias-free quadratic products."""
        return 3 * self.N // 2

    @cached_property
    def _pad_slots(self) -> tuple:
        """Index maps between the N lattice and the half spectrum of the 3N/2 grid."""
        k1 = np.fft.fftfreq(self.N, 1.0 / self.N).astype(np.int64)
        half = np.arange(self.N // 2)
        head = [k1 % self.M] * (self.dim - 1)
        pos = np.ix_(*(head + [half]))
        neg_head = [(-k1) % self.M] * (self.dim - 1)
        neg = np.ix_(*(neg_head + [self.N - np.arange(self.N // 2 + 1, self.N)]))
        return pos, neg

    @cached_property
    def two_thirds_mask(self) -> np.ndarray:
        return np.all(np.abs(self.k) < self.N / 3, axis=0).astype(float)

    def to_padded(self, coeffs: np.ndarray) -> np.ndarray:
        """Physical samples of the field on the 3N/2 grid.

        The input must be Hermitian; the Nyquist lines are ignored.
        """
        self.check(coeffs)
        pos, _ = self._pad_slots
        lead = coeffs.shape[: coeffs.ndim - self.dim]
        half = (self.M,) * (self.dim - 1) + (self.M // 2 + 1,)
        padded = np.zeros(lead + half, dtype=complex)
        padded[(Ellipsis,) + pos] = (coeffs * self.lattice_mask)[..., : self.N // 2]
        return sfft.irfftn(padded, s=(self.M,) * self.dim, axes=self.axes,
                           overwrite_x=True) * self.M**self.dim

    def from_padded(self, samples: np.ndarray) -> np.ndarray:
        """Lattice coefficients (Nyquist-free) of a real field sampled on the 3N/2 grid."""
        pos, neg = self._pad_slots
        full = sfft.rfftn(samples, axes=self.axes) / self.M**self.dim
        lead = samples.shape[: samples.ndim - self.dim]
        out = np.zeros(lead + self.shape, dtype=complex)
        out[..., : self.N // 2] = full[(Ellipsis,) + pos]
        out[..., self.N // 2 + 1:] = np.conj(full[(Ellipsis,) + neg])
        return out * self.lattice_mask

    def product(self, a: np.ndarray, b: np.ndarray, dealias: str = "padded") -> np.ndarray:
        """Lattice projection of the pointwise product a*b.

        ``padded`` is exact (equal to the truncated convolution sum);
        ``two_thirds`` filters both factors and the result with the 2/3 mask.
        """
        self.check(a)
        self.check(b)
        if dealias == "padded":
            return self.from_padded(self.to_padded(a) * self.to_padded(b))
        if dealias == "two_thirds":
            m = self.two_thirds_mask
            pa = self.inverse(a * m)
            pb = self.inverse(b * m)
            return self.forward(pa * pb) * m
        raise ValueError(f"unknown dealias mode {dealias!r}")

    def advect(self, u: np.ndarray, v: np.ndarray, dealias: str = "padded") -> np.ndarray:
        """(u . grad) v for a vector field u and a scalar or vector field v."""
        self.check(u)
        self.check(v)
        if u.shape[0] != self.dim or u.ndim != self.dim + 1:
            raise GridMismatch(f"advecting field must have shape {(self.dim,) + self.shape}")
        g = self.grad(v)
        if dealias == "two_thirds":
            m = self.two_thirds_mask
            up = self.inverse(u * m)
            gp = self.inverse(g * m)
        elif dealias == "padded":
            up = self.to_padded(u)
            gp = self.to_padded(g)
        else:
            raise ValueError(f"unknown dealias mode {dealias!r}")
        up = up.reshape(up.shape[:1] + (1,) * (v.ndim - self.dim) + up.shape[1:])
        prod = np.sum(up * gp, axis=0)
        if dealias == "two_thirds":
            return self.forward(prod) * self.two_thirds_mask
        return self.from_padded(prod)

    # ------------------------------------------------------------------
    # norms and pairings

    def inner(self, f: np.ndarray, g: np.ndarray) -> float:
        """Real L^2 pairing summed over all leading components."""
        return float(self.volume * np.sum((np.conj(f) * g).real))

    def l2_norm(self, f: np.ndarray) -> float:
        return float(np.sqrt(self.volume * np.sum(np.abs(f) ** 2)))

    def mean(self, f: np.ndarray) -> np.ndarray:
        return f[(...,) + (0,) * self.dim]

    def zero_mean(self, f: np.ndarray) -> np.ndarray:
        g = f.copy()
        g[(...,) + (0,) * self.dim] = 0.0
        return g

    def sobolev_norm(self, f: np.ndarray, s: float, homogeneous: bool = True) -> float:
        """H^s norm from the Parseval side.

        Homogeneous norms ignore the zero mode; inhomogeneous norms use the
        weight (1 + |xi|^2)^s.
        """
        self.check(f)
        energy = np.sum(np.abs(f) ** 2, axis=tuple(range(f.ndim - self.dim)))
        if homogeneous:
            nz = self.xi2 > 0
            w = self.xi2[nz] ** s
            total = np.sum(w * energy[nz])
        else:
            total = np.sum((1.0 + self.xi2) ** s * energy)
        return float(np.sqrt(self.volume * total))

    def lp_norm(self, f: np.ndarray, p: float, oversample: int = 1) -> float:
        """Physical-space L^p norm by grid quadrature.

        Vector fields use the pointwise Euclidean magnitude.  With
        ``oversample > 1`` the band-limited field is evaluated on a finer grid
        before the quadrature; p = inf is the max over samples.
        """
        self.check(f)
        p = float(p)
        if p not in LEBESGUE_EXPONENTS:
            raise ValueError(f"p must be one of {LEBESGUE_EXPONENTS}, got {p}")
        if oversample == 1:
            samples = self.inverse(f)
            npts = self.N
        else:
            npts = oversample * self.N
            samples = _resample(self, f, npts)
        lead = tuple(range(samples.ndim - self.dim))
        mag = np.sqrt(np.sum(samples**2, axis=lead)) if lead else np.abs(samples)
        if p == np.inf:
            return float(np.max(mag))
        cell = (self.L / npts) ** self.dim
        return float((np.sum(mag**p) * cell) ** (1.0 / p))


def _resample(grid: FourierGrid, coeffs: np.ndarray, npts: int) -> np.ndarray:
    k1 = np.fft.fftfreq(grid.N, 1.0 / grid.N).astype(np.int64)
    index = np.ix_(*([k1 % npts] * grid.dim))
    lead = coeffs.shape[: coeffs.ndim - grid.dim]
    big = np.zeros(lead + (npts,) * grid.dim, dtype=complex)
    big[(Ellipsis,) + index] = coeffs
    return sfft.ifftn(big, axes=grid.axes).real * npts**grid.dim


def transform_forward(grid: FourierGrid, samples: np.ndarray) -> np.ndarray:
    return grid.forward(samples)


def transform_inverse(grid: FourierGrid, coeffs: np.ndarray) -> np.ndarray:
    return grid.inverse(coeffs)


def random_field(
    grid: FourierGrid,
    alpha: float,
    rng: np.random.Generator,
    components: int | None = None,
    cutoff: float | None = None,
    solenoidal: bool = True,
) -> np.ndarray:
    """Zero-mean random field with |c(xi)| proportional to |xi|^(-alpha).

    Phases are uniform; the result is real, Nyquist-free and (for vector
    fields, unless ``solenoidal=False``) divergence-free.  Unnormalized.
    """
    ncomp = grid.dim if components is None else components
    shape = ((ncomp,) if ncomp else ()) + grid.shape
    phases = rng.uniform(0.0, 2 * np.pi, size=shape)
    amp = np.zeros(grid.shape)
    nz = grid.xi2 > 0
    amp[nz] = grid.xi_abs[nz] ** (-alpha)
    if cutoff is not None:
        amp[grid.xi_abs > cutoff] = 0.0
    c = grid.clean(amp * np.exp(1j * phases))
    if ncomp == grid.dim and solenoidal:
        c = grid.leray(c)
    return grid.zero_mean(c)
