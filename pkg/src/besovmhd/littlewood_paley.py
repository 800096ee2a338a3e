"""Dyadic partition of unity on the Fourier lattice and Besov norms.

The cut-off is built from the exponential smooth step

    a(t) = exp(-1/t) (t > 0),   s(t) = a(t) / (a(t) + a(1 - t)),
    chi(xi) = 1 - s((|xi| - 3/4) / (4/3 - 3/4)),
    phi_j(xi) = chi(2^{-j-1} xi) - chi(2^{-j} xi).

chi is exactly 1 on |xi| <= 3/4 and exactly 0 on |xi| >= 4/3, so every
phi_j vanishes identically outside 2^j [3/4, 8/3].
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .spectral import FourierGrid, LEBESGUE_EXPONENTS

SUMMATION_EXPONENTS = (1.0, 2.0, np.inf)
CHI_INNER = 0.75
CHI_OUTER = 4.0 / 3.0


def smooth_step(t: np.ndarray) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.where(t > 0, t, 1.0)), 0.0)
        tb = 1.0 - t
        b = np.where(tb > 0, np.exp(-1.0 / np.where(tb > 0, tb, 1.0)), 0.0)
    return a / (a + b)


def chi_profile(r: np.ndarray) -> np.ndarray:
    """Radial low-frequency cut-off evaluated at |xi| = r."""
    t = (np.asarray(r, dtype=float) - CHI_INNER) / (CHI_OUTER - CHI_INNER)
    return np.clip(1.0 - smooth_step(t), 0.0, 1.0)


def phi_profile(r: np.ndarray, j: int = 0) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    return chi_profile(r * 2.0 ** (-j - 1)) - chi_profile(r * 2.0 ** (-j))


@dataclass(frozen=True)
class BesovIndex:
    s: float
    p: float = 2.0
    r: float = 1.0
    homogeneous: bool = True

    def __post_init__(self):
        if float(self.p) not in LEBESGUE_EXPONENTS:
            raise ValueError(f"p must be one of {LEBESGUE_EXPONENTS}, got {self.p}")
        if float(self.r) not in SUMMATION_EXPONENTS:
            raise ValueError(f"r must be one of {SUMMATION_EXPONENTS}, got {self.r}")

    def label(self) -> str:
        dot = "dot" if self.homogeneous else ""
        return f"B{dot}^{self.s:g}_{{{self.p:g},{self.r:g}}}"


class DyadicPartition:
    """Sampled chi and phi_j on one grid; immutable after construction."""

    def __init__(self, grid: FourierGrid):
        self.grid = grid
        rad = grid.xi_abs
        nonzero = rad[grid.xi2 > 0]
        rmin, rmax = float(nonzero.min()), float(nonzero.max())
        # phi_j is nonzero somewhere on the lattice iff some |xi| lies
        # strictly inside 2^j (3/4, 8/3)
        j = int(np.floor(np.log2(rmin / (8.0 / 3.0)))) - 1
        while not np.any((nonzero > 2.0**j * 0.75) & (nonzero < 2.0**j * 8.0 / 3.0)):
            j += 1
        self.jmin = j
        j = int(np.ceil(np.log2(rmax / 0.75))) + 1
        while not np.any((nonzero > 2.0**j * 0.75) & (nonzero < 2.0**j * 8.0 / 3.0)):
            j -= 1
        self.jmax = j
        self.chi = chi_profile(rad)
        self.phi = np.stack([phi_profile(rad, jj) for jj in self.js])
        for arr in (self.chi, self.phi):
            arr.setflags(write=False)
        self._rmin, self._rmax = rmin, rmax

    @property
    def js(self) -> range:
        return range(self.jmin, self.jmax + 1)

    @property
    def nblocks(self) -> int:
        return self.jmax - self.jmin + 1

    @property
    def inhom_js(self) -> range:
        return range(-1, max(self.jmax, -1) + 1)

    @cached_property
    def inhom_stack(self) -> np.ndarray:
        """Multipliers of Delta_j for j = -1 .. max(jmax, -1)."""
        rows = [self.chi]
        for j in self.inhom_js[1:]:
            rows.append(phi_profile(self.grid.xi_abs, j))
        out = np.stack(rows)
        out.setflags(write=False)
        return out

    @cached_property
    def cutoff_stack(self) -> np.ndarray:
        """Row i is the multiplier of S_dot_{jmin+i}: sum of phi_{j'} for j' < jmin + i."""
        out = np.zeros((self.nblocks + 1,) + self.grid.shape)
        np.cumsum(self.phi, axis=0, out=out[1:])
        out.setflags(write=False)
        return out

    @cached_property
    def _phi_sq_flat(self) -> np.ndarray:
        return (self.phi**2).reshape(self.nblocks, -1)

    def phi_j(self, j: int) -> np.ndarray:
        if self.jmin <= j <= self.jmax:
            return self.phi[j - self.jmin]
        return np.zeros(self.grid.shape)

    def cutoff_multiplier(self, j: int) -> np.ndarray:
        """Multiplier of S_dot_j on the zero-mean part."""
        i = min(max(j - self.jmin, 0), self.nblocks)
        return self.cutoff_stack[i]

    def inhom_multiplier(self, j: int) -> np.ndarray:
        if j < -1 or j > self.inhom_js[-1]:
            return np.zeros(self.grid.shape)
        return self.inhom_stack[j + 1]

    # ------------------------------------------------------------------
    # partition diagnostics

    def identity_defects(self) -> dict[str, float]:
        """Max pointwise errors of the partition identities on the lattice."""
        nz = self.grid.xi2 > 0
        inhom = self.chi + np.sum(self.phi[[j - self.jmin for j in self.js if j >= 0]], axis=0)
        hom = np.sum(self.phi, axis=0)
        sq = np.sum(self.phi**2, axis=0)[nz]
        sq_inhom = (self.chi**2 + np.sum(self.phi[[j - self.jmin for j in self.js if j >= 0]] ** 2, axis=0))
        return {
            "inhomogeneous_sum": float(np.max(np.abs(inhom - 1.0))),
            "homogeneous_sum": float(np.max(np.abs(hom[nz] - 1.0))),
            "square_sum_min": float(np.min(sq)),
            "square_sum_max": float(np.max(sq)),
            "inhom_square_sum_min": float(np.min(sq_inhom)),
            "inhom_square_sum_max": float(np.max(sq_inhom)),
            "chi_at_zero": float(self.chi[(0,) * self.grid.dim]),
            "phi_at_zero": float(np.max(np.abs(self.phi[(slice(None),) + (0,) * self.grid.dim]))),
        }

    def support_violations(self) -> int:
        """Count lattice points where phi_j is nonzero outside 2^j [3/4, 8/3]."""
        rad = self.grid.xi_abs
        bad = 0
        for j, row in zip(self.js, self.phi):
            outside = (rad < 2.0**j * 0.75) | (rad > 2.0**j * 8.0 / 3.0)
            bad += int(np.count_nonzero(row[outside]))
        return bad

    def overlap_violations(self) -> int:
        """Count lattice points where phi_j phi_j' != 0 with |j - j'| >= 2."""
        bad = 0
        for a in range(self.nblocks):
            for b in range(a + 2, self.nblocks):
                bad += int(np.count_nonzero(self.phi[a] * self.phi[b]))
        return bad

    # ------------------------------------------------------------------
    # block operators

    def blocks(self, f: np.ndarray) -> np.ndarray:
        """Stack of Delta_dot_j f for j in js (leading axis)."""
        self.grid.check(f)
        extra = (1,) * (f.ndim - self.grid.dim)
        phi = self.phi.reshape((self.nblocks,) + extra + self.grid.shape)
        return phi * f[None]

    def cutoffs(self, f: np.ndarray, include_mean: bool = False) -> np.ndarray:
        """Stack of S_dot_{j-1} f for j in js."""
        self.grid.check(f)
        extra = (1,) * (f.ndim - self.grid.dim)
        mult = self.cutoff_stack[: self.nblocks]
        # S_dot_{j-1} = sum over j' <= j - 2
        mult = np.concatenate([np.zeros((1,) + self.grid.shape), mult[:-1]], axis=0)
        out = mult.reshape((self.nblocks,) + extra + self.grid.shape) * f[None]
        if include_mean:
            out[(slice(None), Ellipsis) + (0,) * self.grid.dim] = self.grid.mean(f)[None]
        return out

    def block_l2(self, f: np.ndarray) -> np.ndarray:
        """||Delta_dot_j f||_{L^2} for all j, via Parseval."""
        self.grid.check(f)
        energy = (np.abs(f) ** 2).reshape((-1,) + self.grid.shape).sum(axis=0).ravel()
        return np.sqrt(self.grid.volume * (self._phi_sq_flat @ energy))

    def block_lp(self, f: np.ndarray, p: float) -> np.ndarray:
        p = float(p)
        if p == 2.0:
            return self.block_l2(f)
        blocks = self.blocks(f)
        return np.array([self.grid.lp_norm(b, p) for b in blocks])


def build_partition(grid: FourierGrid) -> DyadicPartition:
    return DyadicPartition(grid)


def hom_block(part: DyadicPartition, f: np.ndarray, j: int) -> np.ndarray:
    return part.phi_j(j) * f


def hom_cutoff(part: DyadicPartition, f: np.ndarray, j: int, include_mean: bool = False) -> np.ndarray:
    """S_dot_j f = sum_{j' <= j-1} Delta_dot_{j'} f; optionally add back the mean."""
    out = part.cutoff_multiplier(j) * f
    if include_mean:
        out[(Ellipsis,) + (0,) * part.grid.dim] = part.grid.mean(f)
    return out


def inhom_block(part: DyadicPartition, f: np.ndarray, j: int) -> np.ndarray:
    return part.inhom_multiplier(j) * f


def _lp_blocks_inhom(part: DyadicPartition, f: np.ndarray, p: float) -> np.ndarray:
    grid = part.grid
    extra = (1,) * (f.ndim - grid.dim)
    stack = part.inhom_stack
    if p == 2.0:
        energy = np.abs(f) ** 2
        if f.ndim > grid.dim:
            energy = energy.reshape((-1,) + grid.shape).sum(axis=0)
        w = (stack**2).reshape(len(stack), -1) @ energy.ravel()
        return np.sqrt(grid.volume * w)
    blocks = stack.reshape((len(stack),) + extra + grid.shape) * f[None]
    return np.array([grid.lp_norm(b, p) for b in blocks])


def besov_sequence(part: DyadicPartition, f: np.ndarray, idx: BesovIndex) -> tuple[np.ndarray, np.ndarray]:
    """Return (j values, 2^{js} ||Delta_j f||_{L^p})."""
    p = float(idx.p)
    if idx.homogeneous:
        js = np.arange(part.jmin, part.jmax + 1)
        norms = part.block_lp(f, p)
    else:
        js = np.arange(-1, max(part.jmax, -1) + 1)
        norms = _lp_blocks_inhom(part, f, p)
    return js, 2.0 ** (idx.s * js) * norms


def besov_norm(part: DyadicPartition, f: np.ndarray, idx: BesovIndex) -> float:
    _, seq = besov_sequence(part, f, idx)
    return _lr(seq, idx.r)


def _lr(seq: np.ndarray, r: float) -> float:
    r = float(r)
    if seq.size == 0:
        return 0.0
    if r == np.inf:
        return float(np.max(seq))
    if r == 1.0:
        return float(np.sum(seq))
    return float(np.sum(seq**r) ** (1.0 / r))


def besov(part: DyadicPartition, f: np.ndarray, s: float, p: float = 2.0, r: float = 1.0,
          homogeneous: bool = True) -> float:
    return besov_norm(part, f, BesovIndex(s, p, r, homogeneous))


def embedding_ratio(part: DyadicPartition, f: np.ndarray, source: BesovIndex,
                    target: BesovIndex | float) -> float:
    """||f||_target / ||f||_source for the embeddings used by the estimates.

    Supported: B_dot^{n/2}_{2,1} into L^inf, B_dot^0_{inf,inf} and
    B_dot^{n/2}_{2,inf}.  Homogeneous norms see only the zero-mean part, so
    the L^inf target is measured on the zero-mean part as well.
    """
    n = part.grid.dim
    src_ok = source == BesovIndex(n / 2, 2.0, 1.0, True)
    if isinstance(target, BesovIndex):
        tgt_ok = target in (BesovIndex(0.0, np.inf, np.inf, True), BesovIndex(n / 2, 2.0, np.inf, True))
    else:
        tgt_ok = float(target) == np.inf
    if not (src_ok and tgt_ok):
        raise ValueError(f"unsupported embedding {source} -> {target}")
    den = besov_norm(part, f, source)
    if isinstance(target, BesovIndex):
        num = besov_norm(part, f, target)
    else:
        num = part.grid.lp_norm(part.grid.zero_mean(f), np.inf)
    if den == 0.0:
        if num == 0.0:
            return 0.0
        raise ZeroDivisionError("source norm vanishes but target norm does not")
    return num / den
