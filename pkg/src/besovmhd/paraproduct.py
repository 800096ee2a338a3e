"""Bony decomposition, paraproduct ratios and the transport commutator.

All products are lattice projections of exact (zero-padded) products, so the
identities below hold to round-off:

    uv = T_u v + T_v u + R(u, v).

The torus has no frequencies below the box scale, so the low-frequency
cut-off S_dot_{j-1} u carries the mean of u explicitly.  The mean-mean
product has no block of its own and is assigned to the remainder.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .littlewood_paley import BesovIndex, DyadicPartition, besov_norm
from .spectral import DomainError, GridMismatch

DIV_FREE_TOL = 1e-12


@dataclass
class BonyTriple:
    T_uv: np.ndarray
    T_vu: np.ndarray
    R_uv: np.ndarray

    def total(self) -> np.ndarray:
        return self.T_uv + self.T_vu + self.R_uv


def _same_shape(u: np.ndarray, v: np.ndarray) -> None:
    if u.shape != v.shape:
        raise GridMismatch(f"shape mismatch {u.shape} vs {v.shape}")


def _require_div_free(part: DyadicPartition, vel: np.ndarray) -> None:
    grid = part.grid
    if vel.shape != (grid.dim,) + grid.shape:
        raise GridMismatch(f"velocity must have shape {(grid.dim,) + grid.shape}")
    if grid.divergence_defect(vel) > DIV_FREE_TOL:
        raise DomainError("velocity field is not divergence-free")


def _sum_padded_products(part: DyadicPartition, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Lattice projection of sum_j a[j] * b[j] for stacks along axis 0."""
    grid = part.grid
    pa = grid.to_padded(a)
    pb = grid.to_padded(b)
    return grid.from_padded(np.einsum("j...,j...->...", pa, pb))


def para_T(part: DyadicPartition, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """T_u v = sum_j S_dot_{j-1} u * Delta_dot_j v (mean of u included)."""
    _same_shape(u, v)
    return _sum_padded_products(part, part.cutoffs(u, include_mean=True), part.blocks(v))


def remainder_R(part: DyadicPartition, u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """R(u, v) = sum_{|k-j|<=1} Delta_dot_k u Delta_dot_j v, plus the mean product."""
    _same_shape(u, v)
    grid = part.grid
    bu = grid.to_padded(part.blocks(u))
    bv = grid.to_padded(part.blocks(v))
    near = bv.copy()
    near[1:] += bv[:-1]
    near[:-1] += bv[1:]
    out = grid.from_padded(np.sum(bu * near, axis=0))
    zero = (Ellipsis,) + (0,) * grid.dim
    mean_prod = grid.mean(u) * grid.mean(v)
    out[zero] += mean_prod
    return out


def bony_triple(part: DyadicPartition, u: np.ndarray, v: np.ndarray) -> BonyTriple:
    return BonyTriple(para_T(part, u, v), para_T(part, v, u), remainder_R(part, u, v))


def _ratio(lhs: float, rhs: float) -> float:
    if lhs == 0.0:
        return 0.0
    if rhs == 0.0:
        raise ZeroDivisionError("degenerate right-hand side with nonzero left-hand side")
    return lhs / rhs


@dataclass
class ProductRatios:
    T: float
    R: float
    algebra: float


def product_estimate_ratios(part: DyadicPartition, u: np.ndarray, v: np.ndarray) -> ProductRatios:
    """Empirical constants of the paraproduct, remainder and algebra estimates.

    T:       ||T_u v||_{B^{n/2}_{2,1}} / (||u||_{B^{-1}_{inf,inf}} ||v||_{B^{n/2+1}_{2,1}})
    R:       ||R(v, u)||_{B^{n/2}_{2,1}} / (||v||_{B^{n/2+1}_{2,1}} ||u||_{B^{-1}_{inf,inf}})
    algebra: ||uv||_{B^{n/2}_{2,1}} / (||u||_{B^{n/2}_{2,1}} ||v||_{B^{n/2}_{2,1}})

    All norms are homogeneous, so the fields are reduced to zero mean first.
    """
    _same_shape(u, v)
    grid = part.grid
    n = grid.dim
    u = grid.zero_mean(u)
    v = grid.zero_mean(v)
    target = BesovIndex(n / 2, 2.0, 1.0)
    u_neg = besov_norm(part, u, BesovIndex(-1.0, np.inf, np.inf))
    v_hi = besov_norm(part, v, BesovIndex(n / 2 + 1, 2.0, 1.0))
    t_ratio = _ratio(besov_norm(part, para_T(part, u, v), target), u_neg * v_hi)
    r_ratio = _ratio(besov_norm(part, remainder_R(part, v, u), target), v_hi * u_neg)
    alg = _ratio(
        besov_norm(part, grid.product(u, v), target),
        besov_norm(part, u, target) * besov_norm(part, v, target),
    )
    return ProductRatios(t_ratio, r_ratio, alg)


def commutator_Qj(part: DyadicPartition, vel: np.ndarray, f: np.ndarray, j: int) -> np.ndarray:
    """Q_j = (vel . grad) Delta_dot_j f - Delta_dot_j ((vel . grad) f)."""
    _require_div_free(part, vel)
    grid = part.grid
    phi = part.phi_j(j)
    return grid.advect(vel, phi * f) - phi * grid.advect(vel, f)


def commutator_stack(part: DyadicPartition, vel: np.ndarray, f: np.ndarray) -> np.ndarray:
    """Q_j for every block j (leading axis), with batched transforms."""
    _require_div_free(part, vel)
    grid = part.grid
    blocks = part.blocks(f)
    grads = grid.grad(blocks)  # (dim, nb, ...)
    gp = grid.to_padded(grads)
    vp = grid.to_padded(vel)
    vp = vp.reshape(vp.shape[:1] + (1,) * (gp.ndim - grid.dim - 1) + vp.shape[1:])
    transported = grid.from_padded(np.sum(vp * gp, axis=0))
    whole = grid.advect(vel, f)
    return transported - part.blocks(whole)


def commutator_ratio(part: DyadicPartition, vel: np.ndarray, f: np.ndarray) -> float:
    """sum_j 2^{j n/2} ||Q_j|| / ((||grad v||_{B^{n/2}_{2,inf}} + ||grad v||_{L^inf}) ||f||_{B^{n/2}_{2,1}})."""
    grid = part.grid
    n = grid.dim
    qs = commutator_stack(part, vel, f)
    js = np.arange(part.jmin, part.jmax + 1)
    lhs = float(np.sum(2.0 ** (js * n / 2) * np.array([grid.l2_norm(q) for q in qs])))
    gv = grid.grad(vel)
    gnorm = besov_norm(part, gv, BesovIndex(n / 2, 2.0, np.inf)) + grid.lp_norm(gv, np.inf)
    return _ratio(lhs, gnorm * besov_norm(part, f, BesovIndex(n / 2, 2.0, 1.0)))


@dataclass
class AdvectionBlock:
    transport: np.ndarray
    P: np.ndarray
    Q: np.ndarray

    def total(self) -> np.ndarray:
        return self.transport + self.P + self.Q


def _cut(part: DyadicPartition, f: np.ndarray, j: int) -> np.ndarray:
    """S_dot_j f with the mean of f added back."""
    out = part.cutoff_multiplier(j) * f
    zero = (Ellipsis,) + (0,) * part.grid.dim
    out[zero] = part.grid.mean(f)
    return out


def advection_block_decomposition(part: DyadicPartition, u: np.ndarray, B_comp: np.ndarray,
                                  j: int) -> AdvectionBlock:
    """Split Delta_dot_j of the T_u-part of (u . grad) B into transport + P_j + Q_j.

    transport = (S_dot_{j-1} u . grad) Delta_dot_j B
    P_j       = sum_k Delta_dot_{j-1} u_k  Delta_dot_j Delta_dot_{j+1} d_k B
              - sum_k Delta_dot_{j-2} u_k  Delta_dot_j Delta_dot_{j-1} d_k B
    Q_j       = sum_{j'} [Delta_dot_j, S_dot_{j'-1} u . grad] Delta_dot_{j'} B
    """
    _require_div_free(part, u)
    grid = part.grid
    phi = part.phi_j
    bj = phi(j) * B_comp
    transport = grid.advect(_cut(part, u, j - 1), bj)
    P = grid.advect(phi(j - 1) * u, phi(j + 1) * bj) - grid.advect(phi(j - 2) * u, phi(j - 1) * bj)
    Q = np.zeros_like(bj)
    for jp in part.js:
        low = _cut(part, u, jp - 1)
        bjp = phi(jp) * B_comp
        Q += phi(j) * grid.advect(low, bjp) - grid.advect(low, phi(j) * bjp)
    return AdvectionBlock(transport, P, Q)


def paraproduct_advection_block(part: DyadicPartition, u: np.ndarray, B_comp: np.ndarray,
                                j: int) -> np.ndarray:
    """sum_{j'} Delta_dot_j (S_dot_{j'-1} u . grad Delta_dot_{j'} B), the reference for the split."""
    grid = part.grid
    total = np.zeros_like(B_comp)
    for jp in part.js:
        total += grid.advect(_cut(part, u, jp - 1), part.phi_j(jp) * B_comp)
    return part.phi_j(j) * total


def pj_ratio(part: DyadicPartition, u: np.ndarray, B: np.ndarray) -> float:
    """max_j 2^{j n/2} ||P_j|| / (||grad u||_{B^{n/2}_{2,1}} ||B||_{B^{n/2}_{2,1}})."""
    _require_div_free(part, u)
    grid = part.grid
    n = grid.dim
    phi = part.phi_j
    lhs = 0.0
    for j in part.js:
        bj = phi(j) * B
        P = grid.advect(phi(j - 1) * u, phi(j + 1) * bj) - grid.advect(phi(j - 2) * u, phi(j - 1) * bj)
        lhs = max(lhs, 2.0 ** (j * n / 2) * grid.l2_norm(P))
    idx = BesovIndex(n / 2, 2.0, 1.0)
    return _ratio(lhs, besov_norm(part, grid.grad(u), idx) * besov_norm(part, B, idx))
