"""Heat / forced-Stokes / remainder splitting of the 3D velocity.

u = h + v + w with

    dh/dt = nu Lap h,                  h(0) = S_R u0   (solved exactly)
    dv/dt = nu Lap v + P S_R (B.grad)B,  v(0) = 0
    dw/dt = nu Lap w - P S_R (u.grad)u,  w(0) = 0

v and w ride along with the main run and reuse its stage nonlinearities, so
the sum matches the solver's u to round-off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from .littlewood_paley import DyadicPartition, build_partition
from .solver import ConfigError, MHDState, NormSeries, SolverConfig, run, truncate_state
from .spectral import FourierGrid

SPLIT_COLUMNS = (
    "t", "h_Hhalf", "v_Hhalf", "w_Hhalf", "h_H1", "v_H1", "w_H1",
    "h_H32", "v_H32", "w_H32",
    "int_h_H32_sq", "int_v_H32_sq", "int_w_H32_sq",
    "int_h_H1_4", "int_v_H1_4", "int_w_H1_4",
    "closure", "w_agreement", "interp_ratio", "div_pieces", "outside_ball",
)


def solve_heat(grid: FourierGrid, u0: np.ndarray, nu: float, t: float, R: float | None = None) -> np.ndarray:
    """Exact heat flow exp(nu t Lap) S_R u0."""
    return np.exp(-nu * grid.xi2 * t) * grid.truncate(u0, R)


def _sobolev_sq_weights(grid: FourierGrid, s: float) -> np.ndarray:
    w = np.zeros(grid.shape)
    nz = grid.xi2 > 0
    w[nz] = grid.xi2[nz] ** s
    return w


def heat_norm_sq(grid: FourierGrid, u0: np.ndarray, nu: float, s: float, R: float | None = None):
    """Return t -> ||h(t)||^2_{H_dot^s} as a vectorized closure over the modes."""
    c = grid.truncate(u0, R)
    energy = np.sum(np.abs(c) ** 2, axis=0)
    w = _sobolev_sq_weights(grid, s)
    keep = (energy > 0) & (w > 0)
    amp = grid.volume * (w * energy)[keep]
    rate = 2 * nu * grid.xi2[keep]

    def f(t: float) -> float:
        return float(np.sum(amp * np.exp(-rate * t)))

    return f


def heat_identity_defect(grid: FourierGrid, u0: np.ndarray, nu: float, t: float,
                         R: float | None = None) -> float:
    """Relative defect of ||h(t)||^2_{H^1/2} + 2 nu int_0^t ||h||^2_{H^3/2} = ||S_R u0||^2_{H^1/2}."""
    half = heat_norm_sq(grid, u0, nu, 0.5, R)
    three = heat_norm_sq(grid, u0, nu, 1.5, R)
    ref = half(0.0)
    if ref == 0:
        return 0.0
    integral, _ = integrate.quad(three, 0.0, t, epsabs=0.0, epsrel=1e-13, limit=200)
    return abs(half(t) + 2 * nu * integral - ref) / ref


def heat_quartic_integral(grid: FourierGrid, u0: np.ndarray, nu: float, T: float,
                          R: float | None = None) -> float:
    """int_0^T ||h(s)||^4_{H_dot^1} ds by adaptive quadrature (T may be inf)."""
    g = heat_norm_sq(grid, u0, nu, 1.0, R)
    if g(0.0) == 0:
        return 0.0
    val, _ = integrate.quad(lambda s: g(s) ** 2, 0.0, T, epsabs=0.0, epsrel=1e-11, limit=400)
    return float(val)


def find_T1(grid: FourierGrid, u0: np.ndarray, nu: float, c3: float, c4: float,
            R: float | None = None, rtol: float = 1e-12) -> float:
    """Largest T with int_0^T ||h||^4_{H^1} < nu^3 / (16 c3 c4); inf if never reached."""
    if c3 <= 0 or c4 <= 0:
        raise ValueError("c3 and c4 must be positive")
    target = nu**3 / (16 * c3 * c4)
    if heat_quartic_integral(grid, u0, nu, math.inf, R) < target:
        return math.inf
    lo, hi = 0.0, 1.0
    while heat_quartic_integral(grid, u0, nu, hi, R) < target:
        lo, hi = hi, 2 * hi
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if heat_quartic_integral(grid, u0, nu, mid, R) < target:
            lo = mid
        else:
            hi = mid
    return lo


@dataclass
class CalderonSplit:
    """Sampled pieces of the splitting and their norm trajectories."""

    dim: int
    nu: float
    columns: dict[str, list[float]] = field(default_factory=lambda: {c: [] for c in SPLIT_COLUMNS})
    h: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    w: list[np.ndarray] = field(default_factory=list)
    keep_fields: bool = False

    def __getitem__(self, name: str) -> np.ndarray:
        return np.asarray(self.columns[name], dtype=float)

    def __len__(self) -> int:
        return len(self.columns["t"])

    def as_array(self) -> np.ndarray:
        return np.column_stack([self[c] for c in SPLIT_COLUMNS])


def run_calderon(state0: MHDState, cfg: SolverConfig, part: DyadicPartition | None = None,
                 keep_fields: bool = False) -> tuple[MHDState, NormSeries, CalderonSplit]:
    """Main run with v and w integrated in lockstep; h sampled exactly."""
    grid = state0.grid
    if grid.dim != 3:
        raise ConfigError("the splitting experiment is three-dimensional")
    part = part or build_partition(grid)
    u0 = truncate_state(state0, cfg.R).u
    zero = np.zeros_like(u0)
    extras = {
        "v": (zero, lambda nl: nl.NBB),
        "w": (zero, lambda nl: -nl.NUU),
    }
    split = CalderonSplit(grid.dim, cfg.nu, keep_fields=keep_fields)
    cols = split.columns
    ball = ~grid.ball_mask(cfg.R)
    prev: dict[str, float] = {}

    def on_sample(n: int, state: MHDState, y: dict[str, np.ndarray]) -> None:
        h = solve_heat(grid, u0, cfg.nu, state.t - state0.t)
        v, w = y["v"], y["w"]
        u = state.u
        w_diff = u - h - v
        unorm = grid.l2_norm(u)
        row = {"t": state.t}
        ratios = []
        for name, f in (("h", h), ("v", v), ("w", w)):
            a, b, c = (grid.sobolev_norm(f, s) for s in (0.5, 1.0, 1.5))
            row[f"{name}_Hhalf"], row[f"{name}_H1"], row[f"{name}_H32"] = a, b, c
            if b > 0:
                ratios.append(b * b / (a * c))
        row["closure"] = grid.l2_norm(u - (h + v + w)) / unorm if unorm > 0 else grid.l2_norm(h + v + w)
        wn = grid.l2_norm(w)
        row["w_agreement"] = grid.l2_norm(w_diff - w) / wn if wn > 0 else grid.l2_norm(w_diff)
        row["interp_ratio"] = max(ratios) if ratios else 0.0
        row["div_pieces"] = max(grid.divergence_defect(f) for f in (h, v, w))
        row["outside_ball"] = float(max(np.max(np.abs(f[:, ball]), initial=0.0) for f in (h, v, w)))
        integrands = {
            "int_h_H32_sq": row["h_H32"] ** 2, "int_v_H32_sq": row["v_H32"] ** 2,
            "int_w_H32_sq": row["w_H32"] ** 2, "int_h_H1_4": row["h_H1"] ** 4,
            "int_v_H1_4": row["v_H1"] ** 4, "int_w_H1_4": row["w_H1"] ** 4,
        }
        if len(split):
            dt = state.t - cols["t"][-1]
            for key, val in integrands.items():
                row[key] = cols[key][-1] + 0.5 * dt * (val + prev[key])
        else:
            row.update({key: 0.0 for key in integrands})
        prev.update(integrands)
        for c in SPLIT_COLUMNS:
            cols[c].append(float(row[c]))
        if keep_fields:
            split.h.append(h.copy())
            split.v.append(v.copy())
            split.w.append(w.copy())

    final, series = run(state0, cfg, part, extras=extras, on_sample=on_sample)
    return final, series, split


@dataclass
class SplitReport:
    closure_max: float
    w_agreement_max: float
    interp_max: float
    v_sup_ratio: float  # sup ||v||_{H^1/2} / Z(T)
    v_energy_ratio: float  # (sup ||v||^2 + 2 nu int ||v||^2_{H^3/2}) / (3 Z^2)
    w_ratio: float  # WEstimate3 LHS / RHS
    w_threshold_time: float  # first sample with int ||w||^2_{H^3/2} > nu/(2 c4)
    passed: bool


def _worst(lhs: np.ndarray, rhs: np.ndarray) -> float:
    with np.errstate(divide="ignore", invalid="ignore"):
        r = np.where(rhs > 0, lhs / rhs, np.where(lhs > 0, np.inf, 0.0))
    return float(np.max(r)) if r.size else 0.0


def split_report(split: CalderonSplit, series: NormSeries, u0_Hhalf: float, c3: float, c4: float,
                 closure_tol: float = 1e-8) -> SplitReport:
    """Evaluate the piecewise bounds on every sample prefix [0, T]."""
    nu = split.nu
    Z = series["Z"]
    v_sup = np.maximum.accumulate(split["v_Hhalf"])
    w_sup_sq = np.maximum.accumulate(split["w_Hhalf"] ** 2)
    v_sup_ratio = _worst(v_sup, Z)
    v_energy = v_sup**2 + 2 * nu * split["int_v_H32_sq"]
    v_energy_ratio = _worst(v_energy, 3 * Z**2)
    w_lhs = w_sup_sq + nu * split["int_w_H32_sq"]
    w_rhs = 8 * c3 / nu**2 * u0_Hhalf**4 + 4 * c3 / nu**2 * Z**4
    w_ratio = _worst(w_lhs, w_rhs)
    crossed = np.nonzero(split["int_w_H32_sq"] > nu / (2 * c4))[0]
    w_time = float(split["t"][crossed[0]]) if crossed.size else math.inf
    closure = float(np.max(split["closure"]))
    passed = closure <= closure_tol and v_sup_ratio <= 1 and v_energy_ratio <= 1 and w_ratio <= 1
    return SplitReport(closure, float(np.max(split["w_agreement"])), float(np.max(split["interp_ratio"])),
                       v_sup_ratio, v_energy_ratio, w_ratio, w_time, bool(passed))
