"""Fourier-truncated viscous non-resistive MHD on the periodic box.

    du/dt = nu Lap u + P S_R[(B.grad)B - (u.grad)u]
    dB/dt =            P S_R[(B.grad)u - (u.grad)B]

P is the Leray projector and S_R the sharp truncation to |xi| <= R.  Time
stepping is the integrating-factor (Lawson) RK4 scheme with the exact heat
factor exp(-nu |xi|^2 tau) on u and no factor on B.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .littlewood_paley import BesovIndex, DyadicPartition, besov_norm, build_partition
from .spectral import DEALIAS_MODES, FourierGrid, random_field

INITIAL_KINDS = ("orszag_tang", "abc_like", "random_spectrum", "zero")
DIV_TOL = 1e-11
CFL_SAFETY = 0.5
CFL_EVERY = 10


class ConfigError(ValueError):
    pass


class InvariantViolation(RuntimeError):
    pass


class CFLViolation(InvariantViolation):
    pass


@dataclass
class MHDState:
    t: float
    u: np.ndarray
    B: np.ndarray
    grid: FourierGrid

    def copy(self) -> "MHDState":
        return MHDState(self.t, self.u.copy(), self.B.copy(), self.grid)


@dataclass(frozen=True)
class SolverConfig:
    nu: float
    dt: float
    t_end: float
    R: float | None = None
    dealias: str = "padded"
    sample_every: int = 1
    integrator: str = "if_rk4"
    seed: int = 0
    nonlinear: bool = True  # test hook: drop every quadratic term
    freeze_u: bool = False  # test hook: hold u fixed, transport B only

    def __post_init__(self):
        if not (self.nu > 0 and math.isfinite(self.nu)):
            raise ConfigError(f"nu must be positive, got {self.nu}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if not (self.t_end >= 0 and math.isfinite(self.t_end)):
            raise ConfigError(f"t_end must be nonnegative, got {self.t_end}")
        if self.R is not None and not self.R > 0:
            raise ConfigError(f"R must be positive, got {self.R}")
        if self.dealias not in DEALIAS_MODES:
            raise ConfigError(f"dealias must be one of {DEALIAS_MODES}, got {self.dealias!r}")
        if int(self.sample_every) != self.sample_every or self.sample_every < 1:
            raise ConfigError(f"sample_every must be a positive integer, got {self.sample_every}")
        if self.integrator != "if_rk4":
            raise ConfigError(f"unsupported integrator {self.integrator!r}")

    @property
    def n_steps(self) -> int:
        """Number of uniform steps; the step is shrunk so they land on t_end."""
        if self.t_end == 0:
            return 0
        return max(1, math.ceil(self.t_end / self.dt - 1e-9))

    @property
    def step_size(self) -> float:
        n = self.n_steps
        return self.t_end / n if n else self.dt


# ----------------------------------------------------------------------
# initial data


def _rms_normalize(grid: FourierGrid, f: np.ndarray, rms: float) -> np.ndarray:
    norm = grid.l2_norm(f)
    if norm == 0 or rms == 0:
        return np.zeros_like(f)
    return f * (rms * math.sqrt(grid.volume) / norm)


def make_initial_data(kind: str, grid: FourierGrid, **params) -> MHDState:
    """Synthesize divergence-free, zero-mean, Hermitian initial data.

    orszag_tang (2D):   u = a_u (-sin y, sin x), B = a_B (-sin y, sin 2x)
    abc_like (3D):      ABC flows at wavenumber 1 (u) and 2 (B)
    random_spectrum:    |c(xi)| ~ |xi|^-alpha, uniform phases, rms amplitudes
    zero:               u = B = 0
    """
    if kind not in INITIAL_KINDS:
        raise ConfigError(f"unknown initial data kind {kind!r}")
    if kind == "orszag_tang" and grid.dim != 2:
        raise ConfigError("orszag_tang initial data is two-dimensional")
    if kind == "abc_like" and grid.dim != 3:
        raise ConfigError("abc_like initial data is three-dimensional")
    x = grid.k0 * grid.x
    vec = (grid.dim,) + grid.shape
    if kind == "zero":
        u = np.zeros(vec, dtype=complex)
        B = np.zeros(vec, dtype=complex)
    elif kind == "orszag_tang":
        au = float(params.get("amp_u", 1.0))
        ab = float(params.get("amp_B", 1.0))
        u = grid.to_spectral(au * np.stack([-np.sin(x[1]), np.sin(x[0])]))
        B = grid.to_spectral(ab * np.stack([-np.sin(x[1]), np.sin(2 * x[0])]))
    elif kind == "abc_like":
        au = float(params.get("amp_u", 1.0))
        ab = float(params.get("amp_B", 1.0))

        def abc(m):
            X, Y, Z = m * x
            return np.stack([np.sin(Z) + np.cos(Y), np.sin(X) + np.cos(Z), np.sin(Y) + np.cos(X)])

        u = grid.to_spectral(au * abc(1))
        B = grid.to_spectral(ab * abc(2))
    else:
        seed = int(params.get("seed", 0))
        rng = np.random.default_rng(seed)
        cutoff = params.get("cutoff")
        cutoff = grid.k0 * grid.N / 3 if cutoff is None else float(cutoff)
        u = random_field(grid, float(params.get("alpha_u", 2.5)), rng, cutoff=cutoff)
        B = random_field(grid, float(params.get("alpha_B", 3.0)), rng, cutoff=cutoff)
        u = _rms_normalize(grid, u, float(params.get("amp_u", 1.0)))
        B = _rms_normalize(grid, B, float(params.get("amp_B", 1.0)))
    u = grid.zero_mean(grid.leray(grid.clean(u)))
    B = grid.zero_mean(grid.leray(grid.clean(B)))
    return MHDState(0.0, u, B, grid)


# ----------------------------------------------------------------------
# right-hand side


@dataclass
class Nonlinear:
    """Projected, truncated quadratic terms at one state."""

    NBB: np.ndarray  # P S_R (B.grad)B
    NUU: np.ndarray  # P S_R (u.grad)u
    NB: np.ndarray  # P S_R [(B.grad)u - (u.grad)B]

    @property
    def du(self) -> np.ndarray:
        return self.NBB - self.NUU


def nonlinear_terms(grid: FourierGrid, u: np.ndarray, B: np.ndarray, cfg: SolverConfig) -> Nonlinear:
    if not cfg.nonlinear:
        z = np.zeros_like(u)
        return Nonlinear(z, z.copy(), z.copy())
    if cfg.dealias == "two_thirds":
        NBB = grid.advect(B, B, "two_thirds")
        NUU = grid.advect(u, u, "two_thirds")
        NB = grid.advect(B, u, "two_thirds") - grid.advect(u, B, "two_thirds")
    else:
        fields = np.stack([u, B])
        phys = grid.to_padded(fields)
        grads = grid.to_padded(grid.grad(fields))  # (k, field, comp, ...)
        up, bp = phys[0], phys[1]
        gu, gb = grads[:, 0], grads[:, 1]
        d = grid.dim
        sl = (slice(None), None) + (slice(None),) * d
        bb = np.sum(bp[sl] * gb, axis=0)
        uu = np.sum(up[sl] * gu, axis=0)
        bu_ub = np.sum(bp[sl] * gu, axis=0) - np.sum(up[sl] * gb, axis=0)
        NBB, NUU, NB = grid.from_padded(np.stack([bb, uu, bu_ub]))
    mask = grid.ball_mask(cfg.R)
    return Nonlinear(*(grid.leray(np.where(mask, f, 0.0)) for f in (NBB, NUU, NB)))


def rhs(state: MHDState, cfg: SolverConfig) -> tuple[np.ndarray, np.ndarray]:
    grid = state.grid
    nl = nonlinear_terms(grid, state.u, state.B, cfg)
    du = cfg.nu * grid.laplacian(state.u) + nl.du
    if cfg.freeze_u:
        du = np.zeros_like(du)
    return du, nl.NB


# ----------------------------------------------------------------------
# norm series


SERIES_COLUMNS = (
    "t", "L2_u", "L2_B", "E", "grad_u_L2", "Hhalf_u", "u_H32dot",
    "u_Bn2m1", "u_Bn2", "B_Bn2", "grad_u_Bn2", "u_Hn2", "u_Bn2p1",
    "nu_lap_u_Bn2m1", "nl_u_Bn2m1", "dudt_Bn2m1", "dBdt_Bn2m1",
    "X", "Y", "Z", "int_u_Hn2_sq", "int_grad_u_sq", "int_u_L2_sq", "int_u_H32dot_sq",
    "div_u", "div_B",
)


class NormSeries:
    """Time-sampled norms and running trapezoid integrals."""

    columns = SERIES_COLUMNS

    def __init__(self, dim: int, nu: float):
        self.dim = dim
        self.nu = nu
        self.data: dict[str, list[float]] = {c: [] for c in self.columns}

    def __len__(self) -> int:
        return len(self.data["t"])

    def __getitem__(self, name: str) -> np.ndarray:
        return np.asarray(self.data[name], dtype=float)

    def last(self, name: str) -> float:
        return self.data[name][-1]

    def append(self, row: dict[str, float]) -> None:
        if len(self) and not row["t"] > self.last("t"):
            raise InvariantViolation("sample times must be strictly increasing")
        integrands = {
            "Y": self.nu * row["grad_u_Bn2"],
            "Z": row["B_Bn2"] ** 2,
            "int_u_Hn2_sq": row["u_Hn2"] ** 2,
            "int_grad_u_sq": row["grad_u_L2"] ** 2,
            "int_u_L2_sq": row["L2_u"] ** 2,
            "int_u_H32dot_sq": row["u_H32dot"] ** 2,
        }
        if len(self):
            dt = row["t"] - self.last("t")
            prev = self._integrands
            for key, val in integrands.items():
                row[key] = self.last(key) + 0.5 * dt * (val + prev[key])
        else:
            for key in integrands:
                row[key] = 0.0
        self._integrands = integrands
        row["X"] = row["u_Bn2m1"]
        for c in self.columns:
            self.data[c].append(float(row[c]))

    def as_array(self) -> np.ndarray:
        return np.column_stack([self[c] for c in self.columns])

    @classmethod
    def from_columns(cls, dim: int, nu: float, cols: dict[str, np.ndarray]) -> "NormSeries":
        out = cls(dim, nu)
        missing = [c for c in cls.columns if c not in cols]
        if missing:
            raise ValueError(f"series is missing columns {missing}")
        out.data = {c: [float(v) for v in cols[c]] for c in cls.columns}
        return out


def measure(part: DyadicPartition, state: MHDState, cfg: SolverConfig,
            nl: Nonlinear | None = None) -> dict[str, float]:
    grid = part.grid
    n = grid.dim
    u, B = state.u, state.B
    if nl is None:
        nl = nonlinear_terms(grid, u, B, cfg)
    lap = grid.laplacian(u)
    dudt = cfg.nu * lap + nl.du
    if cfg.freeze_u:
        dudt = np.zeros_like(dudt)
    b = lambda f, s: besov_norm(part, f, BesovIndex(s, 2.0, 1.0))  # noqa: E731
    l2u, l2b = grid.l2_norm(u), grid.l2_norm(B)
    return {
        "t": state.t,
        "L2_u": l2u,
        "L2_B": l2b,
        "E": l2u**2 + l2b**2,
        "grad_u_L2": grid.sobolev_norm(u, 1.0),
        "Hhalf_u": grid.sobolev_norm(u, 0.5),
        "u_H32dot": grid.sobolev_norm(u, 1.5),
        "u_Bn2m1": b(u, n / 2 - 1),
        "u_Bn2": b(u, n / 2),
        "B_Bn2": b(B, n / 2),
        "grad_u_Bn2": b(grid.grad(u), n / 2),
        "u_Hn2": grid.sobolev_norm(u, n / 2, homogeneous=False),
        "u_Bn2p1": b(u, n / 2 + 1),
        "nu_lap_u_Bn2m1": cfg.nu * b(lap, n / 2 - 1),
        "nl_u_Bn2m1": b(nl.du, n / 2 - 1),
        "dudt_Bn2m1": b(dudt, n / 2 - 1),
        "dBdt_Bn2m1": b(nl.NB, n / 2 - 1),
        "div_u": grid.divergence_defect(u),
        "div_B": grid.divergence_defect(B),
    }


# ----------------------------------------------------------------------
# time stepping


class Integrator:
    """IF-RK4 for (u, B) plus optional passive pieces driven by the same stages.

    Extra fields are advanced with the heat factor and forcings taken from the
    stage nonlinearities; they never feed back into (u, B), so the (u, B)
    trajectory is identical whether or not extras are carried.
    """

    def __init__(self, grid: FourierGrid, cfg: SolverConfig,
                 extras: dict[str, Callable[[Nonlinear], np.ndarray]] | None = None):
        self.grid = grid
        self.cfg = cfg
        self.h = cfg.step_size
        self.E_half = np.exp(-cfg.nu * grid.xi2 * (self.h / 2))
        self.E_full = np.exp(-cfg.nu * grid.xi2 * self.h)
        self.extras = extras or {}

    def _forcing(self, nl: Nonlinear) -> dict[str, np.ndarray]:
        out = {"u": nl.du, "B": nl.NB}
        if self.cfg.freeze_u:
            out["u"] = np.zeros_like(nl.du)
        for key, fn in self.extras.items():
            out[key] = fn(nl)
        return out

    def _E(self, key: str, which: np.ndarray, f: np.ndarray) -> np.ndarray:
        if key == "B" or (key == "u" and self.cfg.freeze_u):
            return f
        return which * f

    def step(self, y: dict[str, np.ndarray], nl0: Nonlinear | None = None) -> dict[str, np.ndarray]:
        grid, cfg, dt = self.grid, self.cfg, self.h
        Eh, Ef = self.E_half, self.E_full

        def N(z):
            return self._forcing(nonlinear_terms(grid, z["u"], z["B"], cfg))

        k1 = self._forcing(nl0) if nl0 is not None else N(y)
        y2 = {k: self._E(k, Eh, y[k] + (dt / 2) * k1[k]) for k in y}
        k2 = N(y2)
        y3 = {k: self._E(k, Eh, y[k]) + (dt / 2) * k2[k] for k in y}
        k3 = N(y3)
        y4 = {k: self._E(k, Ef, y[k]) + dt * self._E(k, Eh, k3[k]) for k in y}
        k4 = N(y4)
        return {
            k: self._E(k, Ef, y[k])
            + (dt / 6) * (self._E(k, Ef, k1[k]) + 2 * self._E(k, Eh, k2[k] + k3[k]) + k4[k])
            for k in y
        }


def max_speed(grid: FourierGrid, state: MHDState) -> float:
    return max(grid.lp_norm(state.u, np.inf), grid.lp_norm(state.B, np.inf))


def cfl_limit(grid: FourierGrid, state: MHDState) -> float:
    return CFL_SAFETY * grid.dx / max(max_speed(grid, state), 1e-8)


def truncate_state(state: MHDState, R: float | None) -> MHDState:
    g = state.grid
    return MHDState(state.t, g.truncate(state.u, R), g.truncate(state.B, R), g)


def step(state: MHDState, cfg: SolverConfig) -> MHDState:
    """One IF-RK4 step of size cfg.step_size."""
    integ = Integrator(state.grid, cfg)
    y = integ.step({"u": state.u, "B": state.B})
    return MHDState(state.t + integ.h, y["u"], y["B"], state.grid)


def _check_finite(y: dict[str, np.ndarray], t: float) -> None:
    for key, f in y.items():
        if not np.isfinite(np.sum(f)):
            raise InvariantViolation(f"non-finite coefficients in {key} at t={t:.6g}")


def run(state0: MHDState, cfg: SolverConfig, part: DyadicPartition | None = None,
        extras: dict[str, tuple[np.ndarray, Callable[[Nonlinear], np.ndarray]]] | None = None,
        on_sample: Callable[[int, MHDState, dict[str, np.ndarray]], None] | None = None,
        ) -> tuple[MHDState, NormSeries]:
    """Integrate from state0 to cfg.t_end, sampling norms every cfg.sample_every steps.

    ``extras`` maps names to (initial value, forcing) pairs for passive fields
    advanced in lockstep; ``on_sample`` sees every recorded state and the
    current extras.
    """
    grid = state0.grid
    part = part or build_partition(grid)
    state = truncate_state(state0, cfg.R)
    if cfl_limit(grid, state) < cfg.step_size:
        raise ConfigError(
            f"dt={cfg.step_size:.6g} violates the CFL limit {cfl_limit(grid, state):.6g}")
    extras = extras or {}
    integ = Integrator(grid, cfg, {k: fn for k, (_, fn) in extras.items()})
    y = {"u": state.u, "B": state.B}
    for k, (init, _) in extras.items():
        y[k] = init.copy()
    series = NormSeries(grid.dim, cfg.nu)
    nsteps = cfg.n_steps
    t0 = state.t
    for n in range(nsteps + 1):
        t = t0 + n * integ.h
        current = MHDState(t, y["u"], y["B"], grid)
        nl = None
        if n % cfg.sample_every == 0 or n == nsteps:
            nl = nonlinear_terms(grid, y["u"], y["B"], cfg)
            row = measure(part, current, cfg, nl)
            if max(row["div_u"], row["div_B"]) > DIV_TOL:
                raise InvariantViolation(f"divergence defect {max(row['div_u'], row['div_B']):.3g} at t={t:.6g}")
            series.append(row)
            if on_sample is not None:
                on_sample(n, current, y)
        if n == nsteps:
            break
        if n and n % CFL_EVERY == 0 and cfl_limit(grid, current) < integ.h:
            raise CFLViolation(f"CFL limit {cfl_limit(grid, current):.6g} < dt={integ.h:.6g} at t={t:.6g}")
        y = integ.step(y, nl)
        _check_finite(y, t + integ.h)
    final = MHDState(t0 + nsteps * integ.h, y["u"], y["B"], grid)
    return final, series


def with_overrides(cfg: SolverConfig, **kw) -> SolverConfig:
    return replace(cfg, **kw)
