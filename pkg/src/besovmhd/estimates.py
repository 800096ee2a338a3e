"""Existence-time budgets, constant calibration and inequality monitors.

Every inequality check returns a :class:`CheckReport` carrying the sampled
left and right sides, the worst ratio and the violating samples, so that a
stricter margin can be applied offline.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .littlewood_paley import BesovIndex, DyadicPartition, besov_norm, build_partition, embedding_ratio
from .paraproduct import commutator_ratio, pj_ratio, product_estimate_ratios
from .solver import (ConfigError, MHDState, NormSeries, SolverConfig, make_initial_data,
                     nonlinear_terms, rhs, run)
from .spectral import FourierGrid, random_field

MARGIN = 1.1
ROUNDOFF = 1e-12


# ----------------------------------------------------------------------
# reports


@dataclass
class CheckReport:
    name: str
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    worst_ratio: float
    violations: list[tuple[float, float, float]]
    passed: bool

    def summary(self) -> str:
        status = "pass" if self.passed else "FAIL"
        return (f"{self.name}: {status} samples={len(self.times)} worst_ratio={self.worst_ratio:.6g} "
                f"violations={len(self.violations)}")

    def violation_record(self) -> str:
        lines = [f"{self.name}: t={t:.17g} lhs={l:.17g} rhs={r:.17g}" for t, l, r in self.violations]
        return "\n".join(lines)


def compare(name: str, times, lhs, rhs, tol: float = ROUNDOFF) -> CheckReport:
    """lhs <= rhs at every sample, up to a relative round-off allowance."""
    times = np.asarray(times, dtype=float)
    lhs = np.broadcast_to(np.asarray(lhs, dtype=float), times.shape).copy()
    rhs = np.broadcast_to(np.asarray(rhs, dtype=float), times.shape).copy()
    # an infinite or nan lhs must not widen its own allowance
    scale = np.where(np.isfinite(lhs), np.abs(lhs), 0.0)
    slack = tol * np.maximum(np.abs(rhs), scale)
    bad = ~(lhs <= rhs + slack)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(rhs > 0, lhs / rhs, np.where(lhs > slack, np.inf, 0.0))
    viol = [(float(t), float(a), float(b)) for t, a, b in zip(times[bad], lhs[bad], rhs[bad])]
    worst = float(np.max(ratio)) if ratio.size else 0.0
    return CheckReport(name, times, lhs, rhs, worst, viol, not viol)


# ----------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class ConstantsTable:
    dim: int = 0
    c1: float = 1.0
    c2: float = 1.0
    c3: float = 1.0
    c4: float = 1.0
    algebra: float = 1.0
    embedding: float = 1.0
    embedding_B0inf: float = 1.0
    commutator: float = 1.0
    chemin: float = 1.0
    trilinear: float = 1.0
    para_T: float = 1.0
    para_R: float = 1.0
    pj: float = 1.0
    time_derivative: float = 1.0
    gronwall: float = 1.0
    margin: float = MARGIN
    corpus: str = ""
    raw: dict = field(default_factory=dict, compare=False, hash=False)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "ConstantsTable":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown constants {sorted(unknown)}")
        return cls(**data)

    def save(self, path: str | Path) -> None:
        from .cli_io import atomic_write_text

        atomic_write_text(Path(path), self.to_json() + "\n")


def save_constants(path: str | Path, tables: dict[int, ConstantsTable]) -> None:
    from .cli_io import atomic_write_text

    payload = {str(d): asdict(t) for d, t in sorted(tables.items())}
    atomic_write_text(Path(path), json.dumps(payload, indent=2, sort_keys=True) + "\n")


def load_constants(path: str | Path, dim: int) -> ConstantsTable:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read constants table {path}: {exc}") from exc
    if "c1" in payload:
        table = ConstantsTable.from_dict(payload)
        if table.dim not in (0, dim):
            raise ConfigError(f"constants table is for dim {table.dim}, need {dim}")
        return table
    if str(dim) not in payload:
        raise ConfigError(f"constants table {path} has no entry for dim {dim}")
    return ConstantsTable.from_dict(payload[str(dim)])


# ----------------------------------------------------------------------
# pointwise ratios (the empirical constants)


def _phi_pairing(part: DyadicPartition, f: np.ndarray, g: np.ndarray) -> np.ndarray:
    """<Delta_dot_j f, Delta_dot_j g> for every block."""
    grid = part.grid
    cross = (np.conj(f) * g).real.reshape((-1,) + grid.shape).sum(axis=0).ravel()
    return grid.volume * (part._phi_sq_flat @ cross)


def B_growth_rate_ratio(part: DyadicPartition, u: np.ndarray, B: np.ndarray, dB: np.ndarray) -> float:
    """(d/dt ||B||_{B^{n/2}_{2,1}})^+ / (||grad u||_{B^{n/2}_{2,1}} ||B||_{B^{n/2}_{2,1}})."""
    n = part.grid.dim
    js = np.arange(part.jmin, part.jmax + 1)
    norms = part.block_l2(B)
    pair = _phi_pairing(part, B, dB)
    live = norms > 0
    rate = float(np.sum(2.0 ** (js[live] * n / 2) * pair[live] / norms[live]))
    idx = BesovIndex(n / 2, 2.0, 1.0)
    den = besov_norm(part, part.grid.grad(u), idx) * besov_norm(part, B, idx)
    return _safe_ratio(max(rate, 0.0), den)


def u_transfer_ratio(part: DyadicPartition, u: np.ndarray, B: np.ndarray, nl_u: np.ndarray) -> float:
    """sum_j 2^{j(n/2-1)} |<D_j NL, D_j u>| / ||D_j u||  over  ||u||^2_{H^{n/2}} + ||B||^2_{B^{n/2}_{2,1}}."""
    grid = part.grid
    n = grid.dim
    js = np.arange(part.jmin, part.jmax + 1)
    norms = part.block_l2(u)
    pair = np.abs(_phi_pairing(part, u, nl_u))
    live = norms > 0
    num = float(np.sum(2.0 ** (js[live] * (n / 2 - 1)) * pair[live] / norms[live]))
    den = grid.sobolev_norm(u, n / 2, homogeneous=False) ** 2 + besov_norm(part, B, BesovIndex(n / 2, 2.0, 1.0)) ** 2
    return _safe_ratio(num, den)


def trilinear_ratio(grid: FourierGrid, u: np.ndarray, R: float | None = None) -> float:
    """||P S_R (u.grad)u||_{H_dot^{-1/2}} / ||u||^2_{H_dot^1}: the best c in
    |<(u.grad)u, Lambda w>| <= c ||u||^2_{H^1} ||w||_{H^3/2} over w in V_R."""
    nl = grid.leray(grid.truncate(grid.advect(u, u), R))
    return _safe_ratio(grid.sobolev_norm(nl, -0.5), grid.sobolev_norm(u, 1.0) ** 2)


def chemin_ratio(part: DyadicPartition, v: np.ndarray, w: np.ndarray) -> float:
    """|<Lambda^s (v.grad)w, Lambda^s w>| / ((|v|_{H^{n/2}}|w|_{Hd^{n/2}} + |w|_{H^{n/2}}|v|_{Hd^{n/2}}) |w|_{Hd^{n/2-1}}).

    s = n/2 - 1.  Pairings below the round-off floor count as zero: in 2D the
    pairing vanishes identically by skew-symmetry.
    """
    grid = part.grid
    n = grid.dim
    s = n / 2 - 1
    adv = grid.advect(v, w)
    la = grid.fractional_laplacian(grid.zero_mean(adv), s)
    lw = grid.fractional_laplacian(grid.zero_mean(w), s)
    lhs = abs(grid.inner(la, lw))
    if lhs <= 1e-11 * grid.l2_norm(la) * grid.l2_norm(lw):
        lhs = 0.0
    hn = n / 2
    den = (grid.sobolev_norm(v, hn, False) * grid.sobolev_norm(w, hn)
           + grid.sobolev_norm(w, hn, False) * grid.sobolev_norm(v, hn)) * grid.sobolev_norm(w, s)
    return _safe_ratio(lhs, den)


def time_derivative_ratios(part: DyadicPartition, u: np.ndarray, B: np.ndarray,
                           nl_u: np.ndarray, dB: np.ndarray) -> tuple[float, float]:
    n = part.grid.dim
    b = lambda f, s: besov_norm(part, f, BesovIndex(s, 2.0, 1.0))  # noqa: E731
    bu, bb = b(u, n / 2), b(B, n / 2)
    r_u = _safe_ratio(b(nl_u, n / 2 - 1), bb**2 + bu**2)
    r_b = _safe_ratio(b(dB, n / 2 - 1), 2 * bb * bu)
    return r_u, r_b


def gronwall_G(part: DyadicPartition, u2: np.ndarray, B2: np.ndarray) -> float:
    """||u2||^2_{B^{3/2}_{2,1}} + ||B2||^2_{B^{3/2}_{2,1}} + ||grad u2||_{B^{3/2}_{2,1}}."""
    idx = BesovIndex(part.grid.dim / 2, 2.0, 1.0)
    return (besov_norm(part, u2, idx) ** 2 + besov_norm(part, B2, idx) ** 2
            + besov_norm(part, part.grid.grad(u2), idx))


def gronwall_ratio(part: DyadicPartition, s1: MHDState, s2: MHDState, cfg: SolverConfig) -> float:
    """nu (dD/dt + nu ||grad w||^2)^+ / (G D) for D = ||u1-u2||^2 + ||B1-B2||^2."""
    grid = part.grid
    du1, dB1 = rhs(s1, cfg)
    du2, dB2 = rhs(s2, cfg)
    w, z = s1.u - s2.u, s1.B - s2.B
    D = grid.inner(w, w) + grid.inner(z, z)
    dD = 2 * grid.inner(w, du1 - du2) + 2 * grid.inner(z, dB1 - dB2)
    lhs = max(dD + cfg.nu * grid.sobolev_norm(w, 1.0) ** 2, 0.0)
    return _safe_ratio(cfg.nu * lhs, gronwall_G(part, s2.u, s2.B) * D)


def troublesome_pairing_2d(part: DyadicPartition, s1: MHDState, s2: MHDState) -> tuple[float, float]:
    """<(w.grad)B2, z> and the best available 2D bound ||w||_inf ||B2||_{B^1_{2,1}} ||z||."""
    grid = part.grid
    w, z = s1.u - s2.u, s1.B - s2.B
    val = grid.inner(grid.advect(w, s2.B), z)
    bound = grid.lp_norm(w, np.inf) * besov_norm(part, s2.B, BesovIndex(1.0, 2.0, 1.0)) * grid.l2_norm(z)
    return val, bound


def _safe_ratio(num: float, den: float) -> float:
    if num == 0.0:
        return 0.0
    if den == 0.0:
        raise ZeroDivisionError("degenerate denominator with nonzero numerator")
    return num / den


# ----------------------------------------------------------------------
# calibration


@dataclass(frozen=True)
class RunSpec:
    kind: str
    nu: float
    dt: float
    t_end: float
    params: tuple = ()
    snapshots: int = 5

    def param_dict(self) -> dict:
        return dict(self.params)


@dataclass(frozen=True)
class CorpusSpec:
    dim: int
    N: int
    n_fields: int = 50
    alpha_min: float = 1.5
    alpha_max: float = 3.5
    seed: int = 2024
    runs: tuple[RunSpec, ...] = ()
    dual_directions: int = 2
    scale: float = 1.0
    margin: float = MARGIN

    def describe(self) -> str:
        runs = ";".join(f"{r.kind}(nu={r.nu:g},t={r.t_end:g},{dict(r.params)})" for r in self.runs)
        return (f"dim={self.dim} N={self.N} fields={self.n_fields} alpha=[{self.alpha_min:g},{self.alpha_max:g}] "
                f"seed={self.seed} scale={self.scale:g} runs=[{runs}]")


def default_corpus(dim: int, seed: int = 2024) -> CorpusSpec:
    if dim == 2:
        runs = (
            RunSpec("orszag_tang", 0.02, 0.005, 0.5, (("amp_u", 0.7), ("amp_B", 1.3))),
            RunSpec("orszag_tang", 0.005, 0.004, 0.4, (("amp_u", 1.2), ("amp_B", 0.8))),
            RunSpec("random_spectrum", 0.01, 0.004, 0.3, (("alpha_u", 2.0), ("alpha_B", 2.5), ("seed", 101))),
            RunSpec("random_spectrum", 0.02, 0.004, 0.3, (("alpha_u", 3.0), ("alpha_B", 3.5), ("seed", 102))),
            RunSpec("orszag_tang", 0.015, 0.004, 0.3, (("amp_u", 0.25), ("amp_B", 1.2))),
        )
        return CorpusSpec(2, 64, seed=seed, runs=runs)
    runs = (
        RunSpec("random_spectrum", 0.05, 0.005, 0.15, (("alpha_u", 2.0), ("alpha_B", 2.5), ("seed", 201))),
        RunSpec("random_spectrum", 0.08, 0.005, 0.15, (("alpha_u", 3.0), ("alpha_B", 3.5), ("seed", 202))),
        RunSpec("abc_like", 0.05, 0.005, 0.15, (("amp_u", 0.8), ("amp_B", 0.6))),
        RunSpec("random_spectrum", 0.05, 0.005, 0.1,
                (("alpha_u", 2.5), ("alpha_B", 2.5), ("amp_u", 0.4), ("amp_B", 1.0), ("seed", 203))),
    )
    return CorpusSpec(3, 32, seed=seed, runs=runs)


RATIO_KEYS = ("c1", "c2", "trilinear", "algebra", "embedding", "embedding_B0inf", "commutator",
              "chemin", "para_T", "para_R", "pj", "time_derivative", "gronwall")


def field_ratios(part: DyadicPartition, u: np.ndarray, B: np.ndarray, cfg: SolverConfig) -> dict[str, float]:
    """All scale-invariant ratios at one (u, B) pair of divergence-free fields."""
    grid = part.grid
    n = grid.dim
    nl = nonlinear_terms(grid, u, B, cfg)
    src = BesovIndex(n / 2, 2.0, 1.0)
    pr = product_estimate_ratios(part, u[0], B[1])
    td = time_derivative_ratios(part, u, B, nl.du, nl.NB)
    out = {
        "c1": B_growth_rate_ratio(part, u, B, nl.NB),
        "c2": u_transfer_ratio(part, u, B, nl.du),
        "algebra": pr.algebra,
        "para_T": pr.T,
        "para_R": pr.R,
        "embedding": max(embedding_ratio(part, u, src, np.inf), embedding_ratio(part, B, src, np.inf)),
        "embedding_B0inf": max(embedding_ratio(part, f, src, BesovIndex(0.0, np.inf, np.inf)) for f in (u, B)),
        "commutator": commutator_ratio(part, u, B[0]),
        "chemin": max(chemin_ratio(part, u, B), chemin_ratio(part, u, u)),
        "pj": pj_ratio(part, u, B),
        "time_derivative": max(td),
    }
    if n == 3:
        out["trilinear"] = trilinear_ratio(grid, u, cfg.R)
    return out


def _update(acc: dict[str, float], new: dict[str, float]) -> None:
    for k, v in new.items():
        acc[k] = max(acc.get(k, 0.0), v)


def random_pair(grid: FourierGrid, rng: np.random.Generator, alpha_u: float, alpha_B: float,
                scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    u = random_field(grid, alpha_u, rng)
    B = random_field(grid, alpha_B, rng)
    u = scale * u / grid.l2_norm(u) * math.sqrt(grid.volume)
    B = scale * B / grid.l2_norm(B) * math.sqrt(grid.volume)
    return u, B


def calibration_runs(spec: CorpusSpec, part: DyadicPartition
                     ) -> tuple[list[tuple[MHDState, SolverConfig]], list[NormSeries]]:
    """Integrate the corpus runs; return evenly spaced snapshots and the full series."""
    grid = part.grid
    snaps, series = [], []
    for rs in spec.runs:
        state0 = make_initial_data(rs.kind, grid, **rs.param_dict())
        cfg = SolverConfig(nu=rs.nu, dt=rs.dt, t_end=rs.t_end)
        stride = max(1, cfg.n_steps // max(rs.snapshots - 1, 1))
        keep: list[MHDState] = []

        def grab(n, state, y, keep=keep, stride=stride):
            if n % stride == 0:
                keep.append(state.copy())

        _, ser = run(state0, cfg, part, on_sample=grab)
        snaps.extend((s, cfg) for s in keep)
        series.append(ser)
    return snaps, series


def u_estimate_run_ratio(series: NormSeries) -> float:
    """Smallest c2 for which the integrated velocity estimate holds along a run."""
    over = np.maximum(series["X"] + series["Y"] - series["X"][0], 0.0)
    den = series["int_u_Hn2_sq"] + series["Z"]
    live = den > 0
    return float(np.max(over[live] / den[live], initial=0.0))


def gronwall_directions(grid: FourierGrid, state: MHDState, rng: np.random.Generator, count: int):
    """Smooth random perturbations plus a purely magnetic one along B."""
    for _ in range(count):
        yield (random_field(grid, 4.0, rng, cutoff=4 * grid.k0),
               random_field(grid, 4.0, rng, cutoff=4 * grid.k0))
    yield np.zeros_like(state.u), state.B


def calibrate(spec: CorpusSpec, part: DyadicPartition | None = None,
              runs: tuple[list, list] | None = None) -> ConstantsTable:
    """Corpus maxima of every ratio, times the safety margin.

    Field ratios are invariant under amplitude scaling.  Two entries are
    not and are kept apart in ``raw``: ``c2_run`` (the velocity estimate
    along whole runs, which also absorbs the block-weight slack of the
    dissipation) and ``gronwall``.
    """
    grid = FourierGrid(spec.dim, spec.N)
    part = part or build_partition(grid)
    if spec.n_fields < 1 and not spec.runs and not (runs and (runs[0] or runs[1])):
        raise ValueError("empty calibration corpus")
    rng = np.random.default_rng(spec.seed)
    cfg0 = SolverConfig(nu=1.0, dt=1.0, t_end=0.0)
    raw: dict[str, float] = {}
    alphas = np.linspace(spec.alpha_min, spec.alpha_max, spec.n_fields) if spec.n_fields else []
    for i, a in enumerate(alphas):
        u, B = random_pair(grid, rng, a, alphas[-1 - i], spec.scale)
        _update(raw, field_ratios(part, u, B, cfg0))
    snapshots, series = runs if runs is not None else calibration_runs(spec, part)
    for ser in series:
        _update(raw, {"c2_run": u_estimate_run_ratio(ser)})
    for state, cfg in snapshots:
        u, B = spec.scale * state.u, spec.scale * state.B
        if grid.l2_norm(u) == 0 or grid.l2_norm(B) == 0:
            continue
        _update(raw, field_ratios(part, u, B, cfg))
        if spec.dim == 3:
            for dw, dz in gronwall_directions(grid, state, rng, spec.dual_directions):
                eps = 1e-6 * grid.l2_norm(state.u) / max(grid.l2_norm(dw), grid.l2_norm(dz))
                s1 = MHDState(state.t, state.u + eps * dw, state.B + eps * dz, grid)
                _update(raw, {"gronwall": gronwall_ratio(part, s1, state, cfg)})
    m = spec.margin
    consts = {k: m * raw.get(k, 0.0) for k in RATIO_KEYS}
    consts["c2"] = m * max(raw.get("c2", 0.0), raw.get("c2_run", 0.0))
    tri = m * raw.get("trilinear", 0.0)
    consts.update(c3=18.0 * tri**2, c4=6.0 * tri)
    return ConstantsTable(dim=spec.dim, margin=m, corpus=spec.describe(), raw=dict(sorted(raw.items())),
                          **consts)


# ----------------------------------------------------------------------
# checks along a run


def check_energy(series: NormSeries, tol: float = 1e-6) -> tuple[CheckReport, CheckReport]:
    """Energy identity defect and the energy inequality with factor 2."""
    t, E = series["t"], series["E"]
    E0 = E[0]
    defect = np.abs(E - E0 + 2 * series.nu * series["int_grad_u_sq"])
    ident = compare("energy_identity", t, defect, np.full_like(t, tol * E0), tol=0.0)
    lhs = (np.maximum.accumulate(series["L2_u"] ** 2) + np.maximum.accumulate(series["L2_B"] ** 2)
           + series.nu * series["int_grad_u_sq"])
    return ident, compare("energy_inequality", t, lhs, np.full_like(t, 2 * E0))


def check_aux_2d(series: NormSeries) -> CheckReport:
    t = series["t"]
    E0 = series["E"][0]
    return compare("besov2d_energy", t, series["int_u_Hn2_sq"], 2 * (t + 1 / series.nu) * E0)


def check_B_growth(series: NormSeries, c1: float) -> CheckReport:
    """log(||B(t)|| / ||B0||) <= c1 Y(t) / nu in B_dot^{n/2}_{2,1}."""
    t, Bn = series["t"], series["B_Bn2"]
    rhs = c1 * series["Y"] / series.nu
    if Bn[0] == 0:
        lhs = np.where(Bn > 0, np.inf, 0.0)
        return compare("B_growth", t, lhs, np.zeros_like(t))
    with np.errstate(divide="ignore"):
        lhs = np.log(Bn / Bn[0])
    return compare("B_growth", t, lhs, rhs)


def check_u_estimate(series: NormSeries, c2: float) -> CheckReport:
    """X + Y <= X(0) + c2 (int ||u||^2_{H^{n/2}} + Z)."""
    t = series["t"]
    lhs = series["X"] + series["Y"]
    rhs = series["X"][0] + c2 * (series["int_u_Hn2_sq"] + series["Z"])
    return compare("u_estimate", t, lhs, rhs)


def check_time_derivatives(series: NormSeries, C: float) -> tuple[CheckReport, CheckReport]:
    t = series["t"]
    u2, b2 = series["u_Bn2"], series["B_Bn2"]
    ru = compare("dudt_bound", t, series["dudt_Bn2m1"], series["nu_lap_u_Bn2m1"] + C * (b2**2 + u2**2))
    rb = compare("dBdt_bound", t, series["dBdt_Bn2m1"], 2 * C * b2 * u2)
    return ru, rb


def check_chemin(part: DyadicPartition, v: np.ndarray, w: np.ndarray, C: float) -> tuple[float, bool]:
    r = chemin_ratio(part, v, w)
    return r, r <= C


# ----------------------------------------------------------------------
# budgets


@dataclass(frozen=True)
class DataNorms:
    dim: int
    u_Bn2m1: float  # ||u0||_{B_dot^{n/2-1}_{2,1}}
    u_L2: float
    B_L2: float
    B_Bn2: float  # ||B0||_{B_dot^{n/2}_{2,1}}
    u_Hhalf: float = 0.0

    @classmethod
    def from_state(cls, part: DyadicPartition, state: MHDState) -> "DataNorms":
        grid = part.grid
        n = grid.dim
        b = lambda f, s: besov_norm(part, f, BesovIndex(s, 2.0, 1.0))  # noqa: E731
        return cls(n, b(state.u, n / 2 - 1), grid.l2_norm(state.u), grid.l2_norm(state.B),
                   b(state.B, n / 2), grid.sobolev_norm(state.u, 0.5))


@dataclass(frozen=True)
class ExistenceBudget:
    dim: int
    M1: float
    M2: float
    M3: float
    Tstar: float
    M4: float = math.nan
    Cstar: float = math.nan
    T1: float = math.nan
    T2: float = math.nan
    log_Tstar: float = math.nan  # natural log, finite even when Tstar underflows

    def as_dict(self) -> dict:
        return asdict(self)


def _div(a: float, b: float) -> float:
    """a / b with zero denominators as +inf (and 0/0 as +inf)."""
    return math.inf if b == 0 else a / b


def _log_div_exp(a: float, b: float, expo: float) -> float:
    """log((a / b) exp(expo)) with the zero-denominator sentinel."""
    if b == 0:
        return math.inf
    if a == 0:
        return -math.inf
    return math.log(a) - math.log(b) + expo


def budget_2d(norms: DataNorms, nu: float, k) -> ExistenceBudget:
    E0 = norms.u_L2**2 + norms.B_L2**2
    M1 = norms.u_Bn2m1 + (2 * k.c2 / nu) * E0
    M2 = 2 * k.c2 * E0
    M3 = k.c1 * norms.B_Bn2**2
    log_a = math.log(M1 / M2) if M2 > 0 and M1 > 0 else (math.inf if M2 == 0 else -math.inf)
    log_b = _log_div_exp(M1, M3, -6 * k.c1 * M1 / nu)
    log_T = min(log_a, log_b)
    Tstar = min(_div(M1, M2), math.exp(log_b) if math.isfinite(log_b) else (math.inf if log_b > 0 else 0.0))
    return ExistenceBudget(2, M1, M2, M3, Tstar, log_Tstar=log_T)


def budget_3d(norms: DataNorms, nu: float, k, T1: float) -> ExistenceBudget:
    b = norms.u_Bn2m1
    c1, c2, c3, c4 = k.c1, k.c2, k.c3, k.c4
    Cstar = nu / (2 * (c3 * c4) ** 0.25)
    M1 = b + (c2 / nu) * b**2 + (8 * c2 * c3 / nu**3) * b**4
    M2 = 2 * c2 * (norms.u_L2**2 + norms.B_L2**2)
    M3 = norms.B_Bn2**2
    M4 = (2 + c2) * M1 + (3 * c2 / (2 * nu)) * M1**2 + (4 * c2 * c3 / nu**3) * M1**4
    expo = (-(2 * c1 / nu) * b - (2 * c1 * c2 / nu**2) * b**2 - (8 * c1 * c2 * c3 / nu**4) * b**4
            - (3 * c1 * c2 / nu**2) * Cstar - (2 * c1 * c2 / nu) * Cstar**2
            - (4 * c1 * c2 * c3 / nu**4) * Cstar**4)
    log_T2 = _log_div_exp(Cstar, M3, expo)
    log_last = _log_div_exp(M1, M3, -2 * c1 * M4 / nu)

    def ex(lg):
        if math.isinf(lg):
            return math.inf if lg > 0 else 0.0
        return math.exp(lg)

    T2 = ex(log_T2)
    a = _div(M1, M2)
    Tstar = min(T1, T2, a, ex(log_last))
    logs = [log_T2, log_last, math.log(a) if 0 < a < math.inf else (math.inf if a == math.inf else -math.inf),
            math.log(T1) if 0 < T1 < math.inf else (math.inf if T1 == math.inf else -math.inf)]
    return ExistenceBudget(3, M1, M2, M3, Tstar, M4=M4, Cstar=Cstar, T1=T1, T2=T2, log_Tstar=min(logs))


# ----------------------------------------------------------------------
# bootstrap monitor


@dataclass
class MonitorReport:
    window_end: float
    samples: int
    checks: list[CheckReport]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def violation_record(self) -> str:
        return "\n".join(c.violation_record() for c in self.checks if not c.passed)


def bootstrap_monitor(series: NormSeries, budget: ExistenceBudget, k) -> MonitorReport:
    """Check the bootstrap inequalities on the samples with t <= T*."""
    t_all = series["t"]
    sel = t_all - t_all[0] <= budget.Tstar
    t = t_all[sel] - t_all[0]
    col = lambda name: series[name][sel]  # noqa: E731
    nu = series.nu
    X, Y, Z = col("X"), col("Y"), col("Z")
    checks = []
    with np.errstate(over="ignore", invalid="ignore"):
        if budget.dim == 2:
            ode = budget.M1 + budget.M2 * t + budget.M3 * t * np.exp(2 * k.c1 * Y / nu)
            checks.append(compare("ode_xy_2d", t, X + Y, np.where(np.isnan(ode), np.inf, ode)))
            checks.append(compare("xy_le_3M1", t, X + Y, np.full_like(t, 3 * budget.M1)))
        else:
            c1, c2, c3 = k.c1, k.c2, k.c3
            M3 = budget.M3
            ode = (budget.M1 + budget.M2 * t + c2 * M3 * t * np.exp(2 * c1 * Y / nu)
                   + (3 * c2 / (2 * nu)) * M3**2 * t**2 * np.exp(4 * c1 * Y / nu)
                   + (4 * c2 * c3 / nu**3) * M3**4 * t**4 * np.exp(8 * c1 * Y / nu))
            checks.append(compare("ode_xy_3d", t, X + Y, np.where(np.isnan(ode), np.inf, ode)))
            checks.append(compare("xy_le_M4", t, X + Y, np.full_like(t, budget.M4)))
            checks.append(compare("Z_le_Cstar", t, Z, np.full_like(t, budget.Cstar)))
            h0 = series["Hhalf_u"][0]
            aux = h0**2 / nu + (8 * c3 / nu**3) * h0**4 + (3 / (2 * nu)) * Z**2 + (4 * c3 / nu**3) * Z**4
            checks.append(compare("aux_estimate", t, col("int_u_H32dot_sq"), aux))
            E0 = series["E"][0]
            checks.append(compare("besov3d_energy", t, col("int_u_L2_sq") + col("int_u_H32dot_sq"),
                                  2 * t * E0 + aux))
    return MonitorReport(float(budget.Tstar), int(sel.sum()), checks)


# ----------------------------------------------------------------------
# truncation convergence


@dataclass
class TruncationReport:
    radii: np.ndarray
    errors: np.ndarray
    slope: float
    k: float
    passed: bool
    pairwise: list[tuple[float, float, float, float]]


def truncation_convergence(grid: FourierGrid, f: np.ndarray, s: float, k: float,
                           radii) -> TruncationReport:
    """Log-log slope of ||S_R f - f||_{H^s} against 1/R; passes if slope >= k - 1/4."""
    radii = np.asarray(sorted(radii), dtype=float)
    if radii.size < 3:
        raise ValueError("truncation_convergence needs at least three radii")
    errs = np.array([grid.sobolev_norm(f - grid.truncate(f, R), s, homogeneous=False) for R in radii])
    pairwise = []
    for R1, R2, e1, e2 in zip(radii[:-1], radii[1:], errs[:-1], errs[1:]):
        diff = grid.sobolev_norm(grid.truncate(f, R2) - grid.truncate(f, R1), s, homogeneous=False)
        pairwise.append((float(R1), float(R2), diff, float(e1 + e2)))
    if np.all(errs == 0):
        return TruncationReport(radii, errs, math.inf, k, True, pairwise)
    if np.any(errs == 0):
        live = errs > 0
        slope = float(np.polyfit(np.log(1 / radii[live]), np.log(errs[live]), 1)[0]) if live.sum() >= 2 else math.inf
    else:
        slope = float(np.polyfit(np.log(1 / radii), np.log(errs), 1)[0])
    return TruncationReport(radii, errs, slope, k, slope >= k - 0.25, pairwise)


# ----------------------------------------------------------------------
# difference experiment


@dataclass
class DifferenceReport:
    delta: float
    times: np.ndarray
    D: np.ndarray
    envelope: np.ndarray
    window_end: float
    check: CheckReport
    full_run: CheckReport

    @property
    def passed(self) -> bool:
        return self.check.passed


def unit_perturbation(grid: FourierGrid, seed: int, alpha: float = 2.0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    p = random_field(grid, alpha, rng, cutoff=grid.k0 * grid.N / 3)
    return p / grid.l2_norm(p)


def difference_experiment(state0: MHDState, cfg: SolverConfig, delta: float, gronwall_c: float,
                          Tstar: float = math.inf, seed: int = 7,
                          part: DyadicPartition | None = None) -> DifferenceReport:
    """Two runs differing by delta * (unit random velocity perturbation)."""
    grid = state0.grid
    if grid.dim != 3:
        raise ConfigError("the difference experiment is only defined in three dimensions")
    part = part or build_partition(grid)
    pert = unit_perturbation(grid, seed)
    s1 = MHDState(state0.t, state0.u + delta * pert, state0.B.copy(), grid)
    stored: list[tuple[np.ndarray, np.ndarray]] = []
    run(s1, cfg, part, on_sample=lambda n, st, y: stored.append((st.u.copy(), st.B.copy())))
    D, G = [], []
    it = iter(stored)

    def second(n, st, y):
        u1, B1 = next(it)
        w, z = u1 - st.u, B1 - st.B
        D.append(grid.inner(w, w) + grid.inner(z, z))
        G.append(gronwall_G(part, st.u, st.B))

    _, series = run(state0, cfg, part, on_sample=second)
    t = series["t"] - series["t"][0]
    D, G = np.array(D), np.array(G)
    intG = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(t) * (G[1:] + G[:-1]))])
    with np.errstate(over="ignore"):
        env = D[0] * np.exp(gronwall_c / cfg.nu * intG)
    if delta == 0:
        env = np.full_like(D, 1e-20)
    sel = t <= Tstar
    full = compare("gronwall_envelope_full_run", t, D, env)
    window = compare("gronwall_envelope", t[sel], D[sel], env[sel])
    return DifferenceReport(delta, t, D, env, float(Tstar), window, full)
