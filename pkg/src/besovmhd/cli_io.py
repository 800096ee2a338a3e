"""Run configuration, checkpoints and norm-series CSV files."""

from __future__ import annotations

import configparser
import io
import os
import struct
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .solver import ConfigError, MHDState, SolverConfig
from .spectral import FourierGrid

MAGIC = b"BMHD"
VERSION = 1
HEADER = struct.Struct("<4sIBIddd")
COEFF = np.dtype("<c16")


# ----------------------------------------------------------------------
# atomic writes


def atomic_write_bytes(path: Path, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ----------------------------------------------------------------------
# checkpoints


def encode_checkpoint(state: MHDState, nu: float) -> bytes:
    grid = state.grid
    head = HEADER.pack(MAGIC, VERSION, grid.dim, grid.N, grid.L, state.t, nu)
    body = np.concatenate([state.u.ravel(), state.B.ravel()]).astype(COEFF, copy=False)
    return head + body.tobytes()


def write_checkpoint(path: str | Path, state: MHDState, nu: float) -> None:
    atomic_write_bytes(Path(path), encode_checkpoint(state, nu))


def decode_checkpoint(data: bytes) -> tuple[MHDState, float]:
    if len(data) < HEADER.size:
        raise ConfigError("checkpoint truncated before the header end")
    magic, version, dim, N, L, t, nu = HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ConfigError(f"bad checkpoint magic {magic!r}")
    if version != VERSION:
        raise ConfigError(f"unsupported checkpoint version {version}")
    grid = FourierGrid(dim, N, L)
    count = 2 * dim * N**dim
    expected = HEADER.size + count * COEFF.itemsize
    if len(data) != expected:
        raise ConfigError(f"checkpoint size {len(data)} != expected {expected}")
    coeffs = np.frombuffer(data, dtype=COEFF, offset=HEADER.size).astype(complex)
    u, B = coeffs.reshape((2, dim) + grid.shape)
    return MHDState(t, u.copy(), B.copy(), grid), nu


def read_checkpoint(path: str | Path) -> tuple[MHDState, float]:
    return decode_checkpoint(Path(path).read_bytes())


# ----------------------------------------------------------------------
# CSV


def format_csv(columns: dict[str, np.ndarray] | list[tuple[str, np.ndarray]]) -> str:
    """Header row then one row per sample; floats as %.17g, time column first."""
    items = list(columns.items()) if isinstance(columns, dict) else list(columns)
    names = [n for n, _ in items]
    if not names or names[0] != "t":
        raise ValueError("the first CSV column must be t")
    data = np.column_stack([np.asarray(c, dtype=float) for _, c in items])
    out = io.StringIO()
    out.write(",".join(names) + "\n")
    for row in data:
        out.write(",".join("%.17g" % x for x in row) + "\n")
    return out.getvalue()


def write_csv(path: str | Path, columns) -> None:
    atomic_write_text(Path(path), format_csv(columns))


def read_csv(path: str | Path) -> dict[str, np.ndarray]:
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read series {path}: {exc}") from exc
    if not lines:
        raise ConfigError(f"empty series file {path}")
    names = lines[0].split(",")
    rows = [[float(x) for x in ln.split(",")] for ln in lines[1:] if ln]
    data = np.array(rows, dtype=float).reshape(len(rows), len(names))
    return {n: data[:, i] for i, n in enumerate(names)}


# ----------------------------------------------------------------------
# run configuration


SCHEMA: dict[str, dict[str, type]] = {
    "grid": {"dim": int, "N": int, "L": float},
    "physics": {"nu": float},
    "time": {"dt": float, "t_end": float, "sample_every": int},
    "numerics": {"R": float, "dealias": str},
    "init": {"kind": str, "amp_u": float, "amp_B": float, "alpha_u": float, "alpha_B": float,
             "cutoff": float, "seed": int},
    "run": {"seed": int, "out": str, "constants": str, "delta": float},
    "corpus": {"dim": int, "N": int, "n_fields": int, "alpha_min": float, "alpha_max": float,
               "seed": int, "margin": float},
}


@dataclass(frozen=True)
class RunConfig:
    dim: int
    N: int
    nu: float
    dt: float
    t_end: float
    L: float = 2 * np.pi
    R: float | None = None
    dealias: str = "padded"
    init_kind: str = "orszag_tang"
    init_params: dict = field(default_factory=dict)
    seed: int = 0
    sample_every: int = 1
    out: str = "out"
    constants: str | None = None
    delta: float = 1e-6

    def grid(self) -> FourierGrid:
        try:
            return FourierGrid(self.dim, self.N, self.L)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def solver(self) -> SolverConfig:
        return SolverConfig(nu=self.nu, dt=self.dt, t_end=self.t_end, R=self.R, dealias=self.dealias,
                            sample_every=self.sample_every, seed=self.seed)

    def initial_params(self) -> dict:
        params = dict(self.init_params)
        params.setdefault("seed", self.seed)
        return params


def _convert(section: str, key: str, raw: str, kind: type):
    try:
        if kind is int:
            return int(raw)
        if kind is float:
            val = raw.strip().lower()
            return None if val in ("none", "inf") and key == "R" else float(raw)
        return raw.strip()
    except ValueError as exc:
        raise ConfigError(f"[{section}] {key}: cannot parse {raw!r} as {kind.__name__}") from exc


def parse_sections(text: str) -> dict[str, dict]:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc
    out: dict[str, dict] = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        keys = SCHEMA[section]
        out[section] = {}
        for key, raw in parser.items(section):
            if key not in keys:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            out[section][key] = _convert(section, key, raw, keys[key])
    return out


def load_run_config(path: str | Path, seed: int | None = None) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return run_config_from_text(text, seed=seed, base=Path(path).parent)


def run_config_from_text(text: str, seed: int | None = None, base: Path | None = None) -> RunConfig:
    sec = parse_sections(text)
    need = [("grid", "dim"), ("grid", "N"), ("physics", "nu"), ("time", "dt"), ("time", "t_end")]
    missing = [f"[{s}] {k}" for s, k in need if k not in sec.get(s, {})]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")
    grid, time, run = sec["grid"], sec["time"], sec.get("run", {})
    num, init = sec.get("numerics", {}), dict(sec.get("init", {}))
    kind = init.pop("kind", "orszag_tang")
    if seed is not None:
        init["seed"] = seed
    constants = run.get("constants")
    if constants is not None and base is not None and not Path(constants).is_absolute():
        constants = str((base / constants).resolve())
    cfg = RunConfig(
        dim=grid["dim"], N=grid["N"], L=grid.get("L", 2 * np.pi), nu=sec["physics"]["nu"],
        dt=time["dt"], t_end=time["t_end"], sample_every=time.get("sample_every", 1),
        R=num.get("R"), dealias=num.get("dealias", "padded"), init_kind=kind, init_params=init,
        seed=run.get("seed", 0) if seed is None else seed, out=run.get("out", "out"),
        constants=constants, delta=run.get("delta", 1e-6),
    )
    cfg.grid()
    cfg.solver()
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise ConfigError(f"seed must be an unsigned 64-bit integer, got {cfg.seed}")
    return cfg
