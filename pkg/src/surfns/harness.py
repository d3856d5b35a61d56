"""Run configuration, scenario execution, ensembles, and file formats.

Configuration is a flat typed key-value text format with dotted sections
(``geometry.kind = sphere``), schema-validated with the offending field path
in every error.  Diagnostics series serialize to CSV with a fixed column
order and 17 significant digits, so binary64 values round-trip losslessly.
Checkpoints are a small binary format with a trailing CRC32.

Determinism contract: identical config and seed produce byte-identical CSV
output regardless of the worker-pool width; parallelism exists only across
ensemble members, whose results are collected in member order.
"""

import hashlib
import json
import os
import struct
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .errors import CheckpointError, ConfigError, DivergenceError, ParameterError
from . import geometry as geo
from .forcing import TAGS, make_catalog_forcing
from .harmonics import SpectralState, get_transform, random_band_limited
from .killing import killing_basis
from .operators import assemble_stokes
from .timestepper import SimState, StepperConfig, run as run_simulation

# ---------------------------------------------------------------------------
# configuration schema

def _cast_bool(s):
    if s.lower() in ("true", "1", "yes"):
        return True
    if s.lower() in ("false", "0", "no"):
        return False
    raise ValueError("expected a boolean")


def _cast_choice(*options):
    def cast(s):
        if s not in options:
            raise ValueError(f"expected one of {options}")
        return s
    return cast


def _cast_vec3(s):
    parts = [p.strip() for p in s.split(",")]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated floats")
    return tuple(float(p) for p in parts)


def _cast_modes(s):
    """Mode list: 'l,m,amp; l,m,amp; ...'"""
    out = []
    if not s.strip():
        return tuple(out)
    for chunk in s.split(";"):
        parts = [p.strip() for p in chunk.split(",")]
        if len(parts) != 3:
            raise ValueError("expected 'l,m,amplitude' triples separated by ';'")
        out.append((int(parts[0]), int(parts[1]), float(parts[2])))
    return tuple(out)


def _cast_floats(s):
    if not s.strip():
        return ()
    return tuple(float(p.strip()) for p in s.split(","))


def _cast_opt_float(s):
    if s.strip().lower() == "none":
        return None
    return float(s)


_SCHEMA = {
    "scenario.name": (str, ""),
    "geometry.kind": (_cast_choice("sphere", "torus"), "sphere"),
    "geometry.radius": (float, 1.0),
    "geometry.L": (int, 8),
    "geometry.major": (float, 2.0),
    "geometry.minor": (float, 0.5),
    "geometry.n_pol": (int, 64),
    "geometry.n_tor": (int, 64),
    "nu.kind": (_cast_choice("constant", "linear_x3"), "constant"),
    "nu.value": (float, 1.0),
    "nu.a": (float, 0.0),
    "forcing.tag": (_cast_choice(*TAGS), "zero"),
    "forcing.mode_l": (int, 2),
    "forcing.mode_m": (int, 0),
    "forcing.amplitude": (float, 1.0),
    "forcing.c": (float, 1.0),
    "forcing.axis": (int, 0),
    "forcing.point": (_cast_vec3, (0.0, 0.0, 1.0)),
    "init.kind": (_cast_choice("zero", "modes", "random"), "zero"),
    "init.modes": (_cast_modes, ()),
    "init.l_max": (int, 0),
    "init.norm_killing": (_cast_opt_float, None),
    "init.norm_nonkilling": (_cast_opt_float, None),
    "run.scheme": (_cast_choice("imex_cnab2", "rk4"), "imex_cnab2"),
    "run.dt": (float, 1e-3),
    "run.t_end": (float, 1.0),
    "run.stride": (int, 10),
    "ensemble.members": (int, 8),
    "pair.gaps": (_cast_floats, ()),
    "pair.seed_offset": (int, 77),
    "pair.killing_free": (_cast_bool, False),
    "seed": (int, 1234),
}


def default_config():
    return {k: v for k, (_, v) in _SCHEMA.items()}


def parse_config_text(text):
    """Parse 'key = value' lines into a typed config dict."""
    cfg = default_config()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in _SCHEMA:
            raise ConfigError(f"unknown config key '{key}' (line {lineno})")
        caster, _ = _SCHEMA[key]
        try:
            cfg[key] = caster(val)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"config error at '{key}': {exc} (got {val!r})") from None
    _validate_config(cfg)
    return cfg


def _validate_config(cfg):
    if cfg["run.dt"] <= 0:
        raise ConfigError("config error at 'run.dt': must be positive")
    if cfg["run.t_end"] <= 0:
        raise ConfigError("config error at 'run.t_end': must be positive")
    if cfg["nu.kind"] == "linear_x3" and cfg["nu.value"] - abs(cfg["nu.a"]) <= 0:
        raise ConfigError("config error at 'nu.a': viscosity floor must stay positive")
    if cfg["ensemble.members"] < 2:
        raise ConfigError("config error at 'ensemble.members': need at least 2")


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None


def config_text(cfg):
    """Canonical 'key = value' rendering (sorted keys, defaults included)."""
    lines = []
    for key in sorted(cfg):
        val = cfg[key]
        if isinstance(val, tuple):
            if val and isinstance(val[0], tuple):
                rendered = "; ".join(",".join(_fmt(x) for x in t) for t in val)
            else:
                rendered = ",".join(_fmt(x) for x in val)
        elif val is None:
            rendered = "none"
        else:
            rendered = _fmt(val)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return "%.17g" % v
    return str(v)


def config_hash(cfg):
    return hashlib.sha256(config_text(cfg).encode()).hexdigest()[:16]


# ---------------------------------------------------------------------------
# context construction

@dataclass
class RunContext:
    cfg: dict
    grid: object
    basis: object
    nu: object = None
    form: object = None
    fspec: object = None
    u0: object = None
    samples: list = None
    records: list = None
    pair: dict = field(default_factory=dict)
    ensemble: object = None
    extra: dict = field(default_factory=dict)


def build_grid(cfg):
    if cfg["geometry.kind"] == "sphere":
        return geo.build_sphere_grid(cfg["geometry.L"], cfg["geometry.radius"])
    return geo.build_torus_grid(cfg["geometry.n_pol"], cfg["geometry.n_tor"],
                                cfg["geometry.major"], cfg["geometry.minor"])


def build_viscosity(cfg, grid):
    if cfg["nu.kind"] == "constant":
        return geo.ViscosityField(grid, cfg["nu.value"])
    x3 = grid.nodes[:, 2]
    scale = grid.R if grid.kind == "sphere" else 1.0
    return geo.ViscosityField(grid, cfg["nu.value"] + cfg["nu.a"] * x3 / scale)


def build_forcing(cfg, grid, basis):
    tag = cfg["forcing.tag"]
    params = {}
    if tag in ("constant_field", "f2_plus", "f2_minus"):
        tr = get_transform(grid, cfg["geometry.L"])
        f = tr.toroidal_basis_field(cfg["forcing.mode_l"], cfg["forcing.mode_m"])
        f = geo.TangentialField(grid, cfg["forcing.amplitude"] * f.comps)
        params["g" if tag == "constant_field" else "v"] = f
    elif tag in ("f4_plus", "f4_minus"):
        p = np.asarray(cfg["forcing.point"], dtype=float)
        if grid.kind == "sphere":
            p = p / np.linalg.norm(p) * grid.R
        params["p"] = p
    elif tag == "constant_killing":
        params["c"] = cfg["forcing.c"]
        params["axis"] = cfg["forcing.axis"]
    return make_catalog_forcing(tag, params, basis)


def build_initial_state(cfg, grid, seed=None):
    L = cfg["geometry.L"]
    kind = cfg["init.kind"]
    if kind == "zero":
        return SpectralState(L)
    if kind == "modes":
        s = SpectralState(L)
        for l, m, amp in cfg["init.modes"]:
            s.set(l, m, amp)
        return s
    tr = get_transform(grid, L)
    l_max = cfg["init.l_max"] or None
    return random_band_limited(
        tr, cfg["seed"] if seed is None else seed, l_max=l_max,
        norm_killing=cfg["init.norm_killing"],
        norm_nonkilling=cfg["init.norm_nonkilling"])


def build_context(cfg):
    grid = build_grid(cfg)
    basis = killing_basis(grid)
    ctx = RunContext(cfg, grid, basis)
    if grid.kind == "sphere":
        ctx.nu = build_viscosity(cfg, grid)
        ctx.form = assemble_stokes(grid, ctx.nu, cfg["geometry.L"])
        ctx.fspec = build_forcing(cfg, grid, basis)
        ctx.u0 = build_initial_state(cfg, grid)
    return ctx


def stepper_config(cfg):
    return StepperConfig(scheme=cfg["run.scheme"], dt=cfg["run.dt"],
                         t_end=cfg["run.t_end"], stride=cfg["run.stride"])


# ---------------------------------------------------------------------------
# CSV and report output

CSV_COLUMNS = ("t", "norm_u", "norm_uK", "norm_uNK", "energy", "dissipation",
               "work", "energy_residual", "lambda")


def records_to_csv(records, n_alpha):
    header = ",".join(CSV_COLUMNS + tuple(f"alpha_{j + 1}" for j in range(n_alpha)))
    lines = [header]
    for r in records:
        vals = [r.t, r.norm_u, r.norm_uK, r.norm_uNK, r.energy, r.dissipation,
                r.work, r.energy_residual, r.lam]
        vals.extend(r.alpha[j] if j < r.alpha.size else 0.0 for j in range(n_alpha))
        lines.append(",".join("%.17g" % v for v in vals))
    return "\n".join(lines) + "\n"


def write_csv(path, records, n_alpha):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(records_to_csv(records, n_alpha))


# ---------------------------------------------------------------------------
# checkpoint format

_MAGIC = b"SNSK"
_VERSION = 1
_KIND_CODE = {"sphere": 0, "torus": 1}
_KIND_NAME = {v: k for k, v in _KIND_CODE.items()}
_HEADER = struct.Struct("<4sIBIdddI")


@dataclass
class CheckpointMeta:
    kind: str
    L: int
    R: float
    r: float
    time: float


def _pair_order(L):
    for l in range(1, L + 1):
        for m in range(0, l + 1):
            yield l, m


def save_checkpoint(sim, grid, path):
    """Serialize a state's coefficients with header and trailing CRC32."""
    state = sim.state if isinstance(sim, SimState) else sim
    L = state.L
    pairs = []
    for l, m in _pair_order(L):
        a_cos = state.get(l, m)
        a_sin = state.get(l, -m) if m > 0 else 0.0
        pairs.extend((a_cos, a_sin))
    n_pairs = len(pairs) // 2
    head = _HEADER.pack(_MAGIC, _VERSION, _KIND_CODE[grid.kind], L,
                        grid.R, grid.r, state.t, n_pairs)
    payload = struct.pack(f"<{len(pairs)}d", *pairs)
    crc = zlib.crc32(head + payload) & 0xFFFFFFFF
    with open(path, "wb") as fh:
        fh.write(head + payload + struct.pack("<I", crc))


def load_checkpoint(path):
    """Read a checkpoint; returns (CheckpointMeta, SimState).

    The ledger restarts at zero from the loaded time; integrator history is
    not persisted, so a resumed run re-runs its bootstrap step.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size + 4:
        raise CheckpointError("truncated checkpoint: missing header")
    head = blob[:_HEADER.size]
    magic, version, kind_code, L, R, r, t, n_pairs = _HEADER.unpack(head)
    if magic != _MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    if version != _VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    want = _HEADER.size + 16 * n_pairs + 4
    if len(blob) != want:
        raise CheckpointError(
            f"truncated checkpoint: {len(blob)} bytes, expected {want}")
    stored_crc = struct.unpack("<I", blob[-4:])[0]
    crc = zlib.crc32(blob[:-4]) & 0xFFFFFFFF
    if crc != stored_crc:
        raise CheckpointError("checksum mismatch: corrupt checkpoint")
    if kind_code not in _KIND_NAME:
        raise CheckpointError(f"unknown geometry code {kind_code}")
    vals = struct.unpack(f"<{2 * n_pairs}d", blob[_HEADER.size:-4])
    state = SpectralState(L, t=t)
    for idx, (l, m) in enumerate(_pair_order(L)):
        state.set(l, m, vals[2 * idx])
        if m > 0:
            state.set(l, -m, vals[2 * idx + 1])
    meta = CheckpointMeta(_KIND_NAME[kind_code], L, R, r, t)
    return meta, SimState(state)


# ---------------------------------------------------------------------------
# checks, reports, scenarios

@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float
    expected: str
    tol: float
    detail: str = ""


@dataclass
class RunReport:
    scenario: str
    checks: list
    wall_time: float
    config_hash: str
    version: str = __version__

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "passed": self.passed,
            "wall_time_s": self.wall_time,
            "config_hash": self.config_hash,
            "version": self.version,
            "checks": [{
                "name": c.name, "passed": bool(c.passed),
                "measured": float(c.measured), "expected": c.expected,
                "tol": float(c.tol), "detail": c.detail,
            } for c in self.checks],
        }

    def render(self):
        lines = [f"scenario {self.scenario}: "
                 f"{'PASS' if self.passed else 'FAIL'} "
                 f"({self.wall_time:.2f}s, config {self.config_hash})"]
        for c in self.checks:
            status = "pass" if c.passed else "FAIL"
            lines.append(f"  [{status}] {c.name}: measured {c.measured:.6g} "
                         f"(expected {c.expected}, tol {c.tol:g})"
                         + (f" -- {c.detail}" if c.detail else ""))
        return "\n".join(lines)


@dataclass
class Scenario:
    """A reproducible run with claims and pinned checks.

    ``claims`` states the quantitative law the scenario probes; ``kind`` is
    one of static, single, pair, gaps, ensemble.
    """
    name: str
    claims: str
    kind: str
    config: dict
    checks: list          # callables ctx -> CheckResult (or list thereof)


# ---------------------------------------------------------------------------
# ensembles

AGGREGATE_FIELDS = ("norm_u", "norm_uK", "norm_uNK", "energy",
                    "dissipation", "work")


@dataclass
class EnsembleResult:
    """Per-member diagnostics plus max/min/mean of each scalar per sample."""
    member_records: list
    member_samples: list
    times: np.ndarray
    aggregates: dict            # field -> {"max": ..., "min": ..., "mean": ...}
    omega_hat: float
    entry_time: float
    entry_radius: float
    entry_time_r: float
    entry_radius_r: float
    diverged: list

    @property
    def nk_max(self):
        return self.aggregates["norm_uNK"]["max"]

    @property
    def nk_min(self):
        return self.aggregates["norm_uNK"]["min"]

    @property
    def nk_mean(self):
        return self.aggregates["norm_uNK"]["mean"]

    @property
    def uk_max(self):
        return self.aggregates["norm_uK"]["max"]

    @property
    def uk_min(self):
        return self.aggregates["norm_uK"]["min"]


def member_seed(base_seed, k):
    """Deterministic per-member seed derivation."""
    return int(base_seed) + 1000003 * (k + 1)


def run_ensemble(cfg, ctx=None, n_members=None, threads=1):
    """Integrate independent members in parallel and aggregate diagnostics.

    Member divergence is recorded and the ensemble continues; aggregation
    covers the completed members.
    """
    from .diagnostics import fit_decay_rate
    ctx = ctx if ctx is not None else build_context(cfg)
    n = n_members if n_members is not None else cfg["ensemble.members"]
    if n < 2:
        raise ParameterError("an ensemble needs at least 2 members")
    scfg = stepper_config(cfg)

    def one(k):
        u0 = build_initial_state(cfg, ctx.grid, seed=member_seed(cfg["seed"], k))
        try:
            return k, run_simulation(scfg, ctx.grid, ctx.form, ctx.fspec, u0), None
        except DivergenceError as err:
            return k, err.partial, str(err)

    results = [None] * n
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            for k, payload, err in pool.map(one, range(n)):
                results[k] = (payload, err)
    else:
        for k in range(n):
            _, payload, err = one(k)
            results[k] = (payload, err)

    diverged = [i for i, (_, err) in enumerate(results) if err]
    ok = [payload for payload, err in results if not err and payload is not None]
    if not ok:
        raise DivergenceError("all ensemble members diverged")
    member_samples = [s for s, _ in ok]
    member_records = [r for _, r in ok]
    times = np.array([rec.t for rec in member_records[0]])
    aggregates = {}
    for name in AGGREGATE_FIELDS:
        vals = np.array([[getattr(rec, name) for rec in recs]
                         for recs in member_records])
        aggregates[name] = {"max": vals.max(axis=0), "min": vals.min(axis=0),
                            "mean": vals.mean(axis=0)}
    nk_max = aggregates["norm_uNK"]["max"]
    fit = fit_decay_rate(times, nk_max ** 2) if times.size >= 10 else None
    omega_hat = fit.omega if fit is not None else 0.0

    r_max = float(aggregates["norm_uK"]["max"][0])
    radius = float(np.sqrt(0.5 + omega_hat))
    radius_r = float(np.sqrt(0.5 + omega_hat * (1.0 + r_max ** 2)))

    def first_entry(radius_val):
        hit = np.where(nk_max <= radius_val)[0]
        return float(times[hit[0]]) if hit.size else float("inf")

    return EnsembleResult(member_records, member_samples, times, aggregates,
                          float(omega_hat), first_entry(radius), radius,
                          first_entry(radius_r), radius_r, diverged)


# ---------------------------------------------------------------------------
# scenario execution

def _resolve_threads(threads):
    if threads is not None:
        return max(1, int(threads))
    env = os.environ.get("SURFNS_THREADS", "")
    return max(1, int(env)) if env.strip() else 1


def execute_scenario(scenario, out_dir=None, seed=None, threads=None, quiet=False):
    """Run a scenario end to end: integrate, check, write CSV and report."""
    cfg = dict(scenario.config)
    if seed is not None:
        cfg["seed"] = int(seed)
    threads = _resolve_threads(threads)
    t0 = time.time()
    ctx = build_context(cfg)

    if scenario.kind != "static" and ctx.form is None:
        raise ConfigError(
            "config error at 'geometry.kind': time evolution is sphere-only")
    if scenario.kind == "single":
        scfg = stepper_config(cfg)
        ctx.samples, ctx.records = run_simulation(
            scfg, ctx.grid, ctx.form, ctx.fspec, ctx.u0)
    elif scenario.kind == "pair":
        _run_pair(cfg, ctx)
    elif scenario.kind == "gaps":
        _run_gaps(cfg, ctx)
    elif scenario.kind == "ensemble":
        ctx.ensemble = run_ensemble(cfg, ctx=ctx, threads=threads)
    elif scenario.kind != "static":
        raise ParameterError(f"unknown scenario kind {scenario.kind!r}")

    checks = []
    for fn in scenario.checks:
        out = fn(ctx)
        checks.extend(out if isinstance(out, list) else [out])
    report = RunReport(scenario.name, checks, time.time() - t0, config_hash(cfg))

    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        n_alpha = ctx.basis.n
        if ctx.records is not None:
            write_csv(os.path.join(out_dir, f"{scenario.name}.csv"),
                      ctx.records, n_alpha)
        for label, (samples, records) in ctx.pair.items():
            write_csv(os.path.join(out_dir, f"{scenario.name}_{label}.csv"),
                      records, n_alpha)
        if ctx.ensemble is not None:
            for k, recs in enumerate(ctx.ensemble.member_records):
                write_csv(os.path.join(out_dir, f"{scenario.name}_member{k:02d}.csv"),
                          recs, n_alpha)
            _write_ensemble_csv(os.path.join(out_dir, f"{scenario.name}_ensemble.csv"),
                                ctx.ensemble)
        with open(os.path.join(out_dir, f"{scenario.name}_report.json"), "w",
                  encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
    if not quiet:
        print(report.render())
    return report


def _perturbation(cfg, ctx, seed_offset):
    tr = get_transform(ctx.grid, cfg["geometry.L"])
    l_max = cfg["init.l_max"] or None
    kill = 0.0 if cfg["pair.killing_free"] else None
    pert = random_band_limited(tr, cfg["seed"] + seed_offset, l_max=l_max,
                               norm_killing=kill)
    pert.coeffs /= np.linalg.norm(pert.coeffs)
    return pert


def _run_pair(cfg, ctx):
    scfg = stepper_config(cfg)
    gaps = cfg["pair.gaps"] or (1e-3,)
    pert = _perturbation(cfg, ctx, cfg["pair.seed_offset"])
    sa, ra = run_simulation(scfg, ctx.grid, ctx.form, ctx.fspec, ctx.u0)
    ub = ctx.u0.copy()
    ub.coeffs = ub.coeffs + gaps[0] * pert.coeffs
    sb, rb = run_simulation(scfg, ctx.grid, ctx.form, ctx.fspec, ub)
    ctx.pair["a"] = (sa, ra)
    ctx.pair["b"] = (sb, rb)


def _run_gaps(cfg, ctx):
    scfg = stepper_config(cfg)
    gaps = cfg["pair.gaps"]
    if len(gaps) < 2:
        raise ConfigError("config error at 'pair.gaps': need at least two gaps")
    pert = _perturbation(cfg, ctx, cfg["pair.seed_offset"])
    sa, ra = run_simulation(scfg, ctx.grid, ctx.form, ctx.fspec, ctx.u0)
    ctx.pair["base"] = (sa, ra)
    for i, gap in enumerate(gaps):
        ub = ctx.u0.copy()
        ub.coeffs = ub.coeffs + gap * pert.coeffs
        sb, rb = run_simulation(scfg, ctx.grid, ctx.form, ctx.fspec, ub)
        ctx.pair[f"gap{i}"] = (sb, rb)
    ctx.extra["gaps"] = tuple(gaps)


def _write_ensemble_csv(path, ens):
    cols = ["t"]
    for name in AGGREGATE_FIELDS:
        cols.extend(f"{name}_{stat}" for stat in ("max", "min", "mean"))
    lines = [",".join(cols)]
    for i, t in enumerate(ens.times):
        vals = [t]
        for name in AGGREGATE_FIELDS:
            agg = ens.aggregates[name]
            vals.extend((agg["max"][i], agg["min"][i], agg["mean"][i]))
        lines.append(",".join("%.17g" % v for v in vals))
    meta = (f"# omega_hat = {ens.omega_hat:.17g}, "
            f"entry_time = {ens.entry_time:.17g} at radius {ens.entry_radius:.17g}, "
            f"entry_time_r = {ens.entry_time_r:.17g} at radius {ens.entry_radius_r:.17g}")
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines + [meta]) + "\n")
