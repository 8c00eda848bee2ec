"""Declarative runs: configuration, orchestration and output files.

A run is a pure function of its JSON config and seed. Every CSV begins with a
``# vshell version=..., config_hash=..., seed=...`` line followed by a header.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .core import ScalingTriple, ShellParams, grid_from_radii, make_log_grid
from .dynamics import (
    DiagnosticsRecord,
    EvolveConfig,
    default_dt,
    evolve,
    picard_iterate,
    sample_shell,
    statistical_floor,
)
from .dynamics.integrator import deposit_density
from .ensemble import ParticleEnsemble, bin_density
from .errors import ConfigError, ConstraintViolation, InvalidArgument, InvariantViolation
from .functionals import (
    ansatz_state,
    energy_casimir,
    epot_bound_check,
    interpolation_check,
    model_state,
    norm_distance,
)
from .io import config_hash, ensure_dir, read_record, write_csv, write_ensemble, write_model
from .radial_poisson import (
    field_bound_ratio,
    field_distance,
    field_from_density,
    make_density,
    pairing_identity_check,
)
from .scaling import (
    RescaledState,
    direct_state,
    negative_energy_witness,
    rescaled_functionals,
    unit_mass_template,
)
from .steady_state import (
    ShellModel,
    SolveOptions,
    bracket,
    euler_lagrange_residual,
    inner_orbit_period,
    solve_shell,
)

__all__ = [
    "COMMANDS",
    "RunConfig",
    "Perturbation",
    "StabilityRow",
    "load_config",
    "parse_config",
    "solve_model",
    "apply_perturbation",
    "cmd_steady",
    "cmd_scalecheck",
    "cmd_evolve",
    "cmd_stability",
    "cmd_diagnose",
]

log = logging.getLogger(__name__)

COMMANDS = ("steady", "scalecheck", "evolve", "stability", "diagnose")
SCALE_TOLERANCE = 1e-5


@dataclass(frozen=True)
class GridSpec:
    r_min: float = 0.02
    r_max: float = 2.0
    count: int = 2000

    def build(self):
        return make_log_grid(self.r_min, self.r_max, self.count)


@dataclass(frozen=True)
class EvolveSpec:
    particles: int = 100_000
    periods: float = 10.0
    t_end: float | None = None
    dt: float | None = None
    dt_fraction: float = 0.01
    output_every: int = 10
    field_mode: str = "self-consistent"
    deposition_bins: int = 200
    picard_iterations: int = 4
    horizon_periods: float = 0.5
    snapshot_every: int = 1
    picard_field: str = "smooth"


@dataclass(frozen=True)
class ScaleSpec:
    triples: int = 10
    low: float = 0.5
    high: float = 2.0
    eta: float = 1.5
    witness_mass: float = 1.0
    quadrature_count: int = 20001


@dataclass(frozen=True)
class Perturbation:
    """``none``, ``rescale`` (b, c; a defaults to (bc)³) or ``kick`` (w -> (1+ε) w)."""

    kind: str = "none"
    b: float = 1.0
    c: float = 1.0
    a: float | None = None
    epsilon: float = 0.0
    weight_scale: float = 1.0
    label: str | None = None

    def __post_init__(self):
        if self.kind not in ("none", "rescale", "kick"):
            raise ConfigError(f"unknown perturbation kind {self.kind!r}")

    @property
    def name(self):
        if self.label:
            return self.label
        if self.kind == "rescale":
            return f"rescale_b{self.b:g}_c{self.c:g}"
        if self.kind == "kick":
            return f"kick_eps{self.epsilon:g}"
        return "none"


def _default_perturbations():
    return (
        Perturbation(),
        Perturbation("rescale", 1.001, 1.001),
        Perturbation("rescale", 1.01, 1.01),
        Perturbation("rescale", 1.1, 1.1),
        Perturbation("kick", epsilon=0.01),
    )


@dataclass(frozen=True)
class StabilitySpec:
    perturbations: tuple = field(default_factory=_default_perturbations)
    repetitions: int = 1
    particles: int = 20_000
    periods: float = 5.0
    output_every: int = 10


@dataclass(frozen=True)
class DiagnoseSpec:
    input: str | None = None
    samples: int = 10_000
    radii: tuple = (1.0, 5.0, 10.0, 100.0)
    bins: int = 200


@dataclass(frozen=True)
class RunConfig:
    shell: ShellParams
    solver: SolveOptions
    grid: GridSpec
    evolve: EvolveSpec
    scalecheck: ScaleSpec
    stability: StabilitySpec
    diagnose: DiagnoseSpec
    seed: int = 0
    raw: dict = field(default_factory=dict, repr=False)
    base_dir: Path = field(default=Path("."), repr=False)

    @property
    def digest(self) -> str:
        return config_hash(self.raw)


_SHELL_DEFAULTS = dict(k=1.0, l=1.0, L0=0.1, Mc=1.0, E0=-2.0, A=None)


def _section(cls, data, name, defaults=None):
    data = {} if data is None else data
    if not isinstance(data, dict):
        raise ConfigError(f"section {name!r} must be an object")
    allowed = {f.name for f in fields(cls)} if defaults is None else set(defaults)
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {name!r}: {sorted(unknown)}")
    values = dict(defaults or {})
    values.update(data)
    try:
        return cls(**values)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {name!r} section: {exc}") from exc


def parse_config(raw: dict, base_dir: Path = Path(".")) -> RunConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {"shell", "solver", "grid", "evolve", "scalecheck", "stability", "diagnose", "seed", "command"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    shell = _section(ShellParams, raw.get("shell"), "shell", _SHELL_DEFAULTS)
    stability_raw = dict(raw.get("stability") or {})
    if "perturbations" in stability_raw:
        items = stability_raw["perturbations"]
        if not isinstance(items, list):
            raise ConfigError("stability.perturbations must be a list")
        stability_raw["perturbations"] = tuple(_section(Perturbation, p, "perturbation") for p in items)
    diagnose_raw = dict(raw.get("diagnose") or {})
    if "radii" in diagnose_raw:
        diagnose_raw["radii"] = tuple(diagnose_raw["radii"])
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError(f"seed must be a nonnegative integer, got {seed!r}")
    cfg = RunConfig(
        shell=shell,
        solver=_section(SolveOptions, raw.get("solver"), "solver"),
        grid=_section(GridSpec, raw.get("grid"), "grid"),
        evolve=_section(EvolveSpec, raw.get("evolve"), "evolve"),
        scalecheck=_section(ScaleSpec, raw.get("scalecheck"), "scalecheck"),
        stability=_section(StabilitySpec, stability_raw, "stability"),
        diagnose=_section(DiagnoseSpec, diagnose_raw, "diagnose"),
        seed=seed,
        raw=raw,
        base_dir=Path(base_dir),
    )
    try:
        cfg.grid.build()
        EvolveConfig(dt=1.0, t_end=1.0, output_every=cfg.evolve.output_every, field_mode=cfg.evolve.field_mode,
                     deposition_bins=cfg.evolve.deposition_bins, picard_iterations=cfg.evolve.picard_iterations,
                     snapshot_every=cfg.evolve.snapshot_every)
        if cfg.evolve.picard_field not in ("smooth", "shells"):
            raise InvalidArgument(f"evolve.picard_field must be 'smooth' or 'shells', got {cfg.evolve.picard_field!r}")
    except InvalidArgument as exc:
        raise ConfigError(str(exc)) from exc
    return cfg


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_config(raw, path.parent)


def with_seed(cfg: RunConfig, seed: int | None) -> RunConfig:
    if seed is None:
        return cfg
    if seed < 0:
        raise ConfigError("seed must be nonnegative")
    return replace(cfg, seed=int(seed), raw={**cfg.raw, "seed": int(seed)})


def solve_model(cfg: RunConfig) -> ShellModel:
    return solve_shell(cfg.shell, cfg.grid.build(), cfg.solver)


def _csv(cfg, path, columns, rows):
    write_csv(path, columns, rows, cfg.digest, cfg.seed)
    return path


# steady ---------------------------------------------------------------------

def cmd_steady(cfg: RunConfig, out: Path) -> dict:
    out = ensure_dir(out)
    model = solve_model(cfg)
    write_model(out / "model.vshl", model)
    r = model.grid.radii
    g = bracket(model.params, r, model.field0.U)
    prof = zip(r, model.rho0.rho, model.field0.m, model.field0.U, g)
    _csv(cfg, out / "profile.csv", ["r", "rho0", "m", "U0", "g"], prof)
    rep = energy_casimir(model_state(model))
    res = euler_lagrange_residual(model, seed=cfg.seed)
    row = dict(E0=model.params.E0, R1=model.R1, R2=model.R2, iterations=model.iterations,
               **rep.as_dict(), el_residual_max=res.max, el_outside_violations=res.outside_violations)
    _csv(cfg, out / "report.csv", list(row), [list(row.values())])
    log.info("steady: mass %.6g, support [%.4g, %.4g], H_C %.6g", model.mass, model.R1, model.R2, rep.h_c)
    return row


# scalecheck -----------------------------------------------------------------

def _support_state(model: ShellModel, count: int):
    pad = 0.02 * (model.R2 - model.R1)
    grid = make_log_grid(max(model.R1 - pad, 0.5 * model.R1), model.R2 + pad, count)
    return ansatz_state(model.params, model.field0, grid)


def _rel(x, y):
    if x == y:
        return 0.0
    return abs(x - y) / max(abs(y), abs(x))


SCALE_KEYS = ("e_kin", "casimir", "e_pot", "mass")


def scale_rows(base, triples, count):
    """Closed form against direct quadrature on an independent linear grid."""
    lo, hi = base.grid.radii[0], base.grid.radii[-1]
    rows = []
    for t in triples:
        rs = RescaledState(base, t)
        closed = rescaled_functionals(rs).as_dict()
        fresh = grid_from_radii(np.linspace(lo / t.b, hi / t.b, count + 7))
        direct = energy_casimir(direct_state(rs, fresh)).as_dict()
        mapped = energy_casimir(direct_state(rs)).as_dict()
        row = dict(a=t.a, b=t.b, c=t.c)
        worst = worst_mapped = 0.0
        for key in SCALE_KEYS:
            err = _rel(closed[key], direct[key])
            err_m = _rel(closed[key], mapped[key])
            row[f"{key}_closed"] = closed[key]
            row[f"{key}_direct"] = direct[key]
            row[f"{key}_rel_err"] = err
            worst, worst_mapped = max(worst, err), max(worst_mapped, err_m)
        row["max_rel_err"] = worst
        row["max_rel_err_mapped"] = worst_mapped
        rows.append(row)
    return rows


def cmd_scalecheck(cfg: RunConfig, out: Path) -> dict:
    out = ensure_dir(out)
    spec = cfg.scalecheck
    model = solve_model(cfg)
    base = _support_state(model, spec.quadrature_count)
    rng = np.random.default_rng(cfg.seed)
    triples = [ScalingTriple(1.0, 1.0, 1.0)]
    triples += [ScalingTriple(*rng.uniform(spec.low, spec.high, 3)) for _ in range(spec.triples)]
    rows = scale_rows(base, triples, spec.quadrature_count)
    _csv(cfg, out / "scaling.csv", list(rows[0]), [list(r.values()) for r in rows])
    b, report = negative_energy_witness(spec.witness_mass, unit_mass_template(base), spec.eta)
    c = b ** (-spec.eta / 2.0)
    wrow = dict(M=spec.witness_mass, eta=spec.eta, b=b, c=c, bc=b * c, **report.as_dict())
    _csv(cfg, out / "witness.csv", list(wrow), [list(wrow.values())])
    worst = max(r["max_rel_err"] for r in rows)
    summary = dict(max_rel_err=worst, identity_rel_err=rows[0]["max_rel_err_mapped"], witness_b=b,
                   witness_h_c=report.h_c)
    if worst > SCALE_TOLERANCE:
        raise InvariantViolation(f"scaling identity error {worst:.3e} exceeds {SCALE_TOLERANCE:g}",
                                 reason="scaling-identity")
    return summary


# evolve ---------------------------------------------------------------------

def _evolve_config(cfg: RunConfig, model: ShellModel, ensemble: ParticleEnsemble, periods=None,
                   output_every=None, mode=None) -> EvolveConfig:
    spec = cfg.evolve
    dt = spec.dt if spec.dt is not None else default_dt(ensemble, spec.dt_fraction)
    if spec.t_end is not None and periods is None:
        t_end = spec.t_end
    else:
        t_end = (spec.periods if periods is None else periods) * inner_orbit_period(model)
    return EvolveConfig(dt=dt, t_end=t_end, output_every=output_every or spec.output_every,
                        field_mode=mode or spec.field_mode, deposition_bins=spec.deposition_bins,
                        picard_iterations=spec.picard_iterations, snapshot_every=spec.snapshot_every)


def cmd_evolve(cfg: RunConfig, out: Path) -> dict:
    out = ensure_dir(out)
    spec = cfg.evolve
    model = solve_model(cfg)
    ens = sample_shell(model, spec.particles, cfg.seed)
    floor = statistical_floor(ens)
    if spec.field_mode == "picard":
        ec = _evolve_config(cfg, model, ens, periods=spec.horizon_periods)
        result = picard_iterate(ens, ec.t_end, ec.picard_iterations, ec.dt, ec.snapshot_every,
                                field=spec.picard_field)
        rows = []
        for n, it in enumerate(result.iterates):
            _, shells = deposit_density(it, spec.deposition_bins)
            gap = result.gaps[n - 1] if n else float("nan")
            rows.append([n, gap, field_distance(shells, model.field0)])
        _csv(cfg, out / "picard.csv", ["iteration", "gap", "field_dist"], rows)
        write_ensemble(out / "final.vshl", result.iterates[-1])
        return dict(gaps=result.gaps, dt=ec.dt, horizon=ec.t_end, statistical_floor=floor)
    ec = _evolve_config(cfg, model, ens)
    records = evolve(ens, model, ec)
    _csv(cfg, out / "diagnostics.csv", DiagnosticsRecord.columns(), [r.row() for r in records])
    write_ensemble(out / "final.vshl", ens)
    H0 = records[0].H
    return dict(
        dt=ec.dt,
        steps=ec.steps,
        H_drift=max(abs(r.H - H0) for r in records) / abs(H0),
        max_field_dist=max(r.field_dist for r in records),
        statistical_floor=floor,
        min_d=min(r.d_f_f0 for r in records),
        max_field_bound_ratio=max(r.field_bound_ratio for r in records),
    )


# stability ------------------------------------------------------------------

def apply_perturbation(ensemble: ParticleEnsemble, pert: Perturbation) -> ParticleEnsemble:
    """Perturbed copy of ``ensemble``; raises ConstraintViolation outside the constraint set."""
    p = ensemble.params
    if pert.weight_scale != 1.0:
        raise ConstraintViolation(f"weight scale {pert.weight_scale} changes the mass", reason="mass")
    if pert.kind == "rescale":
        bc = pert.b * pert.c
        a = bc**3 if pert.a is None else pert.a
        mass_factor = a * bc**-3
        if abs(mass_factor - 1.0) > 1e-12:
            raise ConstraintViolation(f"rescaling with a = {a}, bc = {bc} changes the mass by {mass_factor:.6g}",
                                      reason="mass")
        # the rescaled density is carried by the image points with unchanged weights
        r = ensemble.r / pert.b
        w = ensemble.w / pert.c
        L = (ensemble.L + (bc * bc - 1.0) * p.L0) / (bc * bc)
        f_value = a * ensemble.f_value
    elif pert.kind == "kick":
        # w -> (1+ε) w stretches the w-measure, so f drops by the same factor
        r, w, L = ensemble.r.copy(), (1.0 + pert.epsilon) * ensemble.w, ensemble.L
        f_value = ensemble.f_value / abs(1.0 + pert.epsilon)
    else:
        r, w, L, f_value = ensemble.r.copy(), ensemble.w.copy(), ensemble.L, ensemble.f_value
    if np.any(L < p.L0):
        raise ConstraintViolation("perturbation moves particles below L0", reason="L0")
    out = ParticleEnsemble(r, w, L, ensemble.weight, f_value, ensemble.total_mass, ensemble.seed, p)
    if float(np.sum(out.weight)) != float(np.sum(ensemble.weight)):
        raise ConstraintViolation("perturbation changed the total mass", reason="mass")
    return out


@dataclass(frozen=True)
class StabilityRow:
    label: str
    kind: str
    repetition: int
    status: str
    initial_size: float
    sup_response: float
    sup_norm_distance: float
    statistical_floor: float
    series: str


def cmd_stability(cfg: RunConfig, out: Path) -> list[StabilityRow]:
    out = ensure_dir(out)
    spec = cfg.stability
    model = solve_model(cfg)
    rows = []
    for rep in range(spec.repetitions):
        seed = cfg.seed + rep
        base = sample_shell(model, spec.particles, seed)
        floor = statistical_floor(base)
        for pert in spec.perturbations:
            name = f"{pert.name}_rep{rep}"
            try:
                ens = apply_perturbation(base, pert)
            except ConstraintViolation as exc:
                log.warning("perturbation %s rejected: %s", name, exc)
                rows.append(StabilityRow(pert.name, pert.kind, rep, f"rejected:{exc.reason}", math.nan, math.nan,
                                         math.nan, floor, ""))
                continue
            ec = _evolve_config(cfg, model, ens, periods=spec.periods, output_every=spec.output_every,
                                mode="self-consistent")
            norms = []
            records = evolve(ens, model, ec, callback=lambda rec, e=ens: norms.append(norm_distance(e, model)))
            series = f"series_{name}.csv"
            _csv(cfg, out / series, DiagnosticsRecord.columns() + ["knorm_distance"],
                 [r.row() + [nd] for r, nd in zip(records, norms)])
            response = [r.d_f_f0 + r.field_dist for r in records]
            rows.append(StabilityRow(pert.name, pert.kind, rep, "ok", response[0], max(response), max(norms),
                                     floor, series))
    rows.sort(key=lambda row: (math.isnan(row.initial_size), row.initial_size))
    _csv(cfg, out / "stability.csv", [f.name for f in fields(StabilityRow)], [list(asdict(r).values()) for r in rows])
    return rows


# diagnose -------------------------------------------------------------------

def _check(rows, name, value, passed, detail=""):
    rows.append([name, value, "pass" if passed else "FAIL", detail])


def diagnose_model(model: ShellModel, spec: DiagnoseSpec, seed: int):
    rows = []
    p = model.params
    density = model.rho0
    if density.total_mass == 0.0:
        for name in ("interpolation_ratio", "epot_bound", "pairing_identity", "field_bound_ratio"):
            _check(rows, name, 0.0, True, "vacuum")
        return rows
    state = model_state(model)
    lhs, rhs, ratio = interpolation_check(state)
    _check(rows, "interpolation_ratio", ratio, math.isfinite(ratio) and ratio > 0.0, f"lhs={lhs!r} rhs={rhs!r}")
    _epot_rows(rows, density, p, spec.radii)
    _pairing_rows(rows, density)
    ratio = field_bound_ratio(density)
    _check(rows, "field_bound_ratio", ratio, ratio <= 1.05)
    if model.generating_field is not None:
        res = euler_lagrange_residual(model, spec.samples, seed)
        _check(rows, "el_residual_max", res.max, res.max <= 1e-5, f"mean={res.mean!r} samples={res.samples}")
        _check(rows, "el_outside_violations", res.outside_violations, res.outside_violations == 0,
               f"samples={res.outside_samples}")
    return rows


def _epot_rows(rows, density, p, radii):
    for R in radii:
        lhs, mid, rhs = epot_bound_check(density, p.Mc, float(R), p)
        _check(rows, f"epot_bound_R{R:g}", lhs - mid, lhs <= mid * (1.0 + 1e-12) + 1e-300,
               f"lhs={lhs!r} mid={mid!r} zeta_form={rhs!r}")


def _pairing_rows(rows, density):
    # pair the density with itself and with a smooth bump on the same grid
    r = density.grid.radii
    centre, width = r[np.argmax(density.rho)], 0.25 * (r[-1] - r[0])
    bump = make_density(density.grid, np.exp(-(((r - centre) / width) ** 2)))
    for label, other in (("self", density), ("bump", bump)):
        lhs, rhs = pairing_identity_check(density, other)
        err = _rel(lhs, rhs)
        _check(rows, f"pairing_identity_{label}", err, err <= 1e-6, f"lhs={lhs!r} rhs={rhs!r}")


def diagnose_ensemble(ens: ParticleEnsemble, spec: DiagnoseSpec):
    rows = []
    p = ens.params
    if p is None:
        raise ConfigError("ensemble record carries no shell parameters")
    if float(np.sum(ens.weight)) == 0.0:
        for name in ("interpolation_ratio", "epot_bound", "field_bound_ratio", "rmin_p"):
            _check(rows, name, 0.0, True, "vacuum")
        return rows
    lhs, rhs, ratio = interpolation_check(ens, p, spec.bins)
    _check(rows, "interpolation_ratio", ratio, math.isfinite(ratio), f"lhs={lhs!r} rhs={rhs!r}")
    density = bin_density(ens, spec.bins)
    _epot_rows(rows, density, p, spec.radii)
    _pairing_rows(rows, density)
    ratio = field_bound_ratio(density)
    _check(rows, "field_bound_ratio", ratio, ratio <= 1.05)
    product = float(ens.r.min() * ens.speeds().max())
    _check(rows, "rmin_times_p", product, product >= math.sqrt(p.L0) * (1.0 - 1e-12), f"sqrt_L0={math.sqrt(p.L0)!r}")
    _check(rows, "min_L_minus_L0", float(ens.L.min() - p.L0), bool(ens.L.min() >= p.L0))
    return rows


def cmd_diagnose(cfg: RunConfig, out: Path) -> list:
    out = ensure_dir(out)
    spec = cfg.diagnose
    if spec.input:
        record = read_record(cfg.base_dir / spec.input)
    else:
        record = solve_model(cfg)
    if isinstance(record, ShellModel):
        rows = diagnose_model(record, spec, cfg.seed)
    else:
        rows = diagnose_ensemble(record, spec)
    _csv(cfg, out / "diagnose.csv", ["check", "value", "status", "detail"], rows)
    failed = [r[0] for r in rows if r[2] != "pass"]
    if failed:
        raise InvariantViolation(f"diagnostic checks failed: {failed}", reason="diagnose")
    return rows


RUNNERS = {
    "steady": cmd_steady,
    "scalecheck": cmd_scalecheck,
    "evolve": cmd_evolve,
    "stability": cmd_stability,
    "diagnose": cmd_diagnose,
}
