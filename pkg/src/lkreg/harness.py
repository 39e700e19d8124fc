"""Experiment harness: config files, presets, problem assembly, outputs.

Config files are flat ``key = value`` text; ``#`` starts a comment and blank
lines are ignored.  Keys are typed against the schema below and unknown keys
are rejected.  A run writes into its output directory:

* ``metrics.csv``   one row per outer iterate with the exact column set
  ``n, i_n, residual_norm, mu_tilde, mu, eps_n, inner_iterations,
  rel_error, q_n`` (rel_error left empty without ground truth),
* ``trace.csv``     the same rows plus the Bregman distance to the truth,
* ``recon.pgm``     the final iterate as a binary 8-bit PGM, min-max scaled,
* ``summary.json``  termination status and final figures.

Runs are deterministic: the only randomness is the seeded portable noise
stream, so identical config plus seed reproduces metrics.csv byte for byte.
"""

import dataclasses
import json
import math
import os
import time
from dataclasses import dataclass

import numpy as np

from . import elliptic, tomo
from .engine import ForwardProblem, SolverConfig, run, validate_config
from .penalty import NonnegativityConstraint, QuadraticPenalty, TotalVariationPenalty


class ConfigError(Exception):
    """Raised for malformed, unknown, or out-of-range configuration input."""


_CHOICES = {
    "problem": ("ct", "pde", "custom-linear"),
    "mode": ("plain", "accelerated"),
    "penalty": ("quadratic", "quadratic+TV"),
    "constraint": ("none", "nonneg"),
}


@dataclass
class ExperimentConfig:
    """Typed experiment description; fields double as the config-file keys."""

    problem: str = "ct"
    mode: str = "plain"
    penalty: str = "quadratic+TV"
    constraint: str = "nonneg"
    mu: float = 1.0
    p: float = 2.0
    s: float = 2.0
    beta0: float = 0.1
    beta1: float = 10.0
    sigma: float = 1e-3
    tau: float = 1.01
    alpha: float = 5.0
    eta0: float = 1.0
    gap_exponent: float = 2.2
    eps_floor: float = 1e-14
    n_max: int = 1000
    n_blocks: int = 1
    inner_max_iter: int = 5000
    noise_rel: float = 0.0
    seed: int = 1
    ct_q: int = 64
    ct_angles: int = 30
    ct_angle_start: float = 0.0
    ct_angle_step: float = 0.0
    ct_rays: int = 0
    ct_detector_spacing: float = 1.0
    pde_m: int = 40
    matrix_path: str = ""
    truth_path: str = ""
    out_dir: str = "out"
    metric_every: int = 1

    def __post_init__(self):
        for key, allowed in _CHOICES.items():
            if getattr(self, key) not in allowed:
                raise ConfigError(
                    f"{key} must be one of {', '.join(allowed)}; got {getattr(self, key)!r}"
                )
        positive = ("mu", "tau", "beta0", "beta1", "sigma", "eta0", "eps_floor")
        for key in positive:
            if not getattr(self, key) > 0.0:
                raise ConfigError(f"{key} must be positive")
        if self.noise_rel < 0.0:
            raise ConfigError("noise_rel must be nonnegative")
        if self.n_max < 0:
            raise ConfigError("n_max must be nonnegative")
        for key in ("n_blocks", "inner_max_iter", "metric_every", "ct_q", "ct_angles",
                    "ct_rays", "pde_m"):
            if getattr(self, key) < (0 if key == "ct_rays" else 1):
                raise ConfigError(f"{key} is out of range")

    def solver_config(self, delta=0.0):
        try:
            return SolverConfig(
                p=self.p, s=self.s, beta0=self.beta0, beta1=self.beta1,
                sigma=self.sigma, tau=self.tau, alpha=self.alpha, delta=delta,
                eta0=self.eta0, gap_exponent=self.gap_exponent,
                eps_floor=self.eps_floor, n_max=self.n_max,
                n_blocks=self.n_blocks, inner_max_iter=self.inner_max_iter,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def penalty_object(self):
        constraint = NonnegativityConstraint() if self.constraint == "nonneg" else None
        if self.penalty == "quadratic":
            return QuadraticPenalty(mu=self.mu, constraint=constraint)
        return TotalVariationPenalty(mu=self.mu, constraint=constraint)


_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


PRESETS = {
    "ct-paper": {
        "problem": "ct", "ct_q": 256, "ct_angles": 45, "ct_angle_start": 1.0,
        "ct_angle_step": 4.0, "ct_rays": 367, "mu": 1.0, "constraint": "nonneg",
        "beta0": 0.1, "beta1": 10.0, "sigma": 1e-3, "tau": 1.01, "alpha": 5.0,
        "gap_exponent": 2.2, "noise_rel": 0.01, "n_max": 10000,
    },
    "ct-desk": {
        "problem": "ct", "ct_q": 64, "ct_angles": 30, "ct_angle_start": 0.0,
        "ct_angle_step": 6.0, "ct_rays": 0, "mu": 1.0, "constraint": "nonneg",
        "beta0": 0.1, "beta1": 10.0, "sigma": 1e-3, "tau": 1.01, "alpha": 5.0,
        "gap_exponent": 2.2, "noise_rel": 0.01, "n_max": 5000,
    },
    "pde-paper": {
        "problem": "pde", "pde_m": 100, "mu": 20.0, "constraint": "none",
        "beta0": 5e-4, "beta1": 2e4, "sigma": 1e-3, "tau": 1.02, "alpha": 5.0,
        "gap_exponent": 1.5, "noise_rel": 0.00046, "n_max": 10000,
    },
    "pde-desk": {
        "problem": "pde", "pde_m": 40, "mu": 20.0, "constraint": "none",
        "beta0": 5e-4, "beta1": 2e4, "sigma": 1e-3, "tau": 1.02, "alpha": 5.0,
        "gap_exponent": 1.5, "noise_rel": 0.0, "n_max": 100,
    },
}


def parse_config_text(text, source="<config>"):
    """Parse flat ``key = value`` lines into a raw string dict (strict)."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        key, value = (part.strip() for part in stripped.split("=", 1))
        if not key or not value:
            raise ConfigError(f"{source}:{lineno}: empty key or value")
        if key in raw:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        raw[key] = value
    return raw


def _convert(key, value):
    if key not in _FIELD_TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    target = _FIELD_TYPES[key]
    if target in ("str", str):
        return value
    try:
        if target in ("int", int):
            return int(value)
        return float(value)
    except ValueError as exc:
        raise ConfigError(f"config key {key!r}: cannot parse {value!r}") from exc


def make_config(preset=None, config_path=None, **overrides):
    """Combine preset, config file, and keyword overrides into a config.

    Later sources win: preset values first, then the file, then overrides
    (used for CLI flags such as --seed and --out).
    """
    merged = {}
    if preset is not None:
        if preset not in PRESETS:
            raise ConfigError(
                f"unknown preset {preset!r}; available: {', '.join(sorted(PRESETS))}"
            )
        merged.update(PRESETS[preset])
    if config_path is not None:
        try:
            with open(config_path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        raw = parse_config_text(text, source=str(config_path))
        for key, value in raw.items():
            merged[key] = _convert(key, value)
    for key, value in overrides.items():
        if value is not None:
            if key not in _FIELD_TYPES:
                raise ConfigError(f"unknown config key {key!r}")
            merged[key] = value
    try:
        return ExperimentConfig(**merged)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def ct_geometry(cfg):
    angles = tomo.evenly_spaced_angles(
        cfg.ct_angles, cfg.ct_angle_start,
        cfg.ct_angle_step if cfg.ct_angle_step > 0.0 else None,
    )
    try:
        return tomo.TomoGeometry(
            q=cfg.ct_q, angles=angles, n_rays=cfg.ct_rays,
            detector_spacing=cfg.ct_detector_spacing,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


class MatrixProblem(ForwardProblem):
    """Plain linear problem A x = y on a grid-shaped unknown."""

    def __init__(self, matrix, data, domain_shape, n_blocks=1):
        rows = matrix.shape[0]
        if matrix.shape[1] != domain_shape[0] * domain_shape[1]:
            raise ValueError("matrix width disagrees with the domain shape")
        data = np.asarray(data, dtype=float).ravel()
        if data.size != rows:
            raise ValueError("data length disagrees with the matrix")
        if not 1 <= n_blocks <= rows:
            raise ValueError("block count out of range")
        self.matrix = matrix.tocsr()
        self.num_blocks = n_blocks
        self.domain_shape = domain_shape
        splits = np.array_split(np.arange(rows), n_blocks)
        self._slices = [slice(s[0], s[-1] + 1) for s in splits]
        self._blocks = [self.matrix[s] for s in self._slices]
        self._data = [data[s] for s in self._slices]

    def apply(self, i, x):
        return self._blocks[i] @ np.asarray(x).ravel()

    def derivative(self, i, x, h):
        return self.apply(i, h)

    def adjoint(self, i, x, w):
        return (self._blocks[i].T @ np.asarray(w, dtype=float).ravel()).reshape(
            self.domain_shape
        )

    def data(self, i):
        return self._data[i]


def load_grid(path):
    """Read a dense grid: header ``rows cols`` then row-major values."""
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ConfigError(f"{path}: expected 'rows cols' header")
        r, c = int(header[0]), int(header[1])
        values = np.loadtxt(fh).ravel()
    if values.size != r * c:
        raise ConfigError(f"{path}: expected {r * c} values, found {values.size}")
    return values.reshape(r, c)


def save_grid(path, grid):
    grid = np.asarray(grid, dtype=float)
    with open(path, "w") as fh:
        fh.write(f"{grid.shape[0]} {grid.shape[1]}\n")
        for row in grid:
            fh.write(" ".join(f"{v:.17g}" for v in row) + "\n")


def build_problem(cfg):
    """Assemble (problem, truth, delta_abs) for the configured experiment."""
    if cfg.problem == "ct":
        geom = ct_geometry(cfg)
        matrix = tomo.build_parallel_tomo(geom)
        truth = tomo.shepp_logan(cfg.ct_q)
        clean = matrix @ truth.ravel()
        data, delta_abs = tomo.add_relative_gaussian_noise(clean, cfg.noise_rel, cfg.seed)
        return tomo.TomoProblem(matrix, data, geom, n_blocks=cfg.n_blocks), truth, delta_abs
    if cfg.problem == "pde":
        mesh, f, g, truth = elliptic.default_problem(cfg.pde_m)
        if cfg.n_blocks != 1:
            raise ConfigError("the PDE problem is single-block; set n_blocks = 1")
        clean = elliptic.solve_state(truth, mesh, f, g)
        data, delta_abs = tomo.add_relative_gaussian_noise(clean, cfg.noise_rel, cfg.seed)
        return elliptic.EllipticProblem(mesh, f, g, data), truth, delta_abs
    # custom-linear
    if not cfg.matrix_path or not cfg.truth_path:
        raise ConfigError("custom-linear needs matrix_path and truth_path")
    try:
        matrix = tomo.load_matrix_coo(cfg.matrix_path)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot load matrix: {exc}") from exc
    try:
        truth = load_grid(cfg.truth_path)
    except OSError as exc:
        raise ConfigError(f"cannot load truth grid: {exc}") from exc
    clean = matrix @ truth.ravel()
    data, delta_abs = tomo.add_relative_gaussian_noise(clean, cfg.noise_rel, cfg.seed)
    problem = MatrixProblem(matrix, data, truth.shape, n_blocks=cfg.n_blocks)
    return problem, truth, delta_abs


def _csv_cell(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return repr(v)


METRICS_COLUMNS = (
    "n", "i_n", "residual_norm", "mu_tilde", "mu", "eps_n",
    "inner_iterations", "rel_error", "q_n",
)


def write_metrics(path, trace):
    """Write the per-iterate metrics table with its fixed column set."""
    with open(path, "w", newline="") as fh:
        fh.write(",".join(METRICS_COLUMNS) + "\n")
        for rec in trace.records:
            cells = (
                rec.n, rec.i_n, rec.residual_norm, rec.mu_tilde, rec.mu,
                rec.eps_n, rec.inner_iterations, rec.rel_error, rec.q_n,
            )
            fh.write(",".join(_csv_cell(c) for c in cells) + "\n")


def write_trace(path, trace):
    columns = METRICS_COLUMNS + ("bregman_to_truth",)
    with open(path, "w", newline="") as fh:
        fh.write(",".join(columns) + "\n")
        for rec in trace.records:
            cells = (
                rec.n, rec.i_n, rec.residual_norm, rec.mu_tilde, rec.mu,
                rec.eps_n, rec.inner_iterations, rec.rel_error, rec.q_n,
                rec.bregman_to_truth,
            )
            fh.write(",".join(_csv_cell(c) for c in cells) + "\n")


def write_pgm(path, grid):
    """Write a grid as binary 8-bit PGM, affinely scaled to 0..255.

    A constant grid maps to all zeros.
    """
    grid = np.asarray(grid, dtype=float)
    lo, hi = float(grid.min()), float(grid.max())
    if hi > lo:
        scaled = np.round((grid - lo) / (hi - lo) * 255.0)
    else:
        scaled = np.zeros_like(grid)
    data = scaled.astype(np.uint8)
    height, width = grid.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{width} {height}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def run_experiment(cfg, out_dir=None):
    """Execute one configured run and write its artifacts.

    Returns (pair, trace, summary).  Output goes to `out_dir` (default
    cfg.out_dir), which is created if missing.
    """
    out = out_dir if out_dir is not None else cfg.out_dir
    os.makedirs(out, exist_ok=True)
    problem, truth, delta_abs = build_problem(cfg)
    solver_cfg = cfg.solver_config(delta=delta_abs)
    pen = cfg.penalty_object()
    started = time.perf_counter()
    pair, trace = run(
        problem, pen, solver_cfg, mode=cfg.mode, truth=truth,
        diag_every=cfg.metric_every,
    )
    elapsed = time.perf_counter() - started
    last = trace.records[-1] if trace.records else None
    summary = {
        "problem": cfg.problem,
        "mode": cfg.mode,
        "terminated_by": trace.terminated_by,
        "n_final": trace.n_final,
        "delta_abs": delta_abs,
        "residual_final": last.residual_norm if last else None,
        "eps_final": last.eps_n if last else None,
        "rel_error_final": last.rel_error if last else None,
        "runtime_seconds": elapsed,
        "records": len(trace.records),
        "seed": cfg.seed,
    }
    write_metrics(os.path.join(out, "metrics.csv"), trace)
    write_trace(os.path.join(out, "trace.csv"), trace)
    write_pgm(os.path.join(out, "recon.pgm"), pair.x)
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return pair, trace, summary


def validation_lines(cfg):
    """Human-readable admissibility report for a configured experiment."""
    solver_cfg = cfg.solver_config(delta=1.0 if cfg.noise_rel > 0.0 else 0.0)
    pen = cfg.penalty_object()
    report = validate_config(solver_cfg, c0=pen.c0)
    lines = [
        f"problem = {cfg.problem}, penalty = {cfg.penalty}, mode = {cfg.mode}",
        f"kappa = {report.kappa:g}",
        f"kappa * beta1 * sigma = {report.kappa_beta1_sigma:g} "
        f"({'ok' if report.step_cap_ok else 'VIOLATED'})",
    ]
    if report.c1 is not None:
        lines.append(f"c1 = {report.c1:g} ({'ok' if report.c1_ok else 'not positive'})")
    for warning in report.warnings:
        lines.append(f"warning: {warning}")
    if not report.warnings:
        lines.append("no warnings")
    return lines
