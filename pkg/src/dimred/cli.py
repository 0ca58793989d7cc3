"""Command-line driver: one reconstruction run or a sweep, with artifacts on disk.

Exit codes: 0 success, 2 invalid configuration, 3 blow-up during the march
(partial artifacts are still written), 4 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import mpmath
import numpy as np

from .basis1d import MAX_BASIS_SIZE
from .ivp import INTEGRATORS
from .problems import NoiseSpec, builtin
from .reduction import phi_misfit
from .report import atomic_write, depth_profile, field_binary, field_csv, format_report
from .solver import DEFAULT_MAX_CUTOFF, DEFAULT_PHI_THRESHOLD, SolveResult, solve

log = logging.getLogger(__name__)

EXIT_OK, EXIT_CONFIG, EXIT_BLOWUP, EXIT_IO = 0, 2, 3, 4
SWEEPS = ("noise", "cutoff", "depth")
FIELD_FORMATS = ("auto", "csv", "binary", "both")
DEFAULT_NOISE_LEVELS = (0.0, 0.05, 0.10)
DEFAULT_CUTOFF_RANGE = (5, 30)
PACKAGE_VERSION = "0.1.0"


class ConfigError(ValueError):
    """Invalid run configuration."""


@dataclass
class RunConfig:
    test_id: int = 1
    noise: float = 0.0
    seed: int = 0
    cutoffs: tuple[int, ...] | str | None = None
    phi_threshold: float = DEFAULT_PHI_THRESHOLD
    max_cutoff: int = DEFAULT_MAX_CUTOFF
    integrator: str = "rk4"
    rtol: float = 1e-6
    atol: float = 1e-9
    nx: int | None = None
    ny: int | None = None
    nt: int | None = None
    out: str = "results"
    sweep: str | None = None
    sweep_values: tuple[float, ...] | None = None
    field_format: str = "auto"
    printed: bool = False

    def validate(self):
        """Raise ConfigError before any computation when a field is out of range."""
        if self.test_id not in (1, 2, 3, 4):
            raise ConfigError(f"--test must be 1-4, got {self.test_id}")
        if not 0.0 <= self.noise < 1.0:
            raise ConfigError(f"--noise must lie in [0, 1), got {self.noise}")
        if not 0.0 < self.phi_threshold < 1.0:
            raise ConfigError(f"--phi-threshold must lie in (0, 1), got {self.phi_threshold}")
        if not 1 <= self.max_cutoff <= MAX_BASIS_SIZE:
            raise ConfigError(f"max cutoff must lie in [1, {MAX_BASIS_SIZE}]")
        if self.integrator not in INTEGRATORS:
            raise ConfigError(f"--integrator must be one of {INTEGRATORS}")
        if self.rtol <= 0 or self.atol <= 0:
            raise ConfigError("integrator tolerances must be positive")
        for name in ("nx", "ny", "nt"):
            v = getattr(self, name)
            if v is not None and v < 3:
                raise ConfigError(f"--{name} must be at least 3")
        dim = builtin(self.test_id).dim
        if self.ny is not None and dim == 1:
            raise ConfigError("--ny only applies to two-dimensional tests")
        if isinstance(self.cutoffs, str) and self.cutoffs != "auto":
            raise ConfigError(f"--cutoffs must be 'auto' or a list, got {self.cutoffs!r}")
        if isinstance(self.cutoffs, tuple):
            if len(self.cutoffs) != dim:
                raise ConfigError(f"test {self.test_id} needs {dim} cutoffs, got {len(self.cutoffs)}")
            if not all(1 <= c <= MAX_BASIS_SIZE for c in self.cutoffs):
                raise ConfigError(f"cutoffs must lie in [1, {MAX_BASIS_SIZE}]")
        if self.sweep is not None and self.sweep not in SWEEPS:
            raise ConfigError(f"--sweep must be one of {SWEEPS}")
        if self.sweep == "noise" and self.sweep_values is not None:
            if not all(0.0 <= v < 1.0 for v in self.sweep_values):
                raise ConfigError("noise sweep levels must lie in [0, 1)")
        if self.sweep == "cutoff" and self.sweep_values is not None:
            if not all(float(v).is_integer() and 1 <= v <= MAX_BASIS_SIZE for v in self.sweep_values):
                raise ConfigError(f"cutoff sweep values must be integers in [1, {MAX_BASIS_SIZE}]")
        if self.field_format not in FIELD_FORMATS:
            raise ConfigError(f"field format must be one of {FIELD_FORMATS}")

    @property
    def effective_seed(self) -> int | None:
        """The seed only matters with noise; recorded as None otherwise."""
        return self.seed if self.noise > 0 or self.sweep == "noise" else None

    def echo(self) -> dict:
        d = asdict(self)
        d["seed"] = self.effective_seed
        d["cutoffs"] = list(self.cutoffs) if isinstance(self.cutoffs, tuple) else self.cutoffs
        d["sweep_values"] = list(self.sweep_values) if self.sweep_values is not None else None
        d.pop("out")
        return d


@dataclass
class RunOutcome:
    status: int
    out_dir: Path
    artifacts: list[str] = field(default_factory=list)
    result: SolveResult | None = None
    message: str = ""


def _parse_cutoffs(text: str) -> tuple[int, ...] | str:
    if text == "auto":
        return "auto"
    try:
        return tuple(int(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"cutoffs must be 'auto' or integers, got {text!r}") from None


def _parse_values(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a list of numbers, got {text!r}") from None


def versions() -> dict:
    return {"package": PACKAGE_VERSION, "python": platform.python_version(),
            "numpy": np.__version__, "mpmath": mpmath.__version__}


def _solve(config: RunConfig, noise: float | None = None, seed: int | None = None,
           cutoffs=None) -> SolveResult:
    problem = builtin(config.test_id, printed=config.printed)
    n_transverse = None if config.ny is None else [config.ny] * (problem.dim - 1)
    grid = problem.grid(config.nx, n_transverse, config.nt)
    spec = NoiseSpec(config.noise if noise is None else noise, config.seed if seed is None else seed)
    return solve(problem, grid, config.cutoffs if cutoffs is None else cutoffs, spec, config.integrator,
                 config.phi_threshold, config.max_cutoff, config.rtol, config.atol)


def _write(out_dir: Path, name: str, data, artifacts: list[str]):
    atomic_write(out_dir / name, data)
    artifacts.append(name)


def _manifest(config: RunConfig, wall: float, artifacts: list[str], extra: dict | None = None) -> str:
    body = {"config": config.echo(), "versions": versions(), "seed": config.effective_seed,
            "artifacts": sorted(artifacts), "wall_time_seconds": round(wall, 6)}
    body.update(extra or {})
    return json.dumps(body, indent=2, sort_keys=True) + "\n"


def _csv_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(["NA" if v is None or (isinstance(v, float) and not np.isfinite(v)) else
                    repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def _report_entries(config: RunConfig, res: SolveResult) -> dict:
    entries = {"test": config.test_id, "noise": float(config.noise), "seed": config.effective_seed,
               "cutoffs": list(res.cutoffs), "integrator": config.integrator,
               "grid": list(res.grid.shape), "depth_reached": float(res.trajectory.x[-1]),
               "blowup_depth": res.trajectory.blowup_depth}
    if res.selection is not None:
        entries["phi"] = res.selection.phi
        entries["phi_threshold"] = res.selection.threshold
        entries["phi_threshold_reached"] = str(res.selection.reached).lower()
    if res.errors is not None:
        entries.update(res.errors.as_dict())
    return entries


def _phi_table(res: SolveResult) -> str:
    rows = []
    for sw in res.selection.sweeps:
        for n, ph in zip(sw["cutoffs"], sw["phi"]):
            rows.append((sw["axis"], n, float(ph), int(n == sw["chosen"])))
    return _csv_table(["axis", "cutoff", "phi", "chosen"], rows)


def _field_artifacts(config: RunConfig, res: SolveResult, out_dir: Path, artifacts: list[str]):
    fmt = config.field_format
    if fmt == "auto":
        fmt = "csv" if res.grid.dim == 1 else "binary"
    if fmt in ("csv", "both"):
        _write(out_dir, "field.csv", field_csv(res.field, res.problem.true_solution), artifacts)
    if fmt in ("binary", "both"):
        _write(out_dir, "field.shd", field_binary(res.field), artifacts)


def run(config: RunConfig) -> RunOutcome:
    """Choose cutoffs, project the data, march, reconstruct and write artifacts."""
    out_dir = Path(config.out)
    try:
        config.validate()
    except ConfigError as exc:
        return RunOutcome(EXIT_CONFIG, out_dir, message=str(exc))
    if config.sweep is not None:
        return sweep(config, config.sweep)
    start = time.perf_counter()
    artifacts: list[str] = []
    try:
        res = _solve(config)
    except ValueError as exc:
        return RunOutcome(EXIT_CONFIG, out_dir, message=str(exc))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        _field_artifacts(config, res, out_dir, artifacts)
        _write(out_dir, "report.txt", format_report(_report_entries(config, res)), artifacts)
        if res.selection is not None:
            _write(out_dir, "phi_sweep.csv", _phi_table(res), artifacts)
        wall = time.perf_counter() - start
        _write(out_dir, "manifest.json", _manifest(config, wall, artifacts + ["manifest.json"],
                                                  {"cutoffs": list(res.cutoffs)}), artifacts)
    except OSError as exc:
        return RunOutcome(EXIT_IO, out_dir, artifacts, res, f"cannot write artifacts: {exc}")
    if not res.trajectory.complete:
        return RunOutcome(EXIT_BLOWUP, out_dir, artifacts, res,
                          f"blow-up after x={res.trajectory.blowup_depth:g}; partial field written")
    return RunOutcome(EXIT_OK, out_dir, artifacts, res)


def _error_row(res: SolveResult) -> list:
    e = res.errors
    return [e.relative_l2, e.relative_l2_full, e.relative_linf, res.trajectory.blowup_depth]


def sweep(config: RunConfig, axis: str) -> RunOutcome:
    """Run the pipeline across ``axis`` and write one CSV row per point."""
    out_dir = Path(config.out)
    try:
        config.validate()
        if axis not in SWEEPS:
            raise ConfigError(f"sweep axis must be one of {SWEEPS}")
    except ConfigError as exc:
        return RunOutcome(EXIT_CONFIG, out_dir, message=str(exc))
    start = time.perf_counter()
    artifacts: list[str] = []
    blowups = 0
    try:
        if axis == "noise":
            levels = config.sweep_values or DEFAULT_NOISE_LEVELS
            header = ["noise", "seed", "relative_l2", "relative_l2_full", "relative_linf", "blowup_depth"]
            rows = []
            for level in levels:
                res = _solve(config, noise=level)
                blowups += not res.trajectory.complete
                rows.append([float(level), config.seed if level > 0 else None] + _error_row(res))
        elif axis == "cutoff":
            problem = builtin(config.test_id)
            lo, hi = DEFAULT_CUTOFF_RANGE
            values = [int(v) for v in config.sweep_values] if config.sweep_values else list(range(lo, hi + 1))
            base = tuple(config.cutoffs) if isinstance(config.cutoffs, tuple) else problem.cutoffs
            header = ["time_cutoff", "phi", "relative_l2", "relative_l2_full", "relative_linf", "blowup_depth"]
            rows = []
            for n in values:
                cut = tuple(base[:-1]) + (n,)
                res = _solve(config, cutoffs=cut)
                blowups += not res.trajectory.complete
                rows.append([n, phi_misfit(res.data[0], cut)] + _error_row(res))
        else:
            res = _solve(config)
            blowups += not res.trajectory.complete
            header = ["depth", "relative_l2"]
            rows = depth_profile(res.field, res.problem.true_solution, res.problem.report_time)
    except ValueError as exc:
        return RunOutcome(EXIT_CONFIG, out_dir, message=str(exc))
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        _write(out_dir, f"sweep_{axis}.csv", _csv_table(header, rows), artifacts)
        wall = time.perf_counter() - start
        _write(out_dir, "manifest.json",
               _manifest(config, wall, artifacts + ["manifest.json"], {"sweep": axis}), artifacts)
    except OSError as exc:
        return RunOutcome(EXIT_IO, out_dir, artifacts, message=f"cannot write artifacts: {exc}")
    if blowups:
        return RunOutcome(EXIT_BLOWUP, out_dir, artifacts, message=f"{blowups} sweep point(s) blew up")
    return RunOutcome(EXIT_OK, out_dir, artifacts)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="dimred", description=(
        "Reconstruct a heat-equation solution from lateral Cauchy data by dimensional reduction."))
    p.add_argument("--test", type=int, default=1, choices=(1, 2, 3, 4), help="built-in problem")
    p.add_argument("--noise", type=float, default=0.0, help="multiplicative noise level in [0, 1)")
    p.add_argument("--seed", type=int, default=0, help="noise seed")
    p.add_argument("--cutoffs", type=_parse_cutoffs, default=None,
                   help="'auto' or a list N_2,...,N_d,N_t (default: problem recommendation)")
    p.add_argument("--phi-threshold", type=float, default=DEFAULT_PHI_THRESHOLD)
    p.add_argument("--max-cutoff", type=int, default=DEFAULT_MAX_CUTOFF, help="cap per axis for 'auto'")
    p.add_argument("--integrator", choices=INTEGRATORS, default="rk4")
    p.add_argument("--rtol", type=float, default=1e-6, help="rk45 relative tolerance")
    p.add_argument("--atol", type=float, default=1e-9, help="rk45 absolute tolerance")
    p.add_argument("--nx", type=int)
    p.add_argument("--ny", type=int)
    p.add_argument("--nt", type=int)
    p.add_argument("--out", default="results", help="output directory")
    p.add_argument("--sweep", choices=SWEEPS)
    p.add_argument("--sweep-values", type=_parse_values,
                   help="noise levels or time cutoffs for --sweep (comma separated)")
    p.add_argument("--field-format", choices=FIELD_FORMATS, default="auto",
                   help="auto writes CSV in 1-D and the SHD1 binary dump in 2-D")
    p.add_argument("--printed", action="store_true",
                   help="use the originally typeset source terms for tests 3 and 4")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    return RunConfig(test_id=args.test, noise=args.noise, seed=args.seed, cutoffs=args.cutoffs,
                     phi_threshold=args.phi_threshold, max_cutoff=args.max_cutoff,
                     integrator=args.integrator, rtol=args.rtol, atol=args.atol,
                     nx=args.nx, ny=args.ny, nt=args.nt, out=args.out, sweep=args.sweep,
                     sweep_values=args.sweep_values, field_format=args.field_format, printed=args.printed)


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    outcome = run(config_from_args(args))
    if outcome.message:
        print(outcome.message, file=sys.stderr)
    if outcome.result is not None and outcome.result.errors is not None:
        e = outcome.result.errors
        print(f"cutoffs {outcome.result.cutoffs}  relative L2 error {100 * e.relative_l2:.4f}%  "
              f"(full T {100 * e.relative_l2_full:.4f}%)")
    for name in outcome.artifacts:
        print(outcome.out_dir / name)
    return outcome.status


if __name__ == "__main__":
    sys.exit(main())
