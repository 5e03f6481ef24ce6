"""Seeded Monte-Carlo evaluation of the fusion methods.

A scenario draws two noisy estimates of one ground-truth ellipse per run,
optionally hands the second sensor a quarter-turn-and-swap
re-parametrization of its draw, fuses with each selected method, and
scores the fused ellipse against the ground truth with the exact squared
Gaussian Wasserstein distance.  Per-method errors aggregate to the
root-mean value (RMGW).

Randomness is counter-based: every draw comes from a Philox stream keyed
by (seed, run index, estimate index), so runs are independent of
execution order and the whole report is reproducible bit for bit, modulo
wall time.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass
from io import StringIO

import numpy as np

from .core import EllipseState, equivalent_parametrizations, permute_covariance
from .errors import (
    EllipseFusionError,
    FusionNumericsError,
    IndefiniteMatrixError,
    InvalidInputError,
    JacobianSingularError,
)
from .fusion import (
    METHODS,
    FusionInput,
    GaussianEstimate,
    _psd_factor,
    check_covariance,
    fuse,
)
from .metrics import aggregate_rmgw, gw_exact

REFERENCE_GROUND_TRUTH = EllipseState(0.0, 1.0, 0.5 * math.pi, 4.0, 2.0)
REFERENCE_COV1 = np.diag([0.5, 0.5, 0.2, 1.0, 0.2])
REFERENCE_COV2 = np.diag([1.5, 1.5, 0.2, 1.0, 0.2])
REFERENCE_RUNS = 100
REFERENCE_MC_SAMPLES = 1000

_MAX_SEED = 2 ** 64


def covariance_from_json(obj) -> np.ndarray:
    """Covariance from its JSON forms: 5 diagonal entries, 25 row-major
    entries, or a nested 5x5 list."""
    arr = np.asarray(obj, dtype=float)
    if arr.shape == (5,):
        arr = np.diag(arr)
    elif arr.shape == (25,):
        arr = arr.reshape(5, 5)
    elif arr.shape != (5, 5):
        raise InvalidInputError(
            "covariance must be 5 diagonal entries, 25 row-major entries, "
            f"or a 5x5 matrix, got shape {arr.shape}"
        )
    return check_covariance(arr)


@dataclass(frozen=True, eq=False)
class ScenarioConfig:
    """Experiment definition: ground truth, sensor noises, and run counts."""

    ground_truth: EllipseState
    cov1: np.ndarray
    cov2: np.ndarray
    runs: int = REFERENCE_RUNS
    mc_samples: int = REFERENCE_MC_SAMPLES
    seed: int = 0
    swap_sensor2: bool = True
    methods: tuple = METHODS

    def __post_init__(self):
        if not isinstance(self.ground_truth, EllipseState):
            object.__setattr__(
                self, "ground_truth", EllipseState.from_array(self.ground_truth)
            )
        object.__setattr__(self, "cov1", check_covariance(self.cov1))
        object.__setattr__(self, "cov2", check_covariance(self.cov2))
        if not isinstance(self.runs, int) or self.runs < 1:
            raise InvalidInputError(f"runs must be a positive integer, got {self.runs!r}")
        if not isinstance(self.mc_samples, int) or self.mc_samples < 2:
            raise InvalidInputError(
                f"mc_samples must be an integer >= 2, got {self.mc_samples!r}"
            )
        if not isinstance(self.seed, int) or not 0 <= self.seed < _MAX_SEED:
            raise InvalidInputError(
                f"seed must be an unsigned 64-bit integer, got {self.seed!r}"
            )
        methods = tuple(self.methods)
        unknown = [m for m in methods if m not in METHODS]
        if unknown:
            raise InvalidInputError(
                f"unknown methods {unknown}, expected a subset of {METHODS}"
            )
        object.__setattr__(self, "methods", methods)
        object.__setattr__(self, "swap_sensor2", bool(self.swap_sensor2))

    def to_dict(self) -> dict:
        return {
            "ground_truth": self.ground_truth.as_array().tolist(),
            "cov1": self.cov1.tolist(),
            "cov2": self.cov2.tolist(),
            "runs": self.runs,
            "mc_samples": self.mc_samples,
            "seed": self.seed,
            "swap_sensor2": self.swap_sensor2,
            "methods": list(self.methods),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ScenarioConfig":
        if not isinstance(data, dict):
            raise InvalidInputError("scenario must be a JSON object")
        required = {"ground_truth", "cov1", "cov2"}
        missing = required - data.keys()
        if missing:
            raise InvalidInputError(f"scenario is missing fields: {sorted(missing)}")
        known = required | {"runs", "mc_samples", "seed", "swap_sensor2", "methods"}
        unknown = data.keys() - known
        if unknown:
            raise InvalidInputError(f"scenario has unknown fields: {sorted(unknown)}")
        kwargs = {
            "ground_truth": EllipseState.from_array(data["ground_truth"]),
            "cov1": covariance_from_json(data["cov1"]),
            "cov2": covariance_from_json(data["cov2"]),
        }
        for key in ("runs", "mc_samples", "seed", "swap_sensor2"):
            if key in data:
                kwargs[key] = data[key]
        if "methods" in data:
            kwargs["methods"] = tuple(data["methods"])
        return cls(**kwargs)

    def __eq__(self, other):
        if not isinstance(other, ScenarioConfig):
            return NotImplemented
        return self.to_dict() == other.to_dict()


@dataclass(frozen=True, eq=False)
class MethodResult:
    """Per-method outcome: one GW value per run (None where the fuser
    failed), the aggregate, and the failure count."""

    per_run_gw: tuple
    rmgw: float | None
    failed_runs: int

    def to_dict(self) -> dict:
        return {
            "per_run_gw": list(self.per_run_gw),
            "rmgw": self.rmgw,
            "failed_runs": self.failed_runs,
        }


@dataclass(frozen=True, eq=False)
class RunReport:
    """Scenario echo plus per-method aggregated errors."""

    scenario: ScenarioConfig
    per_method: dict
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario.to_dict(),
            "methods": {name: res.to_dict() for name, res in self.per_method.items()},
            "wall_time": self.wall_time,
        }

    def __eq__(self, other):
        if not isinstance(other, RunReport):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def _trial_rng(seed: int, run_index: int, estimate_index: int) -> np.random.Generator:
    key = np.random.SeedSequence(entropy=seed, spawn_key=(run_index, estimate_index))
    return np.random.Generator(np.random.Philox(key))


def generate_trial(config: ScenarioConfig, run_index: int) -> FusionInput:
    """Draw the two sensor estimates for one run.

    Both means are Gaussian draws around the ground truth.  With
    ``swap_sensor2`` the second draw is re-parameterized by the quarter-turn
    axis swap and its covariance permuted to match, so both sensors still
    describe the same physical ellipse.  Deterministic in
    (seed, run_index).
    """
    if not isinstance(run_index, int) or run_index < 0:
        raise InvalidInputError(f"run_index must be a nonnegative integer, got {run_index!r}")
    truth = config.ground_truth.as_array()
    factor1 = _psd_factor(config.cov1)
    factor2 = _psd_factor(config.cov2)

    draw1 = truth + factor1 @ _trial_rng(config.seed, run_index, 0).standard_normal(5)
    draw2 = truth + factor2 @ _trial_rng(config.seed, run_index, 1).standard_normal(5)

    est1 = GaussianEstimate(EllipseState.from_array(draw1), config.cov1)
    if config.swap_sensor2:
        mean2 = equivalent_parametrizations(EllipseState.from_array(draw2))[1]
        cov2 = permute_covariance(config.cov2, 1)
    else:
        mean2 = EllipseState.from_array(draw2)
        cov2 = config.cov2
    return FusionInput(est1, GaussianEstimate(mean2, cov2))


def run_experiment(config: ScenarioConfig) -> RunReport:
    """Run the full scenario and aggregate per-method errors.

    A fuser failing on an individual run is recorded as a failed run for
    that method and excluded from the aggregate; configuration problems
    abort instead.  The report is deterministic given the config, apart
    from the wall time.
    """
    start = time.perf_counter()
    per_run = {name: [] for name in config.methods}
    failures = {name: 0 for name in config.methods}

    for run_index in range(config.runs):
        trial = generate_trial(config, run_index)
        for name in config.methods:
            try:
                if name == "mmgw_mc":
                    seed = np.random.SeedSequence(
                        entropy=config.seed, spawn_key=(run_index, 2)
                    )
                    result = fuse(trial, name, samples=config.mc_samples, seed=seed)
                else:
                    result = fuse(trial, name)
                per_run[name].append(gw_exact(result.fused, config.ground_truth))
            except (FusionNumericsError, JacobianSingularError, IndefiniteMatrixError):
                per_run[name].append(None)
                failures[name] += 1

    per_method = {}
    for name in config.methods:
        values = [v for v in per_run[name] if v is not None]
        per_method[name] = MethodResult(
            per_run_gw=tuple(per_run[name]),
            rmgw=aggregate_rmgw(values) if values else None,
            failed_runs=failures[name],
        )
    return RunReport(
        scenario=config,
        per_method=per_method,
        wall_time=time.perf_counter() - start,
    )


def serialize_report(report: RunReport, format: str = "json") -> bytes:
    """Serialize a report to JSON (lossless) or CSV.

    The CSV layout is one ``method,run_index,gw`` row per run (empty gw for
    failed runs) followed by a ``method,rmgw`` summary block.
    """
    if format == "json":
        return (json.dumps(report.to_dict(), indent=2) + "\n").encode()
    if format == "csv":
        out = StringIO()
        out.write("method,run_index,gw\n")
        for name, res in report.per_method.items():
            for run_index, value in enumerate(res.per_run_gw):
                gw = "" if value is None else repr(float(value))
                out.write(f"{name},{run_index},{gw}\n")
        out.write("\nmethod,rmgw\n")
        for name, res in report.per_method.items():
            rmgw = "" if res.rmgw is None else repr(float(res.rmgw))
            out.write(f"{name},{rmgw}\n")
        return out.getvalue().encode()
    raise InvalidInputError(f"unknown report format {format!r}")


def deserialize_report(data: bytes) -> RunReport:
    """Rebuild a report from its JSON serialization."""
    try:
        payload = json.loads(data.decode() if isinstance(data, bytes) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as err:
        raise InvalidInputError(f"not a valid JSON report: {err}") from err
    if not isinstance(payload, dict) or "scenario" not in payload:
        raise InvalidInputError("JSON report must carry a scenario")
    scenario = ScenarioConfig.from_dict(payload["scenario"])
    per_method = {}
    for name, entry in payload.get("methods", {}).items():
        per_method[name] = MethodResult(
            per_run_gw=tuple(entry["per_run_gw"]),
            rmgw=entry["rmgw"],
            failed_runs=entry["failed_runs"],
        )
    return RunReport(
        scenario=scenario,
        per_method=per_method,
        wall_time=float(payload.get("wall_time", 0.0)),
    )


def reference_config(seed: int = 0, **overrides) -> ScenarioConfig:
    """The built-in two-sensor benchmark scenario.

    Ground truth [0, 1, pi/2, 4, 2] observed by a tighter and a looser
    sensor, 100 runs, 1000 particles for the Monte-Carlo fuser, second
    sensor re-parameterized.  Keyword overrides replace individual fields.
    """
    kwargs = {
        "ground_truth": REFERENCE_GROUND_TRUTH,
        "cov1": REFERENCE_COV1,
        "cov2": REFERENCE_COV2,
        "runs": REFERENCE_RUNS,
        "mc_samples": REFERENCE_MC_SAMPLES,
        "seed": seed,
        "swap_sensor2": True,
        "methods": METHODS,
    }
    kwargs.update(overrides)
    return ScenarioConfig(**kwargs)
