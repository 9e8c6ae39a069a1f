"""Parameter sweeps and disorder ensembles over the engines in :mod:`qnet.engines`.

Every grid point (and every ensemble member) is an independent run whose
disorder draw comes from ``make_rng(seed, i0[, i1], r)``, so results do not
depend on execution order or on the number of worker threads.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, build_config
from .engines import run
from .network import make_rng, sample_disorder

log = logging.getLogger(__name__)

# axis name -> where it lives in the flat config dict
_NESTED_AXES = {
    "delta_omega": ("disorder", "delta_omega"),
    "delta_J": ("disorder", "delta_J"),
    "kappa": ("rates", "kappa"),
    "gamma": ("rates", "gamma"),
    "gamma_phi": ("rates", "gamma_phi"),
    "dt": ("integrator", "dt"),
}
_FLAT_AXES = {"N", "Np", "J", "g", "U", "omega_c", "omega_q", "t_max"}
AXIS_NAMES = tuple(sorted(_FLAT_AXES | set(_NESTED_AXES) | {"D"}))
_INT_AXES = {"N", "Np", "D"}
_PLAN_KEYS = {"base", "axes", "ensemble", "seed"}


@dataclass(frozen=True)
class Axis:
    name: str
    values: tuple

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ConfigError("axes.name", f"unknown sweep parameter {self.name!r}; one of {', '.join(AXIS_NAMES)}")
        if len(self.values) == 0:
            raise ConfigError(f"axes.{self.name}", "grid is empty")
        if self.name in _INT_AXES and any(int(v) != v for v in self.values):
            raise ConfigError(f"axes.{self.name}", "values must be integers")


@dataclass(frozen=True)
class SweepPlan:
    """A 1-D or 2-D grid of runs around a base configuration.

    ``ensemble`` disorder realizations are averaged per point; it is
    ignored (one run per point) when the base network is clean.
    """

    base: RunConfig
    axes: tuple[Axis, ...]
    ensemble: int = 1
    seed: int = 0

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ConfigError("axes", "a sweep needs one or two axes")
        if len({a.name for a in self.axes}) != len(self.axes):
            raise ConfigError("axes", "axis names must differ")
        if self.ensemble < 1:
            raise ConfigError("ensemble", "must be >= 1")

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(len(a.values) for a in self.axes)

    @property
    def engine(self) -> str:
        return self.base.engine

    @property
    def replicates(self) -> int:
        return 1 if self.base.network.disorder.is_clean else self.ensemble

    def point_config(self, index: tuple[int, ...]) -> RunConfig:
        raw = self.base.to_dict()
        for ax, i in zip(self.axes, index):
            _set_axis(raw, ax.name, ax.values[i])
        return build_config(raw)

    def validate(self) -> None:
        """Build every point's config once so bad grids fail before any run."""
        for index in itertools.product(*(range(n) for n in self.shape)):
            self.point_config(index)


def _set_axis(raw: dict, name: str, value) -> None:
    if name in _INT_AXES:
        value = int(value)
    else:
        value = float(value)
    if name == "D":
        raw["connectivity"] = {"type": "finite_range", "D": value}
    elif name in _NESTED_AXES:
        outer, inner = _NESTED_AXES[name]
        raw[outer] = dict(raw.get(outer) or {}, **{inner: value})
    else:
        raw[name] = value
    if name in ("t_max", "dt"):
        raw.get("integrator", {}).pop("sample_every", None)


def _axis_values(spec: dict) -> tuple:
    keys = set(spec) - {"name"}
    if len(keys) != 1:
        raise ConfigError("axes", "each axis needs exactly one of values, range, linspace, geomspace")
    (kind,) = keys
    arg = spec[kind]
    if kind == "values":
        return tuple(arg)
    if kind == "range":  # inclusive integer range [start, stop] or [start, stop, step]
        start, stop, *step = arg
        return tuple(range(int(start), int(stop) + 1, int(step[0]) if step else 1))
    if kind == "linspace":
        return tuple(np.linspace(arg[0], arg[1], int(arg[2])).tolist())
    if kind == "geomspace":
        return tuple(np.geomspace(arg[0], arg[1], int(arg[2])).tolist())
    raise ConfigError("axes", f"unknown grid spec {kind!r}")


def plan_from_dict(raw: dict, base_overrides: dict | None = None) -> SweepPlan:
    extra = set(raw) - _PLAN_KEYS
    if extra:
        raise ConfigError(sorted(extra)[0], "unknown key")
    if "base" not in raw:
        raise ConfigError("base", "required")
    if "axes" not in raw:
        raise ConfigError("axes", "required")
    base_overrides = base_overrides or {}
    base_raw = dict(raw["base"], **base_overrides)
    # precedence: command-line flag, then plan-level seed, then the base config's
    if "seed" not in base_overrides:
        base_raw["seed"] = raw.get("seed", base_raw.get("seed", 0))
    base = build_config(base_raw)
    axes = tuple(Axis(a["name"], _axis_values(a)) for a in raw["axes"])
    plan = SweepPlan(base, axes, int(raw.get("ensemble", 1)), base.seed)
    plan.validate()
    return plan


@dataclass
class SweepResult:
    plan: SweepPlan
    eta: np.ndarray  # ensemble mean, plan.shape
    eta_min: np.ndarray
    eta_max: np.ndarray
    members: np.ndarray  # plan.shape + (R,), NaN where a member failed
    wall_time: np.ndarray  # seconds per point (summed over members)
    failures: dict = field(default_factory=dict)  # index tuple -> message

    @property
    def axes(self):
        return self.plan.axes

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        fmt = "{:.17g}".format
        if len(self.axes) == 1:
            w.writerow([self.axes[0].name, "eta_mean", "eta_min", "eta_max", "n_ok"])
            for i, v in enumerate(self.axes[0].values):
                ok = int(np.sum(np.isfinite(self.members[i])))
                w.writerow([fmt(v), fmt(self.eta[i]), fmt(self.eta_min[i]), fmt(self.eta_max[i]), ok])
        else:
            a0, a1 = self.axes
            w.writerow([f"{a0.name}\\{a1.name}"] + [fmt(v) for v in a1.values])
            for i, v in enumerate(a0.values):
                w.writerow([fmt(v)] + [fmt(x) for x in self.eta[i]])
        return buf.getvalue()

    def metadata(self) -> dict:
        return {
            "version": __version__,
            "engine": self.plan.engine,
            "base_config": self.plan.base.to_dict(),
            "axes": [{"name": a.name, "values": list(a.values)} for a in self.axes],
            "ensemble": self.plan.replicates,
            "seed": self.plan.seed,
            "seed_policy": "disorder of member r at grid index (i0[, i1]) drawn from Philox(SeedSequence([seed, i0[, i1], r]))",
            "tolerances": {
                "integrator": self.plan.base.integrator.method,
                "dt": self.plan.base.integrator.dt,
                "rtol": self.plan.base.integrator.rtol,
                "atol": self.plan.base.integrator.atol,
            },
            "wall_time": self.wall_time.tolist(),
            "failures": {",".join(map(str, k)): v for k, v in sorted(self.failures.items())},
        }

    def write(self, out_dir, stem: str = "sweep") -> tuple[Path, Path]:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        csv_path = out / f"{stem}.csv"
        json_path = out / f"{stem}.json"
        csv_path.write_text(self.to_csv())
        json_path.write_text(json.dumps(self.metadata(), indent=2, allow_nan=True) + "\n")
        return csv_path, json_path


def default_threads() -> int:
    env = os.environ.get("QNET_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ConfigError("QNET_THREADS", f"expected an integer, got {env!r}") from None
        if n < 1:
            raise ConfigError("QNET_THREADS", "must be >= 1")
        return n
    return 1


def _run_member(plan: SweepPlan, cfgs: dict, index: tuple, r: int):
    cfg = cfgs[index]
    realization = None
    if not cfg.network.disorder.is_clean:
        realization = sample_disorder(cfg.network, make_rng(plan.seed, *index, r))
    res = run(cfg, realization)
    return res.summary.eta, res.wall_time


def run_sweep(plan: SweepPlan, threads: int | None = None) -> SweepResult:
    """Run every grid point and ensemble member; failures are recorded, not raised."""
    threads = threads or plan.base.threads or default_threads()
    R = plan.replicates
    indices = list(itertools.product(*(range(n) for n in plan.shape)))
    cfgs = {idx: plan.point_config(idx) for idx in indices}
    members = np.full(plan.shape + (R,), np.nan)
    wall = np.zeros(plan.shape)
    failures: dict = {}
    tasks = [(idx, r) for idx in indices for r in range(R)]

    def work(task):
        idx, r = task
        t0 = time.perf_counter()
        try:
            eta, _ = _run_member(plan, cfgs, idx, r)
            return idx, r, eta, None, time.perf_counter() - t0
        except Exception as e:  # one bad point must not sink the sweep
            return idx, r, math.nan, f"{type(e).__name__}: {e}", time.perf_counter() - t0

    if threads == 1:
        results = [work(t) for t in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, tasks))
    for idx, r, eta, err, dt in results:
        members[idx + (r,)] = eta
        wall[idx] += dt
        if err is not None:
            key = idx + (r,) if R > 1 else idx
            failures[key] = err
            log.warning("sweep point %s failed: %s", key, err)

    # points where every member failed stay NaN
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        eta = np.nanmean(members, axis=-1)
        eta_min = np.nanmin(members, axis=-1)
        eta_max = np.nanmax(members, axis=-1)
    return SweepResult(plan, eta, eta_min, eta_max, members, wall, failures)


def connectivity_scan_bh(N: int = 50, Np: int = 20, U_values=None, D_values=None, *,
                         t_max: float = 50.0, dt: float = 1e-3, samples: int = 5001,
                         threads: int | None = None, J: float = 1.0) -> SweepResult:
    """Semiclassical BH eta over (U, D).

    Default grid is 60 log-spaced U in [0.01, 10] by D = 1..min(18, ceil(N/2)).
    For small networks the last default D is the all-to-all network.
    """
    if U_values is None:
        U_values = np.geomspace(0.01, 10.0, 60)
    if D_values is None:
        D_values = range(1, min(18, math.ceil(N / 2)) + 1)
    base = build_config({
        "engine": "semiclassical-bh", "N": N, "Np": Np, "J": J, "U": float(U_values[0]),
        "t_max": t_max, "samples": samples, "integrator": {"dt": dt},
    })
    plan = SweepPlan(base, (Axis("U", tuple(float(u) for u in U_values)),
                            Axis("D", tuple(int(d) for d in D_values))))
    return run_sweep(plan, threads)
