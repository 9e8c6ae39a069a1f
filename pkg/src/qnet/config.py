"""Run configuration: JSON file + flag overrides -> validated RunConfig."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .lindblad import OpenSystemRates
from .models import BoseHubbard, Harmonic, JaynesCummings
from .network import DisorderSpec, NetworkSpec, connectivity_from_dict
from .semiclassical import IntegratorConfig

ENGINES = ("harmonic", "semiclassical-jc", "semiclassical-bh", "quantum", "lindblad")
MODELS = ("harmonic", "jc", "bh")

_TOP_KEYS = {
    "engine", "model", "N", "J", "connectivity", "disorder", "seed", "Np",
    "omega_c", "omega_q", "g", "U", "integrator", "rates", "t_max", "samples",
    "sector", "out", "threads",
}
_INTEGRATOR_KEYS = {"method", "dt", "sample_every", "rtol", "atol"}
_RATE_KEYS = {"kappa", "gamma", "gamma_phi"}
_DISORDER_KEYS = {"delta_omega", "delta_J"}


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key."""

    def __init__(self, name: str, message: str):
        super().__init__(f"{name}: {message}")
        self.field = name


@dataclass(frozen=True)
class RunConfig:
    engine: str
    network: NetworkSpec
    Np: int = 10
    model: str = "harmonic"
    omega_c: float = 1.0
    omega_q: float = 1.0
    g: float = 0.0
    U: float = 0.0
    integrator: IntegratorConfig = field(default_factory=IntegratorConfig)
    rates: OpenSystemRates | None = None
    t_max: float = 50.0
    samples: int = 5001
    sector: bool = True
    out: str | None = None
    threads: int | None = None

    @property
    def unit_model(self):
        if self.model == "jc":
            return JaynesCummings(self.omega_c, self.omega_q, self.g)
        if self.model == "bh":
            return BoseHubbard(self.omega_c, self.U)
        return Harmonic(self.omega_c)

    @property
    def seed(self) -> int:
        return self.network.seed

    @property
    def is_fixed_step(self) -> bool:
        if self.engine in ("harmonic", "quantum"):
            return False
        return self.integrator.method == "rk4"

    def to_dict(self) -> dict:
        d = self.network.to_dict()
        d.update({
            "engine": self.engine,
            "model": self.model,
            "Np": self.Np,
            "omega_c": self.omega_c,
            "omega_q": self.omega_q,
            "g": self.g,
            "U": self.U,
            "integrator": {
                "method": self.integrator.method,
                "dt": self.integrator.dt,
                "sample_every": self.integrator.sample_every,
                "rtol": self.integrator.rtol,
                "atol": self.integrator.atol,
            },
            "t_max": self.t_max,
            "samples": self.samples,
        })
        if self.engine == "quantum":
            d["sector"] = self.sector
        if self.rates is not None:
            d["rates"] = self.rates.to_dict()
        return d

    def with_overrides(self, **kw) -> "RunConfig":
        merged = self.to_dict()
        merged.update(kw)
        return build_config(merged)


def _check_keys(d: dict, allowed: set, where: str):
    extra = set(d) - allowed
    if extra:
        raise ConfigError(f"{where}{sorted(extra)[0]}", "unknown key")


def _num(d: dict, key: str, default=None, *, kind=float, minimum=None, where=""):
    if key not in d or d[key] is None:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where + key, f"expected a number, got {v!r}")
    if kind is int:
        if int(v) != v:
            raise ConfigError(where + key, f"expected an integer, got {v!r}")
        v = int(v)
    else:
        v = float(v)
        if not math.isfinite(v):
            raise ConfigError(where + key, "must be finite")
    if minimum is not None and v < minimum:
        raise ConfigError(where + key, f"must be >= {minimum}")
    return v


def build_config(raw: dict) -> RunConfig:
    """Validate a flat config dict (already merged with overrides)."""
    if not isinstance(raw, dict):
        raise ConfigError("config", "top level must be a JSON object")
    _check_keys(raw, _TOP_KEYS, "")
    engine = raw.get("engine")
    if engine == "harmonic-analytic":
        engine = "harmonic"
    if engine not in ENGINES:
        raise ConfigError("engine", f"must be one of {', '.join(ENGINES)}; got {engine!r}")

    N = _num(raw, "N", kind=int, minimum=2)
    if N is None:
        raise ConfigError("N", "required")
    J = _num(raw, "J", 1.0, minimum=0)
    conn_raw = raw.get("connectivity", "all_to_all")
    if isinstance(conn_raw, str):
        conn_raw = {"type": conn_raw}
    try:
        conn = connectivity_from_dict(conn_raw)
    except (ValueError, TypeError) as e:
        raise ConfigError("connectivity", str(e)) from None
    dis_raw = raw.get("disorder") or {}
    _check_keys(dis_raw, _DISORDER_KEYS, "disorder.")
    disorder = DisorderSpec(
        _num(dis_raw, "delta_omega", 0.0, minimum=0, where="disorder."),
        _num(dis_raw, "delta_J", 0.0, minimum=0, where="disorder."),
    )
    seed = _num(raw, "seed", 0, kind=int, minimum=0)
    network = NetworkSpec(N=N, J=J, connectivity=conn, disorder=disorder, seed=seed)

    if engine == "semiclassical-jc":
        default_model = "jc"
    elif engine == "semiclassical-bh":
        default_model = "bh"
    elif engine == "harmonic":
        default_model = "harmonic"
    else:
        default_model = None
    model = raw.get("model", default_model)
    if model is None:
        raise ConfigError("model", f"required for engine {engine!r} (one of {', '.join(MODELS)})")
    if model not in MODELS:
        raise ConfigError("model", f"must be one of {', '.join(MODELS)}; got {model!r}")
    if default_model is not None and model != default_model:
        raise ConfigError("model", f"engine {engine!r} implies model {default_model!r}")

    g = _num(raw, "g", 0.0, minimum=0)
    U = _num(raw, "U", 0.0, minimum=0)
    if model != "jc" and g:
        raise ConfigError("g", f"only meaningful for the jc model (model is {model!r})")
    if model != "bh" and U:
        raise ConfigError("U", f"only meaningful for the bh model (model is {model!r})")

    Np = _num(raw, "Np", 10, kind=int, minimum=1)
    t_max = _num(raw, "t_max", 50.0, minimum=0)
    if not t_max > 0:
        raise ConfigError("t_max", "must be > 0")
    if engine == "harmonic" and network.is_all_to_all and J > 0:
        # the analytic minimum sits at t = pi/(NJ); one full period always covers it
        t_max = max(t_max, 2 * math.pi / (N * J))
    samples = _num(raw, "samples", 5001, kind=int, minimum=2)

    integ_raw = raw.get("integrator") or {}
    _check_keys(integ_raw, _INTEGRATOR_KEYS, "integrator.")
    default_dt = 0.02 if engine == "lindblad" else 1e-3
    dt = _num(integ_raw, "dt", default_dt, where="integrator.")
    n_steps = max(1, int(round(t_max / dt))) if dt and dt > 0 else 1
    every = _num(integ_raw, "sample_every", None, kind=int, minimum=1, where="integrator.")
    if every is None:
        every = max(1, int(round(n_steps / (samples - 1))))
    try:
        integrator = IntegratorConfig(
            method=integ_raw.get("method", "rk4"),
            dt=dt,
            t_max=t_max,
            sample_every=every,
            rtol=_num(integ_raw, "rtol", 1e-9, where="integrator."),
            atol=_num(integ_raw, "atol", 1e-12, where="integrator."),
        )
    except ValueError as e:
        raise ConfigError("integrator", str(e)) from None

    rates = None
    if "rates" in raw and raw["rates"] is not None:
        if engine != "lindblad":
            raise ConfigError("rates", f"only allowed with the lindblad engine (engine is {engine!r})")
        _check_keys(raw["rates"], _RATE_KEYS, "rates.")
        rates = OpenSystemRates(
            _num(raw["rates"], "kappa", 0.0, minimum=0, where="rates."),
            _num(raw["rates"], "gamma", 0.0, minimum=0, where="rates."),
            _num(raw["rates"], "gamma_phi", 0.0, minimum=0, where="rates."),
        )
        if model != "jc" and (rates.gamma or rates.gamma_phi):
            raise ConfigError("rates", "gamma and gamma_phi require qubits (jc model)")
    elif engine == "lindblad":
        raise ConfigError("rates", "required for the lindblad engine")
    if engine == "lindblad" and model == "harmonic":
        raise ConfigError("model", "lindblad engine needs the jc or bh model")

    sector = raw.get("sector", True)
    if not isinstance(sector, bool):
        raise ConfigError("sector", "must be true or false")
    if "sector" in raw and engine != "quantum":
        raise ConfigError("sector", "sector restriction only applies to the closed quantum engine")

    threads = _num(raw, "threads", None, kind=int, minimum=1)

    return RunConfig(
        engine=engine,
        network=network,
        Np=Np,
        model=model,
        omega_c=_num(raw, "omega_c", 1.0),
        omega_q=_num(raw, "omega_q", 1.0),
        g=g,
        U=U,
        integrator=integrator,
        rates=rates,
        t_max=t_max,
        samples=samples,
        sector=sector,
        out=raw.get("out"),
        threads=threads,
    )


# flag name -> config key
FLAG_KEYS = {
    "engine": "engine", "seed": "seed", "t_max": "t_max", "samples": "samples",
    "threads": "threads", "out": "out", "N": "N", "Np": "Np", "J": "J", "g": "g",
    "U": "U", "omega_c": "omega_c", "omega_q": "omega_q", "model": "model",
}


def merge_overrides(raw: dict, flags: dict[str, Any]) -> dict:
    """Apply command-line overrides (None means not given) onto a raw config."""
    merged = json.loads(json.dumps(raw))
    for k, key in FLAG_KEYS.items():
        if flags.get(k) is not None:
            merged[key] = flags[k]
    for k in ("kappa", "gamma", "gamma_phi"):
        if flags.get(k) is not None:
            merged.setdefault("rates", {})
            merged["rates"] = dict(merged["rates"] or {}, **{k: flags[k]})
    for k in ("delta_omega", "delta_J"):
        if flags.get(k) is not None:
            merged["disorder"] = dict(merged.get("disorder") or {}, **{k: flags[k]})
    if flags.get("all_to_all"):
        merged["connectivity"] = {"type": "all_to_all"}
    elif flags.get("D") is not None:
        merged["connectivity"] = {"type": "finite_range", "D": flags["D"]}
    if flags.get("method") is not None:
        merged["integrator"] = dict(merged.get("integrator") or {}, method=flags["method"])
    if flags.get("dt") is not None:
        merged["integrator"] = dict(merged.get("integrator") or {}, dt=flags["dt"])
    if (flags.get("t_max") is not None or flags.get("samples") is not None) and merged.get("integrator"):
        # a new window invalidates an explicit sampling stride from the file
        merged["integrator"].pop("sample_every", None)
    return merged


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as e:
        raise ConfigError("config", f"malformed JSON: {e}") from None


def parse_config(path=None, overrides: dict | None = None) -> RunConfig:
    raw = load_json(path) if path else {}
    return build_config(merge_overrides(raw, overrides or {}))
