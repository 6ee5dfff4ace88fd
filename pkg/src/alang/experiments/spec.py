"""Declarative experiment descriptions read from TOML."""

from __future__ import annotations

import math
import re
import sys
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from ..errors import SpecError
from ..numerics import RngStream

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - exercised on 3.10 only
    import tomli as tomllib

__all__ = ["Prior", "ExperimentSpec", "parse_prior", "load_specs", "spec_echo", "KINDS", "SAMPLERS"]

KINDS = ("laplace1d", "laplace_md", "logistic_det", "logistic_gauss", "neuralnet", "heavytail")
SAMPLERS = ("ula", "anchored", "timechange")
PENALTIES = ("L1", "SCAD", "MCP")


@dataclass(frozen=True)
class Prior:
    """Initial distribution for every coordinate of every chain.

    ``gaussian`` takes a variance, ``uniform`` a ``(lo, hi)`` pair and
    ``laplace`` a ``(loc, scale)`` pair.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        arity = {"gaussian": 1, "uniform": 2, "laplace": 2}
        if self.kind not in arity:
            raise SpecError(f"unknown prior {self.kind!r}")
        if len(self.params) != arity[self.kind]:
            raise SpecError(f"prior {self.kind} takes {arity[self.kind]} parameter(s)")
        if self.kind == "gaussian" and not self.params[0] > 0:
            raise SpecError("gaussian prior variance must be positive")
        if self.kind == "uniform" and not self.params[0] < self.params[1]:
            raise SpecError("uniform prior needs lo < hi")
        if self.kind == "laplace" and not self.params[1] > 0:
            raise SpecError("laplace prior scale must be positive")

    def sample(self, rng: RngStream, shape) -> np.ndarray:
        if self.kind == "gaussian":
            return math.sqrt(self.params[0]) * rng.normal(shape)
        if self.kind == "uniform":
            return rng.uniform(self.params[0], self.params[1], shape)
        return rng.laplace(self.params[0], self.params[1], shape)

    def second_moment(self) -> float:
        """``E[x_i^2]`` for one coordinate."""
        if self.kind == "gaussian":
            return self.params[0]
        if self.kind == "uniform":
            lo, hi = self.params
            return (lo * lo + lo * hi + hi * hi) / 3.0
        loc, b = self.params
        return loc * loc + 2 * b * b

    def __str__(self):
        return f"{self.kind}({', '.join(f'{p:g}' for p in self.params)})"


_PRIOR_RE = re.compile(r"^\s*(gaussian|normal|uniform|laplace)\s*\(([^)]*)\)\s*$")


def parse_prior(value) -> Prior:
    """Accept ``"gaussian(10)"``-style strings or ``{kind = ..., ...}`` tables."""
    if isinstance(value, Prior):
        return value
    if isinstance(value, str):
        m = _PRIOR_RE.match(value)
        if not m:
            raise SpecError(f"cannot parse prior {value!r}")
        try:
            params = tuple(float(p) for p in m.group(2).split(",") if p.strip())
        except ValueError:
            raise SpecError(f"cannot parse prior {value!r}") from None
        kind = "gaussian" if m.group(1) == "normal" else m.group(1)
        return Prior(kind, params)
    if isinstance(value, dict):
        keys = {"gaussian": ("var",), "uniform": ("lo", "hi"), "laplace": ("loc", "scale")}
        kind = value.get("kind")
        if kind not in keys:
            raise SpecError(f"unknown prior kind {kind!r}")
        extra = set(value) - {"kind", *keys[kind]}
        if extra:
            raise SpecError(f"unknown prior keys {sorted(extra)}")
        try:
            return Prior(kind, tuple(float(value[k]) for k in keys[kind]))
        except KeyError as exc:
            raise SpecError(f"prior {kind} missing {exc.args[0]!r}") from None
    raise SpecError(f"prior must be a string or table, got {type(value).__name__}")


_DEFAULT_PRIOR = {
    "laplace1d": "gaussian(10)",
    "laplace_md": "gaussian(10)",
    "heavytail": "gaussian(10)",
    "logistic_det": "laplace(0, 2)",
    "logistic_gauss": "laplace(0, 2)",
    "neuralnet": "gaussian(4)",
}


@dataclass(frozen=True)
class ExperimentSpec:
    """One run description; every field is validated on construction.

    Kind-specific fields are ignored by kinds that do not use them.
    ``n_chains`` is the particle count of the Laplace and heavy-tail runs;
    classification runs use one chain per repeat.
    """

    kind: str
    sampler: str
    eta: float
    n_steps: int
    name: str = ""
    mu: float = 1.0
    N_mc: int = 500
    n_repeats: int = 1
    seed: int = 0
    prior: Prior | None = None
    threshold: float | None = None
    record_every: int = 1
    n_chains: int = 5000
    trim: float = 0.01
    stop_at_threshold: bool = False
    smoothing: str = "mc"
    # Laplace
    b: float = 1.0 / math.sqrt(2.0)
    Sigma: tuple[tuple[float, ...], ...] | None = None
    rho: float = 0.0
    dim: int = 1
    # heavy tail
    iota: float = 2.0
    beta: float = 1.0
    # classification
    penalty: str = "L1"
    lam: float = 1.0
    a: float = 10.0
    m0: float | None = None
    eps: float = 0.5
    reduction: str = "mean"
    dataset: str | None = None
    dataset_format: str = "wdbc"
    standardize: bool = True
    hidden: int = 32
    exponent_clamp: float = 30.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.sampler not in SAMPLERS:
            raise SpecError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        positive = {"eta": self.eta, "mu": self.mu, "b": self.b, "iota": self.iota, "beta": self.beta,
                    "eps": self.eps, "exponent_clamp": self.exponent_clamp}
        for key, val in positive.items():
            if not (isinstance(val, (int, float)) and math.isfinite(val) and val > 0):
                raise SpecError(f"{key} must be a positive finite number, got {val!r}")
        for key in ("n_steps", "N_mc", "n_repeats", "record_every", "n_chains", "dim", "hidden"):
            val = getattr(self, key)
            if not isinstance(val, int) or isinstance(val, bool) or val < (0 if key == "n_steps" else 1):
                raise SpecError(f"{key} must be a {'nonnegative' if key == 'n_steps' else 'positive'} integer")
        if self.lam < 0:
            raise SpecError("lam must be nonnegative")
        if self.penalty not in PENALTIES:
            raise SpecError(f"penalty must be one of {PENALTIES}")
        if self.penalty != "L1" and self.a <= 1:
            raise SpecError("a must exceed 1")
        if self.m0 is not None and self.m0 < 0:
            raise SpecError("m0 must be nonnegative")
        if not -1 < self.rho < 1:
            raise SpecError("rho must lie in (-1, 1)")
        if not 0 <= self.trim < 0.5:
            raise SpecError("trim must lie in [0, 0.5)")
        if self.threshold is not None and not self.threshold > 0:
            raise SpecError("threshold must be positive")
        if self.smoothing not in ("mc", "closed_form"):
            raise SpecError("smoothing must be 'mc' or 'closed_form'")
        if self.reduction not in ("mean", "sum"):
            raise SpecError("reduction must be 'mean' or 'sum'")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise SpecError("seed must be an integer")
        if self.prior is None:
            object.__setattr__(self, "prior", parse_prior(_DEFAULT_PRIOR[self.kind]))
        elif not isinstance(self.prior, Prior):
            object.__setattr__(self, "prior", parse_prior(self.prior))
        if self.Sigma is not None:
            S = np.asarray(self.Sigma, dtype=float)
            if S.ndim != 2 or S.shape[0] != S.shape[1]:
                raise SpecError("Sigma must be a square matrix")
            if not np.allclose(S, S.T) or np.linalg.eigvalsh(S).min() <= 0:
                raise SpecError("Sigma must be symmetric positive definite")
            object.__setattr__(self, "Sigma", tuple(tuple(float(v) for v in row) for row in S))
        if self.kind in ("logistic_det", "logistic_gauss", "neuralnet") and self.dataset is None:
            raise SpecError(f"{self.kind} needs a dataset")

    @property
    def ridge(self) -> float:
        """Ridge weight; deterministic-smoothing runs default to 0.5, the rest to 0."""
        if self.m0 is not None:
            return self.m0
        return 0.5 if self.kind == "logistic_det" else 0.0

    def sigma_matrix(self) -> np.ndarray:
        if self.Sigma is not None:
            return np.asarray(self.Sigma)
        S = np.eye(self.dim)
        if self.dim >= 2:
            S[0, 1] = S[1, 0] = self.rho
        return S

    def to_dict(self) -> dict:
        out = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            out[f.name] = str(v) if isinstance(v, Prior) else v
        return out

    def with_overrides(self, **kw) -> "ExperimentSpec":
        return replace(self, **kw)

    @classmethod
    def from_dict(cls, data: dict, base_dir: Path | None = None) -> "ExperimentSpec":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise SpecError(f"unknown keys {sorted(unknown)}")
        missing = {"kind", "sampler", "eta", "n_steps"} - set(data)
        if missing:
            raise SpecError(f"missing required keys {sorted(missing)}")
        data = dict(data)
        for key in ("eta", "mu", "b", "rho", "iota", "beta", "lam", "a", "m0", "eps", "threshold",
                    "trim", "exponent_clamp"):
            if isinstance(data.get(key), int) and not isinstance(data.get(key), bool):
                data[key] = float(data[key])
        if base_dir is not None and data.get("dataset") and data.get("dataset_format") != "sklearn:breast_cancer":
            p = Path(data["dataset"])
            data["dataset"] = str(p if p.is_absolute() else base_dir / p)
        if "prior" in data:
            data["prior"] = parse_prior(data["prior"])
        try:
            return cls(**data)
        except TypeError as exc:
            raise SpecError(str(exc)) from None


def load_specs(path) -> list[ExperimentSpec]:
    """Read ``[experiment]`` or ``[[experiment]]`` tables from a TOML file.

    Raises
    ------
    SpecError
        On syntax errors, unknown top-level tables or invalid fields.
    """
    p = Path(path)
    try:
        with open(p, "rb") as fh:
            doc = tomllib.load(fh)
    except OSError as exc:
        raise SpecError(f"cannot read {p}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise SpecError(f"{p}: {exc}") from exc
    extra = set(doc) - {"experiment"}
    if extra:
        raise SpecError(f"{p}: unknown top-level keys {sorted(extra)}")
    raw = doc.get("experiment")
    if raw is None:
        raise SpecError(f"{p}: no [experiment] table")
    tables = raw if isinstance(raw, list) else [raw]
    return [ExperimentSpec.from_dict(t, p.parent) for t in tables]


def spec_echo(spec: ExperimentSpec) -> str:
    lines = ["[experiment]"]
    for key, val in spec.to_dict().items():
        lines.append(f"{key} = {_toml_value(val)}")
    return "\n".join(lines) + "\n"


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, (tuple, list)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    return '"' + str(v).replace("\\", "\\\\").replace('"', '\\"') + '"'
