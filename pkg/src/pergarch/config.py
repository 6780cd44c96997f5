"""Experiment configuration: parsing, validation, digests, builders.

One JSON file describes a full experiment; runs are archivable and
diffable.  Example layout (the built-in demonstration configuration):

    {
      "model": {
        "intensity": {"form": "cosine", "a": 4.0, "b": 1.0, "tau": 12.0},
        "partition": {
          "lengths": [2, 2, 2, 3, 3],
          "laws": [{"type": "normal", "mu": 3.0, "sigma2": 1.0}, ...]
        },
        "drift": {"form": "zero"}
      },
      "cogarch": {"p": 1, "q": 3, "alpha0": 1.0,
                   "alpha": [0.03], "beta": [5, 9, 5],
                   "y0": [8.358, 2.3377, 0.904]},
      "run": {"horizon_periods": 40, "h": 1.0, "seed": 20260801,
               "replicates": 4000},
      "analysis": {"M": 240, "alpha": 0.05, "expected_period": 12}
    }
"""

import hashlib
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import cogarch, semi_levy

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config",
    "load_config",
    "config_digest",
    "builtin_example_config",
]


class ConfigError(ValueError):
    """Invalid experiment file; the message carries the key path."""


@dataclass(frozen=True)
class IntensitySpec:
    form: str
    a: float = 0.0
    b: float = 0.0
    tau: float = 0.0
    breaks: tuple = ()
    values: tuple = ()


@dataclass(frozen=True)
class LawSpec:
    type: str
    mu: float = 0.0
    sigma2: float = 1.0
    value: float = 0.0
    lo: float = 0.0
    hi: float = 1.0


@dataclass(frozen=True)
class ModelSpec:
    intensity: IntensitySpec
    lengths: tuple
    laws: tuple
    drift_form: str = "zero"
    drift_amplitude: float = 0.0


@dataclass(frozen=True)
class CogarchSpec:
    p: int
    q: int
    alpha0: float
    alpha: tuple
    beta: tuple
    y0: tuple


@dataclass(frozen=True)
class RunSpec:
    horizon_periods: int
    h: float
    seed: int
    replicates: int = 2000


@dataclass(frozen=True)
class AnalysisSpec:
    m_window: int
    alpha: float
    expected_period: int = None
    center_jumps: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    cogarch: CogarchSpec
    run: RunSpec
    analysis: AnalysisSpec

    def to_dict(self):
        m = self.model
        d = {
            "model": {
                "intensity": _intensity_dict(m.intensity),
                "partition": {
                    "lengths": list(m.lengths),
                    "laws": [_law_dict(law) for law in m.laws],
                },
                "drift": {"form": m.drift_form},
            },
            "cogarch": {
                "p": self.cogarch.p, "q": self.cogarch.q,
                "alpha0": self.cogarch.alpha0,
                "alpha": list(self.cogarch.alpha),
                "beta": list(self.cogarch.beta),
                "y0": list(self.cogarch.y0),
            },
            "run": {
                "horizon_periods": self.run.horizon_periods,
                "h": self.run.h, "seed": self.run.seed,
                "replicates": self.run.replicates,
            },
            "analysis": {
                "M": self.analysis.m_window, "alpha": self.analysis.alpha,
            },
        }
        if m.drift_form != "zero":
            d["model"]["drift"]["amplitude"] = m.drift_amplitude
        if self.analysis.expected_period is not None:
            d["analysis"]["expected_period"] = self.analysis.expected_period
        if self.analysis.center_jumps:
            d["analysis"]["center_jumps"] = True
        return d

    def build_model(self):
        """Instantiate the driver model this configuration describes."""
        spec = self.model
        ints = spec.intensity
        if ints.form == "cosine":
            intensity = semi_levy.CosineIntensity(ints.a, ints.b, ints.tau)
        else:
            intensity = semi_levy.PiecewiseConstantIntensity(ints.breaks, ints.values)
        laws = tuple(_build_law(law) for law in spec.laws)
        partition = semi_levy.SeasonPartition(spec.lengths, laws)
        drift = semi_levy.DriftFunction(spec.drift_form, spec.drift_amplitude,
                                        intensity.tau)
        model = semi_levy.SemiLevyModel(intensity, partition, drift)
        if self.analysis.center_jumps:
            model = model.centered()
        return model

    def build_params(self):
        c = self.cogarch
        return cogarch.CogarchParams(c.p, c.q, c.alpha0, c.alpha, c.beta)

    @property
    def y0(self):
        return np.asarray(self.cogarch.y0, dtype=float)

    @property
    def horizon(self):
        return self.run.horizon_periods * self.model.intensity.tau


def _intensity_dict(spec):
    if spec.form == "cosine":
        return {"form": "cosine", "a": spec.a, "b": spec.b, "tau": spec.tau}
    return {"form": "piecewise", "breaks": list(spec.breaks),
            "values": list(spec.values)}


def _law_dict(spec):
    if spec.type == "normal":
        return {"type": "normal", "mu": spec.mu, "sigma2": spec.sigma2}
    if spec.type == "point_mass":
        return {"type": "point_mass", "value": spec.value}
    return {"type": "uniform", "lo": spec.lo, "hi": spec.hi}


def _build_law(spec):
    if spec.type == "normal":
        return semi_levy.NormalLaw(spec.mu, spec.sigma2)
    if spec.type == "point_mass":
        return semi_levy.PointMassLaw(spec.value)
    return semi_levy.UniformLaw(spec.lo, spec.hi)


def _need(mapping, key, path, kind=None):
    if not isinstance(mapping, dict) or key not in mapping:
        raise ConfigError(f"missing key '{path}'")
    val = mapping[key]
    if kind is not None and not isinstance(val, kind):
        names = kind if isinstance(kind, tuple) else (kind,)
        raise ConfigError(f"key '{path}' must be {'/'.join(k.__name__ for k in names)}")
    return val


_NUM = (int, float)


def parse_config(data):
    """Validate a plain dict into an ExperimentConfig.

    Raises ConfigError naming the offending key path on any problem,
    including inconsistent array lengths.
    """
    model = _need(data, "model", "model", dict)
    ints = _need(model, "intensity", "model.intensity", dict)
    form = _need(ints, "form", "model.intensity.form", str)
    if form == "cosine":
        spec_int = IntensitySpec(
            "cosine",
            a=float(_need(ints, "a", "model.intensity.a", _NUM)),
            b=float(_need(ints, "b", "model.intensity.b", _NUM)),
            tau=float(_need(ints, "tau", "model.intensity.tau", _NUM)))
        if spec_int.a < abs(spec_int.b):
            raise ConfigError("key 'model.intensity': cosine form needs a >= |b|")
    elif form == "piecewise":
        spec_int = IntensitySpec(
            "piecewise",
            breaks=tuple(_need(ints, "breaks", "model.intensity.breaks", list)),
            values=tuple(_need(ints, "values", "model.intensity.values", list)))
        if len(spec_int.breaks) != len(spec_int.values) + 1:
            raise ConfigError("key 'model.intensity.breaks': need one more break than values")
    else:
        raise ConfigError("key 'model.intensity.form' must be 'cosine' or 'piecewise'")

    part = _need(model, "partition", "model.partition", dict)
    lengths = tuple(float(x) for x in _need(part, "lengths", "model.partition.lengths", list))
    raw_laws = _need(part, "laws", "model.partition.laws", list)
    if len(raw_laws) != len(lengths):
        raise ConfigError("key 'model.partition.laws': need one law per length entry")
    laws = []
    for i, law in enumerate(raw_laws):
        path = f"model.partition.laws[{i}]"
        kind = _need(law, "type", path + ".type", str)
        if kind == "normal":
            laws.append(LawSpec("normal",
                                mu=float(_need(law, "mu", path + ".mu", _NUM)),
                                sigma2=float(_need(law, "sigma2", path + ".sigma2", _NUM))))
        elif kind == "point_mass":
            laws.append(LawSpec("point_mass",
                                value=float(_need(law, "value", path + ".value", _NUM))))
        elif kind == "uniform":
            laws.append(LawSpec("uniform",
                                lo=float(_need(law, "lo", path + ".lo", _NUM)),
                                hi=float(_need(law, "hi", path + ".hi", _NUM))))
        else:
            raise ConfigError(f"key '{path}.type' must be normal/point_mass/uniform")
    drift = model.get("drift", {"form": "zero"})
    drift_form = _need(drift, "form", "model.drift.form", str)
    drift_amp = float(drift.get("amplitude", 0.0))

    cg = _need(data, "cogarch", "cogarch", dict)
    p = int(_need(cg, "p", "cogarch.p", int))
    qq = int(_need(cg, "q", "cogarch.q", int))
    alpha = tuple(float(x) for x in _need(cg, "alpha", "cogarch.alpha", list))
    beta = tuple(float(x) for x in _need(cg, "beta", "cogarch.beta", list))
    y0 = tuple(float(x) for x in _need(cg, "y0", "cogarch.y0", list))
    if len(alpha) != p:
        raise ConfigError("key 'cogarch.alpha': need exactly p entries")
    if len(beta) != qq:
        raise ConfigError("key 'cogarch.beta': need exactly q entries")
    if len(y0) != qq:
        raise ConfigError("key 'cogarch.y0': need exactly q entries")
    spec_cg = CogarchSpec(p, qq, float(_need(cg, "alpha0", "cogarch.alpha0", _NUM)),
                          alpha, beta, y0)

    run = _need(data, "run", "run", dict)
    spec_run = RunSpec(
        horizon_periods=int(_need(run, "horizon_periods", "run.horizon_periods", int)),
        h=float(_need(run, "h", "run.h", _NUM)),
        seed=int(_need(run, "seed", "run.seed", int)),
        replicates=int(run.get("replicates", 2000)))
    if spec_run.horizon_periods <= 0 or spec_run.h <= 0:
        raise ConfigError("key 'run': horizon_periods and h must be positive")

    ana = _need(data, "analysis", "analysis", dict)
    spec_ana = AnalysisSpec(
        m_window=int(_need(ana, "M", "analysis.M", int)),
        alpha=float(_need(ana, "alpha", "analysis.alpha", _NUM)),
        expected_period=(int(ana["expected_period"])
                         if "expected_period" in ana else None),
        center_jumps=bool(ana.get("center_jumps", False)))

    cfg = ExperimentConfig(
        ModelSpec(spec_int, lengths, tuple(laws), drift_form, drift_amp),
        spec_cg, spec_run, spec_ana)

    tau = cfg.model.intensity.tau if form == "cosine" else spec_int.breaks[-1]
    if abs(sum(lengths) - tau) > 1e-9 * max(1.0, tau):
        raise ConfigError("key 'model.partition.lengths': entries must sum to the period")
    if spec_ana.expected_period is not None:
        ratio = tau / spec_run.h
        if abs(ratio - round(ratio)) > 1e-9:
            raise ConfigError("key 'run.h': must divide the period when "
                              "analysis.expected_period is set")
    return cfg


def load_config(path):
    with open(path, "r", encoding="utf8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}") from exc
    return parse_config(data)


def config_digest(config):
    """SHA-256 over the canonical JSON form; embedded in every report."""
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf8")).hexdigest()


def builtin_example_config():
    """The built-in demonstration experiment.

    Cosine rate 4 - cos(pi t / 6) with period 12 split into seasons of
    lengths (2, 2, 2, 3, 3) carrying laws N(3,1), N(0,1), N(1.25,1.25),
    N(4,1), N(0,1.5); a (1,3) model with alpha0 = 1, alpha1 = 0.03,
    beta = (5, 9, 5); 40 periods sampled at unit steps, coherence
    window 240 at level 0.05, expected period 12.
    """
    return parse_config({
        "model": {
            "intensity": {"form": "cosine", "a": 4.0, "b": 1.0, "tau": 12.0},
            "partition": {
                "lengths": [2, 2, 2, 3, 3],
                "laws": [
                    {"type": "normal", "mu": 3.0, "sigma2": 1.0},
                    {"type": "normal", "mu": 0.0, "sigma2": 1.0},
                    {"type": "normal", "mu": 1.25, "sigma2": 1.25},
                    {"type": "normal", "mu": 4.0, "sigma2": 1.0},
                    {"type": "normal", "mu": 0.0, "sigma2": 1.5},
                ],
            },
            "drift": {"form": "zero"},
        },
        "cogarch": {
            "p": 1, "q": 3, "alpha0": 1.0, "alpha": [0.03],
            "beta": [5.0, 9.0, 5.0],
            "y0": [8.3580, 2.3377, 0.9040],
        },
        "run": {"horizon_periods": 40, "h": 1.0, "seed": 20260801,
                "replicates": 4000},
        "analysis": {"M": 240, "alpha": 0.05, "expected_period": 12},
    })
