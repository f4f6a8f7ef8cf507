"""YAML run configuration and the objects built from it."""

import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .design import ACEOptions, DesignSpace
from .kinetics import MODELS, get_model
from .laplace import LaplaceOptions
from .sampling import PriorSpec, check_model_prior
from .summaries import SummaryScheme
from .surrogate import LinearGaussianModel, PeakScale
from .synlik import CTMCSummaryModel
from .utilities import check_kind

SURROGATE_ID = "linear-gaussian"


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


def _require(mapping, key, where):
    if key not in mapping:
        raise ConfigError(f"{where}: missing field '{key}'")
    return mapping[key]


def _reject_unknown(mapping, cls, where):
    known = {f.name for f in dataclasses.fields(cls)}
    extra = sorted(set(mapping) - known)
    if extra:
        raise ConfigError(f"{where}: unknown field(s) {extra}")


def _floats(x):
    return [float(v) for v in np.atleast_1d(x)]


@dataclass
class ModelConfig:
    """One candidate model: registered id, factory options and log-scale prior.

    For the linear-Gaussian surrogate ``options`` holds ``A``, ``b``,
    ``Sigma`` and optionally ``peak``/``width`` for the design scale.
    """

    id: str
    prior_mean: list
    prior_sd: list
    options: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d, where):
        if not isinstance(d, dict):
            raise ConfigError(f"{where}: expected a mapping")
        _reject_unknown(d, cls, where)
        mid = _require(d, "id", where)
        if mid not in MODELS and mid != SURROGATE_ID:
            raise ConfigError(f"{where}.id: unknown model {mid!r}; expected one of "
                              f"{sorted(MODELS) + [SURROGATE_ID]}")
        try:
            mean = _floats(_require(d, "prior_mean", where))
            sd = _floats(_require(d, "prior_sd", where))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}: prior must be numeric ({exc})") from None
        return cls(mid, mean, sd, dict(d.get("options") or {}))


@dataclass
class EstimatorConfig:
    Q: int = 500
    method: str = "mc"
    n: int = 500
    n_loc: int = 200
    perturb_sd: object = 0.1
    thresholds: list = field(default_factory=lambda: [0.7, 0.1])
    x_tol: float = 1e-3
    f_tol: float = 1e-3
    max_iter: int = 500
    n_randomizations: int = 8
    likelihood: str = "synthetic"

    def check(self):
        if self.Q < 2:
            raise ConfigError(f"estimator.Q: must be >= 2, got {self.Q}")
        if self.method not in ("mc", "rqmc"):
            raise ConfigError(f"estimator.method: must be 'mc' or 'rqmc', got {self.method!r}")
        if self.likelihood not in ("synthetic", "exact"):
            raise ConfigError("estimator.likelihood: must be 'synthetic' or 'exact'")
        if self.n < 3:
            raise ConfigError(f"estimator.n: must be >= 3, got {self.n}")
        if len(self.thresholds) != 2 or not all(0 <= t <= 1 for t in self.thresholds):
            raise ConfigError("estimator.thresholds: need two values in [0, 1]")
        if isinstance(self.perturb_sd, str):
            if self.perturb_sd != "prior":
                raise ConfigError("estimator.perturb_sd: must be numeric or 'prior'")
        elif float(self.perturb_sd) <= 0:
            raise ConfigError("estimator.perturb_sd: must be positive")
        if self.method == "rqmc" and self.Q % self.n_randomizations:
            raise ConfigError("estimator.Q: must be divisible by n_randomizations for rqmc")

    def laplace_options(self):
        return LaplaceOptions(n=self.n, n_loc=self.n_loc, perturb_sd=self.perturb_sd,
                              x_tol=self.x_tol, f_tol=self.f_tol, max_iter=self.max_iter,
                              thresholds=tuple(self.thresholds))


@dataclass
class DesignConfig:
    window: list
    L: int
    min_spacing: float = 0.0


@dataclass
class OptimizerConfig:
    sweeps: int = 10
    Q_emulator: int = 500
    Q_test: int = 5000
    candidates_per_coord: int = 20


@dataclass
class ValidationConfig:
    R: int = 1000
    n_is: int = 500
    inflation: float = 1.2


@dataclass
class RunConfig:
    """Everything a CLI command needs, loaded from one YAML document."""

    models: list
    design: DesignConfig
    utility: str = "SIGP"
    summary: list = field(default_factory=lambda: ["mean", "variance"])
    simulator: str = "ssa"
    tau: float = 0.05
    model_prior: list = None
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    validation: ValidationConfig = field(default_factory=ValidationConfig)
    simulate_Q: int = 1000
    output: str = "out"
    seed: int = 0

    # construction

    @classmethod
    def from_dict(cls, d):
        if not isinstance(d, dict):
            raise ConfigError("config: top level must be a mapping")
        _reject_unknown(d, cls, "config")
        raw_models = _require(d, "models", "config")
        if not isinstance(raw_models, list) or not raw_models:
            raise ConfigError("config.models: need a nonempty list")
        models = [ModelConfig.from_dict(m, f"config.models[{i}]")
                  for i, m in enumerate(raw_models)]
        sections = {}
        for key, sub in (("design", DesignConfig), ("estimator", EstimatorConfig),
                         ("optimizer", OptimizerConfig), ("validation", ValidationConfig)):
            if key not in d:
                continue
            value = d[key]
            if not isinstance(value, dict):
                raise ConfigError(f"config.{key}: expected a mapping")
            _reject_unknown(value, sub, f"config.{key}")
            try:
                sections[key] = sub(**value)
            except TypeError as exc:
                raise ConfigError(f"config.{key}: {exc}") from None
        if "design" not in sections:
            raise ConfigError("config: missing field 'design'")
        rest = {k: v for k, v in d.items() if k not in sections and k != "models"}
        cfg = cls(models=models, **sections, **rest)
        cfg.check()
        return cfg

    @classmethod
    def from_yaml(cls, text):
        try:
            data = yaml.safe_load(text)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config: invalid YAML ({exc})") from None
        return cls.from_dict(data)

    @classmethod
    def load(cls, path):
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"config: cannot read {path} ({exc.strerror})") from None
        return cls.from_yaml(text)

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_yaml(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def check(self):
        try:
            self.utility = check_kind(self.utility)
            self.design_space()
            self.scheme()
            if self.model_prior is not None:
                self.model_prior = _floats(self.model_prior)
                check_model_prior(self.model_prior, len(self.models))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"config: {exc}") from None
        self.estimator.check()
        if self.simulator not in ("ssa", "tau"):
            raise ConfigError(f"config.simulator: must be 'ssa' or 'tau', got {self.simulator!r}")
        if self.tau <= 0:
            raise ConfigError("config.tau: must be positive")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("config.seed: must be a nonnegative integer")
        if self.simulate_Q < 1:
            raise ConfigError("config.simulate_Q: must be >= 1")
        if self.validation.R < 1 or self.validation.n_is < 100:
            raise ConfigError("config.validation: need R >= 1 and n_is >= 100")
        for i in range(len(self.models)):
            self.build_model(i)

    # derived objects

    def design_space(self):
        try:
            return DesignSpace(tuple(self.design.window), int(self.design.L),
                               float(self.design.min_spacing))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"config.design: {exc}") from None

    def scheme(self):
        try:
            return SummaryScheme(tuple(self.summary))
        except ValueError as exc:
            raise ConfigError(f"config.summary: {exc}") from None

    def ace_options(self):
        o = self.optimizer
        return ACEOptions(o.sweeps, o.Q_emulator, o.Q_test, o.candidates_per_coord)

    def build_model(self, i):
        mc = self.models[i]
        where = f"config.models[{i}]"
        try:
            prior = PriorSpec(mc.prior_mean, mc.prior_sd)
        except ValueError as exc:
            raise ConfigError(f"{where}.prior: {exc}") from None
        if mc.id == SURROGATE_ID:
            opts = dict(mc.options)
            try:
                scale = None
                if "peak" in opts:
                    scale = PeakScale(opts.pop("peak"), opts.pop("width", 1.0))
                return LinearGaussianModel(opts.pop("A"), opts.pop("b"), opts.pop("Sigma"),
                                           prior, design_scale=scale, name=SURROGATE_ID)
            except KeyError as exc:
                raise ConfigError(f"{where}.options: missing field {exc}") from None
            except ValueError as exc:
                raise ConfigError(f"{where}.options: {exc}") from None
        try:
            model = get_model(mc.id, **mc.options)
        except TypeError as exc:
            raise ConfigError(f"{where}.options: {exc}") from None
        try:
            return CTMCSummaryModel(model, PriorSpec(mc.prior_mean, mc.prior_sd,
                                                     model.param_names),
                                    self.scheme(), self.simulator, self.tau)
        except ValueError as exc:
            raise ConfigError(f"{where}.prior: {exc}") from None

    def build_models(self):
        return [self.build_model(i) for i in range(len(self.models))]


def preset_names():
    return sorted(p.stem for p in resources.files("sldesign.presets").iterdir()
                  if p.name.endswith(".yaml"))


def load_preset(name):
    """A bundled configuration by name, e.g. ``"death_si"``."""
    path = resources.files("sldesign.presets") / f"{name}.yaml"
    if not path.is_file():
        raise ConfigError(f"unknown preset {name!r}; available: {preset_names()}")
    return RunConfig.from_yaml(path.read_text())
