"""Hyperparameters of the ensemble trainer."""

from dataclasses import asdict, dataclass
import math

from .exceptions import ConfigError

ACTIVATIONS = ("sigmoid", "tanh")


@dataclass(frozen=True)
class NcelmConfig:
    """Hyperparameters of one NCELM training run.

    Attributes
    ----------
    S : int
        Number of base learners.
    D : int
        Hidden nodes per learner.
    C : float
        Inverse ridge strength; larger means weaker regularization.
    lam : float
        Diversity (negative correlation) strength, ``>= 0``.
    max_iterations : int
        Upper bound on fixed-point iterations.
    tolerance : float
        Stop once the squared L2 distance between consecutive iterates
        drops to or below this value. ``0`` runs the full iteration count.
    seed : int
        Base seed; learner ``s`` uses ``seed + s``.
    activation : str
        ``"sigmoid"`` or ``"tanh"``.
    """

    S: int = 5
    D: int = 50
    C: float = 1.0
    lam: float = 0.0
    max_iterations: int = 10
    tolerance: float = 0.0
    seed: int = 0
    activation: str = "sigmoid"

    def __post_init__(self):
        if int(self.S) != self.S or self.S < 1:
            raise ConfigError(f"S must be a positive integer, got {self.S!r}")
        if int(self.D) != self.D or self.D < 1:
            raise ConfigError(f"D must be a positive integer, got {self.D!r}")
        if not (self.C > 0) or math.isnan(self.C):
            raise ConfigError(f"C must be > 0, got {self.C!r}")
        if not (self.lam >= 0) or math.isinf(self.lam):
            raise ConfigError(f"lambda must be finite and >= 0, got {self.lam!r}")
        if int(self.max_iterations) != self.max_iterations or self.max_iterations < 1:
            raise ConfigError(
                f"max_iterations must be >= 1, got {self.max_iterations!r}")
        if not (self.tolerance >= 0):
            raise ConfigError(f"tolerance must be >= 0, got {self.tolerance!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ConfigError(f"seed must be a non-negative integer, got {self.seed!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(
                f"activation must be one of {ACTIVATIONS}, got {self.activation!r}")

    def to_dict(self):
        d = asdict(self)
        # inf tolerance is legal but not valid JSON
        if math.isinf(d["tolerance"]):
            d["tolerance"] = "inf"
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if d.get("tolerance") == "inf":
            d["tolerance"] = math.inf
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc


# flat config-file keys -> NcelmConfig fields
_FILE_KEYS = {
    "learners": "S",
    "hidden": "D",
    "C": "C",
    "lambda": "lam",
    "iterations": "max_iterations",
    "tolerance": "tolerance",
    "seed": "seed",
    "activation": "activation",
}
_RUN_KEYS = ("dataset", "label_column", "test_fraction", "output_dir", "emit_trace")


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI run needs. Defaults: C=1, 10 iterations, S=5, D=50."""

    dataset_path: str
    label_column: object = -1
    test_fraction: float = 0.25
    ncelm: NcelmConfig = NcelmConfig()
    output_dir: str = "ncelm-out"
    emit_trace: bool = True

    def __post_init__(self):
        if not self.dataset_path:
            raise ConfigError("dataset path is empty")
        if not self.output_dir:
            raise ConfigError("output directory is empty")
        if not 0.0 < float(self.test_fraction) < 1.0:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")


def read_config_file(path):
    """Parse a flat TOML file into a plain dict; unknown keys are rejected."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    unknown = set(data) - set(_FILE_KEYS) - set(_RUN_KEYS)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    for k, v in data.items():
        if isinstance(v, dict):
            raise ConfigError(f"{path}: key {k!r} must be a scalar (flat format)")
    return data


def build_run_config(file_values=None, overrides=None):
    """Merge file values with command-line overrides (overrides win).

    Both mappings use the config-file key names; ``None`` override values
    are ignored.
    """
    merged = dict(file_values or {})
    merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
    ncelm_kwargs = {field: merged.pop(key) for key, field in _FILE_KEYS.items() if key in merged}
    try:
        ncelm_kwargs = {k: (float(v) if k in ("C", "lam", "tolerance") else v)
                        for k, v in ncelm_kwargs.items()}
        cfg = NcelmConfig(**ncelm_kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if "dataset" not in merged:
        raise ConfigError("no dataset given (config key 'dataset' or --data)")
    kwargs = {"dataset_path": str(merged["dataset"]), "ncelm": cfg}
    for key in ("label_column", "test_fraction", "output_dir", "emit_trace"):
        if key in merged:
            kwargs[key] = merged[key]
    return RunConfig(**kwargs)
