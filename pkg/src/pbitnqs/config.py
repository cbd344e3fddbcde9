"""Run configuration: flat ``namespace.key = value`` text, validated before any compute.

Example::

    # 3x3 FRBM
    lattice.L = 3
    model.arch = frbm
    model.k1 = 1
    sampling.ns = 2000
    optimizer.profile = hardware
    output.dir = runs/l3

Lines starting with ``#`` or ``;`` are comments. Unknown keys are errors.
"""
from dataclasses import dataclass
import configparser
import hashlib
import json

from .model import DBM, FRBM
from .sr import PROFILES
from .trainer import TrainingConfig

_SECTION = "run-config"
REQUIRED = object()


class ConfigError(ValueError):
    pass


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _arch(s):
    v = s.strip().lower()
    if v == "rbm":
        v = FRBM
    if v not in (FRBM, DBM):
        raise ValueError(f"arch must be frbm, rbm or dbm, got {s!r}")
    return v


def _profile(s):
    if s not in PROFILES:
        raise ValueError(f"profile must be one of {sorted(PROFILES)}")
    return s


def _list(conv):
    def parse(s):
        return [conv(x) for x in s.replace(",", " ").split()]
    return parse


# key -> (parser, default)
SCHEMA = {
    "run.seed": (int, 0),
    "lattice.L": (int, REQUIRED),
    "lattice.J": (float, 1.0),
    "lattice.gamma": (float, 3.044),
    "model.arch": (_arch, FRBM),
    "model.k1": (float, 2.0),
    "model.k2": (float, None),
    "model.checkpoint": (str, None),
    "sampling.ns": (int, 10_000),
    "sampling.nc": (int, 1000),
    "sampling.burn_in": (int, None),
    "sampling.sweeps_per_sample": (int, 1),
    "sampling.beta": (float, 1.0),
    "sampling.threads": (int, None),
    "sampling.n": (int, 1000),
    "evaluation.n": (int, 1_000_000),
    "evaluation.nc": (int, None),
    "evaluation.bins": (int, 50),
    "optimizer.profile": (_profile, "algorithmic"),
    "optimizer.n_iter": (int, 1000),
    "optimizer.eta_max": (float, None),
    "optimizer.eta_min": (float, None),
    "optimizer.lambda0": (float, None),
    "optimizer.b0": (float, None),
    "optimizer.lambda_min": (float, None),
    "optimizer.cg_tol": (float, None),
    "optimizer.cg_max": (int, None),
    "optimizer.lr_scale": (float, 1.0),
    "partition.P": (int, 1),
    "partition.tau": (int, 1),
    "partition.taus": (_list(int), [1, 2, 5, 10]),
    "partition.sweeps": (int, 100_000),
    "quantization.enabled": (_bool, False),
    "oracle.J": (float, 1.0),
    "oracle.chains": (_list(int), []),
    "oracle.lattices": (_list(int), []),
    "oracle.gammas": (_list(float), [3.044]),
    "output.dir": (str, "run"),
}

_SCHEDULE_KEYS = ("eta_max", "eta_min", "lambda0", "b0", "lambda_min", "cg_tol", "cg_max")


@dataclass
class RunConfig:
    values: dict
    given: frozenset

    def __getitem__(self, key):
        return self.values[key]

    def require(self, *keys):
        for k in keys:
            if self.values.get(k, REQUIRED) is REQUIRED:
                raise ConfigError(f"missing required key {k}")

    def canonical(self):
        """Resolved values, sorted, as JSON text; the basis of the config hash."""
        v = {k: val for k, val in self.values.items() if val is not REQUIRED}
        return json.dumps(v, sort_keys=True, separators=(",", ":"))

    def hash(self):
        return hashlib.sha256(self.canonical().encode()).hexdigest()

    def to_text(self):
        lines = []
        for k in sorted(self.given):
            val = self.values[k]
            if isinstance(val, list):
                val = " ".join(str(x) for x in val)
            elif isinstance(val, bool):
                val = str(val).lower()
            lines.append(f"{k} = {val}")
        return "\n".join(lines) + "\n"

    def training_config(self):
        self.require("lattice.L")
        v = self.values
        overrides = {k: v[f"optimizer.{k}"] for k in _SCHEDULE_KEYS if v[f"optimizer.{k}"] is not None}
        try:
            return TrainingConfig(
                L=v["lattice.L"], arch=v["model.arch"], k1=v["model.k1"], k2=v["model.k2"],
                J=v["lattice.J"], gamma=v["lattice.gamma"], n_iter=v["optimizer.n_iter"],
                n_s=v["sampling.ns"], n_c=v["sampling.nc"], n_eval=v["evaluation.n"],
                eval_n_c=v["evaluation.nc"], profile=v["optimizer.profile"],
                schedule_overrides=overrides, seed=v["run.seed"], quantize=v["quantization.enabled"],
                burn_in=v["sampling.burn_in"], sweeps_per_sample=v["sampling.sweeps_per_sample"],
                bins=v["evaluation.bins"], beta=v["sampling.beta"], threads=v["sampling.threads"],
                partitions=v["partition.P"], tau=v["partition.tau"], lr_scale=v["optimizer.lr_scale"])
        except ValueError as exc:
            raise ConfigError(str(exc)) from None


def parse_config(text):
    cp = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                   inline_comment_prefixes=("#",), delimiters=("=",))
    cp.optionxform = str
    try:
        cp.read_string(f"[{_SECTION}]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    if cp.sections() != [_SECTION]:
        raise ConfigError("section headers are not used; write keys as namespace.key = value")
    raw = dict(cp.items(_SECTION))
    unknown = sorted(set(raw) - set(SCHEMA))
    if unknown:
        raise ConfigError(f"unknown key(s): {', '.join(unknown)}")
    values = {}
    for key, (conv, default) in SCHEMA.items():
        if key in raw:
            try:
                values[key] = conv(raw[key])
            except ValueError as exc:
                raise ConfigError(f"bad value for {key}: {exc}") from None
        else:
            values[key] = default
    return RunConfig(values, frozenset(raw))


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if str(path).endswith(".json"):
        try:
            text = json.loads(text)["config_text"]
        except (ValueError, KeyError, TypeError):
            raise ConfigError(f"{path} is not a run manifest") from None
    return parse_config(text)
