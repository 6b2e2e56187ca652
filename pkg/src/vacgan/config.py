"""Run configuration: a flat ``key = value`` text format with dotted keys.

Example::

    run.seed = 3
    train.scheme = vacgan_on_gan
    train.steps = 5000
    data.kind = two_gaussians
    generator.role = generator
    generator.widths = 4,32,32,2
    discriminator.role = discriminator_scalar
    discriminator.widths = 2,32,32,1

Lines starting with ``#`` are comments. Tuples are comma separated; nested
tuples separate their outer level with ``;``. ``none``, ``true`` and
``false`` are literals. Floats are written with ``repr`` so that
``parse(serialize(cfg)) == cfg`` holds exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable, Optional

from vacgan.data import DatasetSpec
from vacgan.errors import ConfigError, InvalidConfig
from vacgan.models import ModelConfig
from vacgan.training import BeganState, OptimizerSettings, TrainConfig, VacGanWeights

REQUIRED = ("train.scheme", "train.steps", "data.kind", "generator.role", "discriminator.role")


@dataclass(frozen=True)
class RunConfig:
    """Everything one CLI invocation needs: training, data and evaluation settings."""

    train: TrainConfig
    data: DatasetSpec
    data_n_per_class: int = 1000
    eval_n_per_class: int = 80
    eval_jsd_samples: int = 1000
    eval_seed: int = 0
    out: str = "runs/default"

    @property
    def seed(self) -> int:
        return self.train.seed

    def with_seed(self, seed: int) -> "RunConfig":
        return replace(self, train=replace(self.train, seed=seed))


# -- value codecs ----------------------------------------------------------------

def _none_or(decode: Callable[[str], Any]) -> Callable[[str], Any]:
    return lambda s: None if s == "none" else decode(s)


def _bool(s: str) -> bool:
    if s not in ("true", "false"):
        raise ValueError(f"expected true or false, got {s!r}")
    return s == "true"


def _ints(s: str) -> tuple[int, ...]:
    return tuple(int(v) for v in s.split(",")) if s else ()


def _floats(s: str) -> tuple[float, ...]:
    return tuple(float(v) for v in s.split(",")) if s else ()


def _float_rows(s: str) -> tuple[tuple[float, ...], ...]:
    return tuple(_floats(part) for part in s.split(";"))


def _matrices(s: str) -> tuple:
    """Flattened 2x2 matrices separated by ``;``."""
    out = []
    for part in s.split(";"):
        v = _floats(part)
        if len(v) != 4:
            raise ValueError("each covariance needs four entries")
        out.append(((v[0], v[1]), (v[2], v[3])))
    return tuple(out)


def _fmt(value: Any) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        if value and isinstance(value[0], tuple):
            if value[0] and isinstance(value[0][0], tuple):
                return ";".join(",".join(_fmt(x) for row in m for x in row) for m in value)
            return ";".join(",".join(_fmt(x) for x in row) for row in value)
        return ",".join(_fmt(x) for x in value)
    return str(value)


# -- schema ----------------------------------------------------------------------

_MODEL_FIELDS = (
    ("role", str),
    ("widths", _ints),
    ("channels", _ints),
    ("image_side", _none_or(int)),
    ("dense", int),
    ("activation", _none_or(str)),
)
_OPTIM_FIELDS = (("kind", str), ("learning_rate", float), ("beta1", float), ("beta2", float), ("momentum", float))

# key -> decoder, in canonical output order
SCHEMA: dict[str, Callable[[str], Any]] = {
    "run.seed": int,
    "run.out": str,
    "train.scheme": str,
    "train.steps": int,
    "train.batch_size": int,
    "train.conditioning_mode": str,
    "train.gan_loss": str,
    "train.classifier_steps": int,
    "train.classifier_real_data": _bool,
    "latent.dim": int,
    "weights.vartheta": float,
    "weights.zeta": float,
    "began.k0": float,
    "began.lambda_k": float,
    "began.gamma": float,
    **{f"optim.gd.{k}": f for k, f in _OPTIM_FIELDS},
    **{f"optim.c.{k}": f for k, f in _OPTIM_FIELDS},
    **{f"{m}.{k}": f for m in ("generator", "discriminator", "classifier") for k, f in _MODEL_FIELDS},
    "data.kind": str,
    "data.seed": int,
    "data.n_per_class": int,
    "data.means": _float_rows,
    "data.covariances": _matrices,
    "data.radii": _floats,
    "data.noise": float,
    "data.image_side": int,
    "data.corpus_path": _none_or(str),
    "data.manifest": _none_or(str),
    "eval.n_per_class": int,
    "eval.jsd_samples": int,
    "eval.seed": int,
}


def parse_pairs(text: str) -> dict[str, str]:
    """Split config text into raw ``key -> value`` strings."""
    pairs: dict[str, str] = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {n}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key}", key)
        if key in pairs:
            raise ConfigError(f"duplicate key {key}", key)
        pairs[key] = value
    return pairs


def _model(values: dict[str, Any], prefix: str) -> Optional[ModelConfig]:
    fields = {k: values[f"{prefix}.{k}"] for k, _ in _MODEL_FIELDS if f"{prefix}.{k}" in values}
    if fields.get("role", "none") == "none":
        return None
    return ModelConfig(**fields)


def _optim(values: dict[str, Any], prefix: str, default: OptimizerSettings) -> OptimizerSettings:
    fields = {k: values[f"{prefix}.{k}"] for k, _ in _OPTIM_FIELDS if f"{prefix}.{k}" in values}
    return replace(default, **fields)


def parse(text: str) -> RunConfig:
    """Parse and validate config text; errors are :class:`ConfigError` naming the key."""
    pairs = parse_pairs(text)
    for key in REQUIRED:
        if key not in pairs:
            raise ConfigError(f"missing required key {key}", key)
    values = {}
    for key, raw in pairs.items():
        try:
            values[key] = SCHEMA[key](raw)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key}: {exc}", key) from exc

    def get(key, default):
        return values.get(key, default)

    try:
        weights = VacGanWeights(get("weights.vartheta", 0.997), get("weights.zeta", 0.003))
    except InvalidConfig as exc:
        raise ConfigError(f"weights: {exc}", "weights.vartheta") from exc
    try:
        began = BeganState(get("began.k0", 0.0), get("began.lambda_k", 0.001), get("began.gamma", 0.5))
    except InvalidConfig as exc:
        raise ConfigError(f"began: {exc}", "began.gamma") from exc

    models = {}
    for prefix in ("generator", "discriminator", "classifier"):
        try:
            models[prefix] = _model(values, prefix)
            if models[prefix] is not None:
                models[prefix].validate()
        except (InvalidConfig, TypeError) as exc:
            raise ConfigError(f"{prefix}: {exc}", f"{prefix}.role") from exc
    if models["generator"] is None or models["discriminator"] is None:
        key = "generator.role" if models["generator"] is None else "discriminator.role"
        raise ConfigError(f"{key} may not be none", key)

    defaults = TrainConfig("gan", models["generator"], models["discriminator"])
    train = TrainConfig(
        scheme=values["train.scheme"],
        generator=models["generator"],
        discriminator=models["discriminator"],
        classifier=models["classifier"],
        conditioning_mode=get("train.conditioning_mode", defaults.conditioning_mode),
        latent_dim=get("latent.dim", defaults.latent_dim),
        batch_size=get("train.batch_size", defaults.batch_size),
        steps=values["train.steps"],
        seed=get("run.seed", 0),
        weights=weights,
        began=began,
        optim_gd=_optim(values, "optim.gd", defaults.optim_gd),
        optim_c=_optim(values, "optim.c", defaults.optim_c),
        gan_loss=get("train.gan_loss", defaults.gan_loss),
        classifier_steps=get("train.classifier_steps", defaults.classifier_steps),
        classifier_real_data=get("train.classifier_real_data", defaults.classifier_real_data),
    )
    try:
        train.validate()
    except InvalidConfig as exc:
        raise ConfigError(f"train: {exc}", _blame(str(exc))) from exc

    spec_default = DatasetSpec(values["data.kind"])
    data = DatasetSpec(
        kind=values["data.kind"],
        seed=get("data.seed", spec_default.seed),
        means=get("data.means", spec_default.means),
        covariances=get("data.covariances", spec_default.covariances),
        radii=get("data.radii", spec_default.radii),
        noise=get("data.noise", spec_default.noise),
        image_side=get("data.image_side", spec_default.image_side),
        corpus_path=get("data.corpus_path", spec_default.corpus_path),
        manifest=get("data.manifest", spec_default.manifest),
    )
    if data.kind not in ("two_gaussians", "gaussian_ring_pair", "procedural_glyphs", "external"):
        raise ConfigError(f"unknown data.kind {data.kind!r}", "data.kind")
    if data.kind == "external" and data.corpus_path is None:
        raise ConfigError("data.kind external needs data.corpus_path", "data.corpus_path")
    run = RunConfig(
        train=train,
        data=data,
        data_n_per_class=get("data.n_per_class", 1000),
        eval_n_per_class=get("eval.n_per_class", 80),
        eval_jsd_samples=get("eval.jsd_samples", 1000),
        eval_seed=get("eval.seed", 0),
        out=get("run.out", "runs/default"),
    )
    for key, v in (("data.n_per_class", run.data_n_per_class), ("eval.n_per_class", run.eval_n_per_class),
                   ("eval.jsd_samples", run.eval_jsd_samples)):
        if v < 1:
            raise ConfigError(f"{key} must be at least 1", key)
    return run


def _blame(message: str) -> str:
    """Best-effort mapping from a TrainConfig validation message to a key."""
    for needle, key in (
        ("scheme", "train.scheme"),
        ("conditioning_mode", "train.conditioning_mode"),
        ("gan_loss", "train.gan_loss"),
        ("classifier", "classifier.role"),
        ("discriminator", "discriminator.role"),
        ("generator", "generator.role"),
        ("batch_size", "train.batch_size"),
    ):
        if needle in message:
            return key
    return "train.scheme"


def to_values(cfg: RunConfig) -> dict[str, Any]:
    """Flatten ``cfg`` to typed values keyed like the file format."""
    t = cfg.train
    v: dict[str, Any] = {
        "run.seed": t.seed,
        "run.out": cfg.out,
        "train.scheme": t.scheme,
        "train.steps": t.steps,
        "train.batch_size": t.batch_size,
        "train.conditioning_mode": t.conditioning_mode,
        "train.gan_loss": t.gan_loss,
        "train.classifier_steps": t.classifier_steps,
        "train.classifier_real_data": t.classifier_real_data,
        "latent.dim": t.latent_dim,
        "weights.vartheta": t.weights.vartheta,
        "weights.zeta": t.weights.zeta,
        "began.k0": t.began.k_t,
        "began.lambda_k": t.began.lambda_k,
        "began.gamma": t.began.gamma,
    }
    for prefix, opt in (("optim.gd", t.optim_gd), ("optim.c", t.optim_c)):
        for k, _ in _OPTIM_FIELDS:
            v[f"{prefix}.{k}"] = getattr(opt, k)
    for prefix, model in (("generator", t.generator), ("discriminator", t.discriminator), ("classifier", t.classifier)):
        if model is None:
            v[f"{prefix}.role"] = "none"
            continue
        for k, _ in _MODEL_FIELDS:
            v[f"{prefix}.{k}"] = getattr(model, k)
    d = cfg.data
    v.update({
        "data.kind": d.kind,
        "data.seed": d.seed,
        "data.n_per_class": cfg.data_n_per_class,
        "data.means": d.means,
        "data.covariances": d.covariances,
        "data.radii": d.radii,
        "data.noise": d.noise,
        "data.image_side": d.image_side,
        "data.corpus_path": d.corpus_path,
        "data.manifest": d.manifest,
        "eval.n_per_class": cfg.eval_n_per_class,
        "eval.jsd_samples": cfg.eval_jsd_samples,
        "eval.seed": cfg.eval_seed,
    })
    return v


def serialize(cfg: RunConfig) -> str:
    """Canonical text form: every key, in schema order."""
    values = to_values(cfg)
    lines = [f"{key} = {_fmt(values[key])}" for key in SCHEMA if key in values]
    return "\n".join(lines) + "\n"


def load(path) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse(text)


def canonical_2d(scheme: str = "vacgan_on_gan", steps: int = 5000, seed: int = 0) -> RunConfig:
    """The two-Gaussians toy setup in config form."""
    from vacgan.experiments import toy_train_config

    return RunConfig(toy_train_config(scheme, seed, steps), DatasetSpec("two_gaussians", seed=10_000 + seed), 2000)


def canonical_glyphs(scheme: str = "vacgan_on_began", steps: int = 300, seed: int = 0) -> RunConfig:
    """The 8x8 procedural-glyph setup in config form."""
    from vacgan.experiments import glyph_train_config

    return RunConfig(glyph_train_config(scheme, seed, steps), DatasetSpec("procedural_glyphs", seed=seed), 500)


__all__ = [
    "REQUIRED",
    "RunConfig",
    "SCHEMA",
    "canonical_2d",
    "canonical_glyphs",
    "load",
    "parse",
    "parse_pairs",
    "serialize",
    "to_values",
]
