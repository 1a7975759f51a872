"""Key-value run configuration: defaults < config file < command-line overrides."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .data import GeneratorConfig, default_transitions
from .models import TrnConfig
from .models.config import ConfigError
from .training import TrainConfig


@dataclass(frozen=True)
class RunConfig:
    # architecture
    model: str = "trn"
    hidden_dim: int = 32
    decoder_steps: int = 8
    score_embed_dim: int = 16
    future_dim: int = 0
    # optimisation
    lr: float = 0.0005
    weight_decay: float = 0.0005
    batch_size: int = 32
    epochs: int = 10
    alpha: float = 1.0
    sequence_len: int = 90
    seed: int = 0
    # synthetic data
    num_videos: int = 50
    frames_per_video: int = 600
    num_actions: int = 4
    feature_dim: int = 16
    mean_segment_len: float = 20.0
    noise: float = 1.0
    precursor_strength: float = 0.7
    precursor_len: int = 6
    background_return: float = 0.5
    video_offset: int = 0
    # paths
    train_data: str = ""
    test_data: str = ""
    log: str = ""

    def trn_config(self, feature_dim: int | None = None, num_actions: int | None = None, **kw) -> TrnConfig:
        base = dict(
            feature_dim=self.feature_dim if feature_dim is None else feature_dim,
            num_actions=self.num_actions if num_actions is None else num_actions,
            hidden_dim=self.hidden_dim,
            decoder_steps=self.decoder_steps,
            sequence_len=self.sequence_len,
            alpha=self.alpha,
            score_embed_dim=self.score_embed_dim,
            future_dim=self.future_dim,
            model=self.model,
        )
        base.update(kw)
        return TrnConfig(**base)

    def train_config(self, **kw) -> TrainConfig:
        base = dict(
            lr=self.lr,
            weight_decay=self.weight_decay,
            batch_size=self.batch_size,
            epochs=self.epochs,
            alpha=self.alpha,
            seed=self.seed,
            sequence_len=self.sequence_len,
        )
        base.update(kw)
        return TrainConfig(**base)

    def generator_config(self) -> GeneratorConfig:
        return GeneratorConfig(
            num_videos=self.num_videos,
            frames_per_video=self.frames_per_video,
            num_actions=self.num_actions,
            feature_dim=self.feature_dim,
            mean_segment_len=self.mean_segment_len,
            noise=self.noise,
            precursor_strength=self.precursor_strength,
            precursor_len=self.precursor_len,
            seed=self.seed,
            video_offset=self.video_offset,
            transitions=default_transitions(self.num_actions, self.background_return),
        )


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(key: str, raw: str):
    if key not in _TYPES:
        raise ConfigError(f"unknown config key {key!r}")
    t = _TYPES[key]
    raw = raw.strip()
    try:
        if t == "int":
            return int(raw)
        if t == "float":
            return float(raw)
    except ValueError:
        raise ConfigError(f"config key {key!r} expects {t}, got {raw!r}") from None
    return raw


def parse_config_text(text: str, source: str = "<config>") -> dict:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        try:
            values[key] = _coerce(key, val)
        except ConfigError as exc:
            raise ConfigError(f"{source}:{lineno}: {exc}") from None
    return values


def load_config(path: str | None = None, overrides: dict | list | None = None) -> RunConfig:
    """Build a RunConfig from defaults, an optional file, then overrides.

    ``overrides`` is a dict of typed values or a list of ``key=value`` strings.
    """
    cfg = RunConfig()
    if path:
        with open(path) as fh:
            cfg = replace(cfg, **parse_config_text(fh.read(), str(path)))
    if overrides:
        if isinstance(overrides, dict):
            items = overrides.items()
        else:
            items = []
            for item in overrides:
                if "=" not in item:
                    raise ConfigError(f"override must be key=value, got {item!r}")
                k, _, v = item.partition("=")
                items.append((k.strip(), v))
        typed = {k: (_coerce(k, v) if isinstance(v, str) else v) for k, v in items}
        for k in typed:
            if k not in _TYPES:
                raise ConfigError(f"unknown config key {k!r}")
        cfg = replace(cfg, **typed)
    return cfg


def config_to_text(cfg: RunConfig) -> str:
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in fields(RunConfig))
