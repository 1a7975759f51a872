from __future__ import annotations

from dataclasses import asdict, dataclass, fields

MODEL_KINDS = ("trn", "lstm", "ed", "framewise", "rnn-offline")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TrnConfig:
    """Architecture hyperparameters shared by TRN and the baselines.

    Classes run 0..num_actions, with 0 the background class. ``future_dim``
    of 0 means "same as hidden_dim".
    """

    feature_dim: int
    num_actions: int
    hidden_dim: int = 32
    decoder_steps: int = 8
    sequence_len: int = 90
    alpha: float = 1.0
    score_embed_dim: int = 16
    future_dim: int = 0
    model: str = "trn"

    def __post_init__(self):
        if self.model not in MODEL_KINDS:
            raise ConfigError(f"unknown model kind {self.model!r}; expected one of {MODEL_KINDS}")
        for name in ("feature_dim", "num_actions", "hidden_dim", "sequence_len", "score_embed_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1, got {getattr(self, name)}")
        min_ld = 1 if self.model in ("trn", "ed") else 0
        if self.decoder_steps < min_ld:
            raise ConfigError(f"decoder_steps must be >= {min_ld} for {self.model}, got {self.decoder_steps}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be >= 0, got {self.alpha}")
        if self.future_dim < 0:
            raise ConfigError("future_dim must be >= 0")

    @property
    def num_classes(self) -> int:
        return self.num_actions + 1

    @property
    def future_width(self) -> int:
        return self.future_dim or self.hidden_dim

    def to_text(self) -> str:
        return "".join(f"{k}={v!r}\n" if isinstance(v, float) else f"{k}={v}\n" for k, v in asdict(self).items())

    @classmethod
    def from_text(cls, text: str) -> "TrnConfig":
        types = {f.name: f.type for f in fields(cls)}
        kw = {}
        for line in text.splitlines():
            if not line.strip():
                continue
            key, _, val = line.partition("=")
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            t = types[key]
            kw[key] = float(val) if t == "float" else int(val) if t == "int" else val
        return cls(**kw)
