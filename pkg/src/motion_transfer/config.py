"""Training configuration read from a flat ``key = value`` file.

Values are JSON literals (numbers, ``true``/``false``, ``[1, 2]``, ``"text"``);
a bare word that is not valid JSON is taken as a string, so paths need no
quotes. ``#`` starts a comment. Unknown keys are rejected.
"""
import json
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError, ParseError
from .losses import LossWeights
from .model import ModelConfig


@dataclass
class TrainConfig:
    data: str = "data/manifest.json"
    out_dir: str = "runs/default"
    epochs: int = 10
    batch_size: int = 4
    steps_per_epoch: int = 0          # 0 -> dataset_size // batch_size
    lr_g: float = 1e-4
    lr_d: float = 4e-4
    decay_start_epoch: int = 5
    seed: int = 0
    checkpoint_every: int = 1         # epochs between numbered checkpoints
    log_every: int = 1
    # loss weights
    w_rec: float = 10.0
    w_fm: float = 10.0
    w_adv: float = 1.0
    w_mutual: float = 1.0
    w_tv: float = 0.5
    w_mask: float = 1.0
    w_style: float = 10.0
    mutual_temperature: float = 200.0
    # model
    image_size: int = 64
    enc_depths: list = field(default_factory=lambda: [1, 1, 2])
    dec_depths: list = field(default_factory=lambda: [1, 2, 3])
    channels: list = field(default_factory=lambda: [32, 64, 128])
    heads: list = field(default_factory=lambda: [2, 4, 8])
    stripe_widths: list = field(default_factory=lambda: [1, 2, 4])
    mlp_ratio: float = 4.0
    disc_channels: list = field(default_factory=lambda: [64, 128, 256, 512])
    dense_cross_attention: bool = False
    fx_channels: list = field(default_factory=lambda: [16, 32, 64, 64, 64])

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lr_g <= 0 or self.lr_d <= 0:
            raise ConfigError("learning rates must be positive")
        if self.steps_per_epoch < 0 or self.checkpoint_every < 1 or self.log_every < 1:
            raise ConfigError("steps_per_epoch must be >= 0, checkpoint_every and log_every >= 1")

    def model(self):
        return ModelConfig(image_size=self.image_size, enc_depths=list(self.enc_depths),
                           dec_depths=list(self.dec_depths), channels=list(self.channels),
                           heads=list(self.heads), stripe_widths=list(self.stripe_widths),
                           mlp_ratio=self.mlp_ratio, disc_channels=list(self.disc_channels),
                           dense_cross_attention=self.dense_cross_attention, seed=self.seed)

    def weights(self):
        return LossWeights(rec=self.w_rec, fm=self.w_fm, adv=self.w_adv, mutual=self.w_mutual,
                           tv=self.w_tv, mask=self.w_mask, style=self.w_style)

    def to_dict(self):
        return asdict(self)

    def dumps(self):
        return "".join(f"{k} = {json.dumps(v)}\n" for k, v in self.to_dict().items())


_TYPES = {f.name: f.type for f in fields(TrainConfig)}


def _coerce(key, value, where):
    kind = _TYPES[key]
    ok = {
        int: lambda v: isinstance(v, int) and not isinstance(v, bool),
        float: lambda v: isinstance(v, (int, float)) and not isinstance(v, bool),
        bool: lambda v: isinstance(v, bool),
        str: lambda v: isinstance(v, str),
        list: lambda v: isinstance(v, list),
    }[kind]
    if not ok(value):
        raise ConfigError(f"{where}: {key} expects {kind.__name__}, got {value!r}")
    return float(value) if kind is float else value


def parse_config(text, source="<config>", **overrides):
    values, offset = {}, 0
    for lineno, line in enumerate(text.splitlines(keepends=True), 1):
        body = line.split("#", 1)[0].strip()
        start = offset
        offset += len(line.encode())
        if not body:
            continue
        if "=" not in body:
            raise ParseError(f"{source}:{lineno}: expected 'key = value'", start)
        key, raw = (s.strip() for s in body.split("=", 1))
        where = f"{source}:{lineno}"
        if key not in _TYPES:
            raise ConfigError(f"{where}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        values[key] = _coerce(key, value, where)
    values.update(overrides)
    return TrainConfig(**values)


def load_config(path, **overrides):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), str(path), **overrides)
