"""Tracker architecture configuration and key=value config files."""

from dataclasses import dataclass, asdict, fields

from .errors import ConfigError


@dataclass
class TrackerConfig:
    patch_size: int = 16
    embed_dim: int = 192
    num_layers: int = 12
    num_heads: int = 3
    mlp_ratio: float = 4.0
    template_size: int = 128
    search_size: int = 256
    ssd_state_count: int = 16
    aconv_kernel_count: int = 2
    head_channels: int = 192
    num_taps: int = 3
    hanning_weight: float = 0.49

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.template_size % self.patch_size or self.search_size % self.patch_size:
            raise ConfigError("template/search size must be divisible by patch size")
        if self.embed_dim % self.num_heads:
            raise ConfigError("embed_dim must be divisible by num_heads")
        if self.num_taps > self.num_layers:
            raise ConfigError("num_taps exceeds num_layers")
        if self.aconv_kernel_count < 1:
            raise ConfigError("aconv_kernel_count must be >= 1")
        if self.ssd_state_count * 2 > self.joint_len:
            raise ConfigError("ssd_state_count must be <= half the token count")
        if not 0.0 <= self.hanning_weight <= 1.0:
            raise ConfigError("hanning_weight outside [0, 1]")

    @property
    def template_grid(self):
        n = self.template_size // self.patch_size
        return (n, n)

    @property
    def search_grid(self):
        n = self.search_size // self.patch_size
        return (n, n)

    @property
    def template_len(self):
        h, w = self.template_grid
        return h * w

    @property
    def search_len(self):
        h, w = self.search_grid
        return h * w

    @property
    def joint_len(self):
        return self.template_len + self.search_len

    def to_text(self):
        lines = [f"{k}={v}" for k, v in asdict(self).items()]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        known = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
            key, value = (s.strip() for s in line.split("=", 1))
            if key not in known:
                raise ConfigError(f"line {lineno}: unknown key {key!r}")
            kwargs[key] = float(value) if known[key] is float else int(value)
        return cls(**kwargs)


def desk_config():
    """Small configuration that trains on a CPU in minutes."""
    return TrackerConfig(
        patch_size=16,
        embed_dim=64,
        num_layers=4,
        num_heads=2,
        mlp_ratio=2.0,
        template_size=64,
        search_size=128,
        ssd_state_count=8,
        aconv_kernel_count=2,
        head_channels=64,
    )
