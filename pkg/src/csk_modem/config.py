"""TOML config files for trials, frame layout, channel, and training.

Sections map onto the dataclasses they configure; unknown sections or keys
are errors so typos fail loudly instead of silently running defaults.
"""

from dataclasses import fields

import tomli

from .errors import ConfigError
from .harness.trials import TrialConfig
from .neural import TrainConfig
from .phy_tx import FrameLayout

LAYOUT_KEYS = ("preamble_slots", "anchor_ids", "slots_per_anchor", "etb_state_slots")

# Channel-facing scalars live on TrialConfig; [channel] is accepted as an
# alias section for them.
CHANNEL_KEYS = (
    "distance_m", "ambient_lux", "noise_sigma", "adc_bits", "fs_hz",
    "full_scale_v", "seed", "profile_set",
)

TRIAL_KEYS = tuple(f.name for f in fields(TrialConfig) if f.name != "layout")
TRAIN_KEYS = tuple(f.name for f in fields(TrainConfig))

SECTIONS = ("trial", "layout", "channel", "train")


def _load_toml(path) -> dict:
    try:
        with open(path, "rb") as f:
            return tomli.load(f)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _check_keys(section: str, data: dict, allowed):
    unknown = set(data) - set(allowed)
    if unknown:
        raise ConfigError(
            f"unknown key(s) in [{section}]: {', '.join(sorted(unknown))}"
        )


def parse_layout_file(path) -> FrameLayout:
    """Flat key-value layout file (the four frame-layout keys)."""
    data = _load_toml(path)
    _check_keys("layout", data, LAYOUT_KEYS)
    return _layout_from_dict(data)


def _layout_from_dict(data: dict) -> FrameLayout:
    kw = dict(data)
    if "anchor_ids" in kw:
        kw["anchor_ids"] = tuple(kw["anchor_ids"])
    try:
        return FrameLayout(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad layout: {exc}") from exc


def load_config(path) -> dict:
    """Parse a config file into {'trial': TrialConfig, 'train': TrainConfig,
    'seed': base seed or None}."""
    raw = _load_toml(path)
    unknown = set(raw) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(unknown))}")

    trial_kw = dict(raw.get("trial", {}))
    _check_keys("trial", trial_kw, TRIAL_KEYS)

    seed = None
    chan = dict(raw.get("channel", {}))
    _check_keys("channel", chan, CHANNEL_KEYS)
    if "seed" in chan:
        seed = int(chan.pop("seed"))
    overlap = set(chan) & set(trial_kw)
    if overlap:
        raise ConfigError(
            f"key(s) set in both [trial] and [channel]: {', '.join(sorted(overlap))}"
        )
    trial_kw.update(chan)

    layout = None
    if "layout" in raw:
        _check_keys("layout", raw["layout"], LAYOUT_KEYS)
        layout = _layout_from_dict(raw["layout"])

    try:
        trial = TrialConfig(**trial_kw) if layout is None else TrialConfig(
            layout=layout, **trial_kw
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad trial config: {exc}") from exc

    train_kw = dict(raw.get("train", {}))
    _check_keys("train", train_kw, TRAIN_KEYS)
    try:
        train = TrainConfig(**train_kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad train config: {exc}") from exc

    return {"trial": trial, "train": train, "seed": seed}
