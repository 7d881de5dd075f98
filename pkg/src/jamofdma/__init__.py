"""Jammer-assisted secure OFDMA resource allocation."""

from .channel_model import (
    ChannelParseError,
    ChannelRealization,
    ScenarioConfig,
    db_to_linear,
    dump_channels,
    example_fixture,
    generate_channels,
    load_channels,
)
from .secure_rate import PowerAllocation, SchemeOutcome, fairness_gap, secure_rate

__version__ = "0.1.0"
