"""
Channel generation and fixture I/O.

Gains are kept as magnitudes ``|h|`` and ``|g|``; every downstream formula
uses only their squares, so phases are never drawn.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

__all__ = [
    "ScenarioConfig",
    "ChannelRealization",
    "ChannelParseError",
    "generate_channels",
    "load_channels",
    "dump_channels",
    "example_fixture",
    "db_to_linear",
]

MIN_NODE_DISTANCE = 1e-3


class ChannelParseError(ValueError):
    """Raised when a channel fixture payload is malformed."""


def db_to_linear(db: float, noise_variance: float = 1.0) -> float:
    """Convert ``P/sigma^2`` in dB to an absolute power."""
    return noise_variance * 10.0 ** (db / 10.0)


@dataclass
class ScenarioConfig:
    """Geometry, budgets and user weights of one downlink scenario.

    Users are dropped uniformly in the unit square ``[0, 1]^2``; the source
    sits at ``source_pos`` and the friendly jammer at ``jammer_pos``.
    """

    num_users: int = 8
    num_subcarriers: int = 64
    source_budget: float = 10.0
    jammer_budget: float = 10.0
    source_pos: tuple = (0.0, 0.0)
    jammer_pos: tuple = (0.5, 0.5)
    path_loss_exponent: float = 3.0
    noise_variance: float = 1.0
    weights: Optional[Sequence[float]] = None
    rng_seed: int = 0

    def __post_init__(self):
        if self.num_users < 2:
            raise ValueError(f"num_users must be >= 2, got {self.num_users}")
        if self.num_subcarriers < 1:
            raise ValueError(f"num_subcarriers must be >= 1, got {self.num_subcarriers}")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")
        if self.source_budget < 0 or self.jammer_budget < 0:
            raise ValueError("power budgets must be non-negative")
        if self.weights is None:
            self.weights = np.ones(self.num_users)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.weights.shape != (self.num_users,):
            raise ValueError(
                f"expected {self.num_users} weights, got {self.weights.shape[0]}")
        if np.any(self.weights <= 0):
            raise ValueError("user weights must be positive")
        self.source_pos = tuple(float(v) for v in self.source_pos)
        self.jammer_pos = tuple(float(v) for v in self.jammer_pos)

    @classmethod
    def from_db(cls, ps_db: float, pj_db: float, noise_variance: float = 1.0,
                **kwargs) -> "ScenarioConfig":
        """Build a config with budgets given as ``P/sigma^2`` in dB."""
        return cls(source_budget=db_to_linear(ps_db, noise_variance),
                   jammer_budget=db_to_linear(pj_db, noise_variance),
                   noise_variance=noise_variance, **kwargs)

    def replace(self, **changes) -> "ScenarioConfig":
        kw = dict(
            num_users=self.num_users, num_subcarriers=self.num_subcarriers,
            source_budget=self.source_budget, jammer_budget=self.jammer_budget,
            source_pos=self.source_pos, jammer_pos=self.jammer_pos,
            path_loss_exponent=self.path_loss_exponent,
            noise_variance=self.noise_variance, weights=self.weights,
            rng_seed=self.rng_seed)
        if "num_users" in changes and "weights" not in changes:
            kw["weights"] = None
        kw.update(changes)
        return ScenarioConfig(**kw)


@dataclass(frozen=True)
class ChannelRealization:
    """Source-to-user gains ``h`` and jammer-to-user gains ``g`` (both M x N)."""

    h: np.ndarray
    g: np.ndarray
    noise_variance: float = 1.0
    H: np.ndarray = field(init=False, repr=False, compare=False)
    G: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        h = np.array(self.h, dtype=float)
        g = np.array(self.g, dtype=float)
        if h.ndim != 2 or h.shape != g.shape:
            raise ValueError(f"h and g must be equal-shape matrices, got {h.shape} and {g.shape}")
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(g))):
            raise ValueError("channel gains must be finite")
        if np.any(h <= 0) or np.any(g <= 0):
            raise ValueError("channel gains must be strictly positive")
        if not self.noise_variance > 0:
            raise ValueError("noise_variance must be positive")
        h.setflags(write=False)
        g.setflags(write=False)
        H = h ** 2
        G = g ** 2
        H.setflags(write=False)
        G.setflags(write=False)
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "G", G)

    @property
    def num_users(self) -> int:
        return self.h.shape[0]

    @property
    def num_subcarriers(self) -> int:
        return self.h.shape[1]


def _drop_users(rng: np.random.Generator, cfg: ScenarioConfig) -> np.ndarray:
    anchors = np.array([cfg.source_pos, cfg.jammer_pos])
    pos = rng.uniform(0.0, 1.0, size=(cfg.num_users, 2))
    for m in range(cfg.num_users):
        # degenerate-geometry guard: redraw users sitting on a transmitter
        while np.min(np.linalg.norm(anchors - pos[m], axis=1)) <= MIN_NODE_DISTANCE:
            pos[m] = rng.uniform(0.0, 1.0, size=2)
    return pos


def _rayleigh(rng: np.random.Generator, shape) -> np.ndarray:
    # |CN(0, 1)|, i.e. unit mean-square envelope
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return np.sqrt((re ** 2 + im ** 2) / 2.0)


def generate_channels(cfg: ScenarioConfig,
                      rng: Optional[np.random.Generator] = None) -> ChannelRealization:
    """Draw one path-loss plus Rayleigh realization for ``cfg``.

    Each gain is ``d ** (-alpha / 2) * r`` with ``r`` Rayleigh of unit
    mean-square and ``d`` the transmitter-user distance. With ``rng`` left
    as None the generator is seeded from ``cfg.rng_seed``.
    """
    if rng is None:
        rng = np.random.default_rng(cfg.rng_seed)
    M, N = cfg.num_users, cfg.num_subcarriers
    pos = _drop_users(rng, cfg)
    d_src = np.linalg.norm(pos - np.asarray(cfg.source_pos), axis=1)
    d_jam = np.linalg.norm(pos - np.asarray(cfg.jammer_pos), axis=1)
    alpha = cfg.path_loss_exponent
    h = d_src[:, None] ** (-alpha / 2.0) * _rayleigh(rng, (M, N))
    g = d_jam[:, None] ** (-alpha / 2.0) * _rayleigh(rng, (M, N))
    # a Rayleigh draw of exactly zero has probability zero but would break the
    # positivity invariant
    h = np.maximum(h, np.finfo(float).tiny)
    g = np.maximum(g, np.finfo(float).tiny)
    return ChannelRealization(h, g, cfg.noise_variance)


def _parse_block(lines, first_lineno, ncols, label):
    rows = []
    for offset, line in enumerate(lines):
        lineno = first_lineno + offset
        parts = line.split()
        if len(parts) != ncols:
            raise ChannelParseError(
                f"{label} row {offset + 1} (line {lineno}): expected {ncols} "
                f"columns, found {len(parts)}")
        row = []
        for col, tok in enumerate(parts):
            try:
                val = float(tok)
            except ValueError:
                raise ChannelParseError(
                    f"{label} row {offset + 1}, column {col + 1} (line {lineno}): "
                    f"non-numeric entry {tok!r}") from None
            if not np.isfinite(val) or val <= 0:
                raise ChannelParseError(
                    f"{label} row {offset + 1}, column {col + 1} (line {lineno}): "
                    f"gain must be positive and finite, got {tok}")
            row.append(val)
        rows.append(row)
    return np.array(rows)


def load_channels(text: str) -> ChannelRealization:
    """Parse a fixture payload.

    The format is a header line ``# M N sigma2`` followed by M rows of ``|h|``,
    a blank line, and M rows of ``|g|``; entries are whitespace separated.
    """
    lines = text.splitlines()
    idx = 0
    while idx < len(lines) and not lines[idx].strip():
        idx += 1
    if idx == len(lines):
        raise ChannelParseError("empty payload")
    header = lines[idx].strip()
    if not header.startswith("#"):
        raise ChannelParseError(f"line {idx + 1}: expected header '# M N sigma2'")
    fields = header[1:].split()
    try:
        M, N, sigma2 = int(fields[0]), int(fields[1]), float(fields[2])
    except (IndexError, ValueError):
        raise ChannelParseError(
            f"line {idx + 1}: malformed header {header!r}, expected '# M N sigma2'") from None
    if M < 1 or N < 1 or not sigma2 > 0:
        raise ChannelParseError(f"line {idx + 1}: invalid dimensions or noise variance")

    # group the remaining non-empty lines into blank-separated blocks
    blocks, current, start = [], [], None
    for lineno, line in enumerate(lines[idx + 1:], start=idx + 2):
        if line.strip():
            if not current:
                start = lineno
            current.append(line)
        elif current:
            blocks.append((start, current))
            current = []
    if current:
        blocks.append((start, current))
    if len(blocks) != 2:
        raise ChannelParseError(
            f"expected two blank-line separated blocks (h then g), found {len(blocks)}")
    for (start, rows), label in zip(blocks, ("h", "g")):
        if len(rows) != M:
            raise ChannelParseError(
                f"{label} block starting at line {start}: expected {M} rows, found {len(rows)}")
    h = _parse_block(blocks[0][1], blocks[0][0], N, "h")
    g = _parse_block(blocks[1][1], blocks[1][0], N, "g")
    return ChannelRealization(h, g, sigma2)


def dump_channels(ch: ChannelRealization, precision: int = 4) -> str:
    fmt = f"{{:.{precision}f}}"
    out = [f"# {ch.num_users} {ch.num_subcarriers} {ch.noise_variance:g}"]
    out += [" ".join(fmt.format(v) for v in row) for row in ch.h]
    out.append("")
    out += [" ".join(fmt.format(v) for v in row) for row in ch.g]
    return "\n".join(out) + "\n"


# 3 users x 5 subcarriers worked example (CLI name: paper3x5)
EXAMPLE_FIXTURE_TEXT = """\
# 3 5 1
1.1027 0.3856 0.6719 1.2101 0.7043
0.7423 1.0735 0.6558 1.0006 0.8943
0.7554 1.4772 0.2498 1.3572 3.5391

3.3624 6.0713 3.4125 3.0584 0.4987
8.1741 7.0607 4.1047 0.9860 1.6860
0.9028 2.0636 0.5605 3.0277 4.5346
"""


def example_fixture() -> ChannelRealization:
    """The built-in ``paper3x5`` example (3 users, 5 subcarriers, sigma^2 = 1)."""
    return load_channels(EXAMPLE_FIXTURE_TEXT)
