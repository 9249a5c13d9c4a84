"""Channel model types, seeded random channels, half-duplex embeddings."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Literal

import numpy as np

from .rng import CounterRNG

MAX_ANTENNAS = 16


class ChannelFormatError(ValueError):
    """Malformed channel description; ``field`` names the offending entry."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field


@dataclass(frozen=True)
class AntennaConfig:
    t1: int
    t2: int
    r2: int
    r3: int

    def __post_init__(self):
        for name in ("t1", "t2", "r2", "r3"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or not 1 <= v <= MAX_ANTENNAS:
                raise ValueError(f"{name} must be an integer in [1, {MAX_ANTENNAS}], got {v!r}")

    @classmethod
    def parse(cls, text: str) -> AntennaConfig:
        """Parse ``"t1,t2,r2,r3"``."""
        parts = [p for p in text.replace(" ", "").split(",") if p]
        if len(parts) != 4:
            raise ValueError(f"expected four comma-separated antenna counts, got {text!r}")
        return cls(*(int(p) for p in parts))

    def as_tuple(self) -> tuple[int, int, int, int]:
        return (self.t1, self.t2, self.r2, self.r3)


@dataclass(frozen=True, eq=False)
class ChannelMatrices:
    """Gains of Y2 = G21 X1 + Z2 and Y3 = G31 X1 + G32 X2 + Z3 (unit noise)."""

    config: AntennaConfig
    G21: np.ndarray
    G31: np.ndarray
    G32: np.ndarray

    def __post_init__(self):
        c = self.config
        expected = {"G21": (c.r2, c.t1), "G31": (c.r3, c.t1), "G32": (c.r3, c.t2)}
        for name, shape in expected.items():
            M = np.asarray(getattr(self, name), dtype=complex)
            if M.ndim == 1 and M.size == shape[0] * shape[1]:
                M = M.reshape(shape)
            if M.shape != shape:
                raise ChannelFormatError(f"{name} must be {shape[0]}x{shape[1]}, got {M.shape}", name)
            M = M.copy()
            M.setflags(write=False)
            object.__setattr__(self, name, M)

    @classmethod
    def from_arrays(cls, G21, G31, G32) -> ChannelMatrices:
        G21, G31, G32 = (np.atleast_2d(np.asarray(m, dtype=complex)) for m in (G21, G31, G32))
        config = AntennaConfig(t1=G21.shape[1], t2=G32.shape[1], r2=G21.shape[0], r3=G31.shape[0])
        return cls(config, G21, G31, G32)

    @property
    def G3s(self) -> np.ndarray:
        """[G31 G32], the r3 x (t1 + t2) multiple-access gain."""
        return np.hstack([self.G31, self.G32])

    @property
    def Gs1(self) -> np.ndarray:
        """[G21; G31], the (r2 + r3) x t1 broadcast gain."""
        return np.vstack([self.G21, self.G31])

    def __eq__(self, other):
        if not isinstance(other, ChannelMatrices):
            return NotImplemented
        return (
            self.config == other.config
            and np.array_equal(self.G21, other.G21)
            and np.array_equal(self.G31, other.G31)
            and np.array_equal(self.G32, other.G32)
        )

    __hash__ = None

    def to_json(self) -> str:
        def enc(M):
            return [[[float(z.real), float(z.imag)] for z in row] for row in M]

        c = self.config
        doc = {"t1": c.t1, "t2": c.t2, "r2": c.r2, "r3": c.r3,
               "G21": enc(self.G21), "G31": enc(self.G31), "G32": enc(self.G32)}
        return json.dumps(doc)

    @classmethod
    def from_json(cls, text: str) -> ChannelMatrices:
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ChannelFormatError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(doc, dict):
            raise ChannelFormatError("channel document must be a JSON object")
        dims = {}
        for name in ("t1", "t2", "r2", "r3"):
            if name not in doc:
                raise ChannelFormatError(f"missing field {name!r}", name)
            if not isinstance(doc[name], int) or isinstance(doc[name], bool):
                raise ChannelFormatError(f"field {name!r} must be an integer", name)
            dims[name] = doc[name]
        try:
            config = AntennaConfig(**dims)
        except ValueError as exc:
            raise ChannelFormatError(str(exc)) from exc
        shapes = {"G21": (config.r2, config.t1), "G31": (config.r3, config.t1),
                  "G32": (config.r3, config.t2)}
        mats = {}
        for name, (rows, cols) in shapes.items():
            if name not in doc:
                raise ChannelFormatError(f"missing field {name!r}", name)
            mats[name] = _decode_matrix(doc[name], rows, cols, name)
        return cls(config, **mats)


def _decode_matrix(value, rows: int, cols: int, name: str) -> np.ndarray:
    if not isinstance(value, list) or len(value) != rows:
        raise ChannelFormatError(f"field {name!r} must have {rows} rows", name)
    out = np.empty((rows, cols), dtype=complex)
    for i, row in enumerate(value):
        if not isinstance(row, list) or len(row) != cols:
            raise ChannelFormatError(f"field {name!r} row {i} must have {cols} entries", name)
        for j, pair in enumerate(row):
            ok = (isinstance(pair, list) and len(pair) == 2
                  and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair))
            if not ok:
                raise ChannelFormatError(f"field {name!r} entry [{i}][{j}] must be a [re, im] pair", name)
            out[i, j] = complex(pair[0], pair[1])
    return out


def random_channel(config: AntennaConfig, seed: int, stream: int = 0) -> ChannelMatrices:
    """i.i.d. CN(0, 1) gains, a pure function of ``(config, seed, stream)``.

    Entries are drawn in the order G21, G31, G32, each row-major.
    """
    rng = CounterRNG(seed, stream)
    G21 = rng.complex_normal((config.r2, config.t1))
    G31 = rng.complex_normal((config.r3, config.t1))
    G32 = rng.complex_normal((config.r3, config.t2))
    return ChannelMatrices(config, G21, G31, G32)


@dataclass(frozen=True, eq=False)
class HalfDuplexChannel:
    """Half-duplex relay channel in its native block form.

    SFD (sender frequency division): the sender splits into X1' (t1' antennas,
    heard by the receiver together with X2) and X1'' (t1'' antennas, heard only
    by the relay). ``G31`` is r3 x t1', ``G21`` is r2 x t1''.

    RFD (receiver frequency division): the receiver splits into Y3' (r3'
    antennas, hears X1) and Y3'' (r3'' antennas, hears X2). ``G31`` is r3' x t1,
    ``G32`` is r3'' x t2.
    """

    mode: Literal["SFD", "RFD"]
    split: tuple[int, int]
    G21: np.ndarray
    G31: np.ndarray
    G32: np.ndarray

    def __post_init__(self):
        mode = self.mode.upper()
        if mode not in ("SFD", "RFD"):
            raise ValueError(f"mode must be 'SFD' or 'RFD', got {self.mode!r}")
        object.__setattr__(self, "mode", mode)
        a, b = (int(x) for x in self.split)
        if a < 1 or b < 1:
            raise ValueError(f"split parts must be positive, got {self.split}")
        object.__setattr__(self, "split", (a, b))
        mats = {n: np.atleast_2d(np.asarray(getattr(self, n), dtype=complex)) for n in ("G21", "G31", "G32")}
        G21, G31, G32 = mats["G21"], mats["G31"], mats["G32"]
        if mode == "SFD":
            if G31.shape[1] != a or G21.shape[1] != b or G31.shape[0] != G32.shape[0]:
                raise ValueError("SFD blocks need G31: r3 x t1', G21: r2 x t1'', G32: r3 x t2")
        else:
            if G31.shape[0] != a or G32.shape[0] != b or G31.shape[1] != G21.shape[1]:
                raise ValueError("RFD blocks need G31: r3' x t1, G32: r3'' x t2, G21: r2 x t1")
        for n, M in mats.items():
            M = M.copy()
            M.setflags(write=False)
            object.__setattr__(self, n, M)

    @property
    def t2(self) -> int:
        return self.G32.shape[1]

    @property
    def r2(self) -> int:
        return self.G21.shape[0]

    @property
    def t1(self) -> int:
        return sum(self.split) if self.mode == "SFD" else self.G21.shape[1]

    @property
    def r3(self) -> int:
        return self.G32.shape[0] if self.mode == "SFD" else sum(self.split)

    def embedded(self) -> ChannelMatrices:
        return sfd_embed(self) if self.mode == "SFD" else rfd_embed(self)


def random_half_duplex(mode: str, split: tuple[int, int], t2: int, r2: int, r_or_t: int,
                       seed: int, stream: int = 0) -> HalfDuplexChannel:
    """Random CN(0, 1) half-duplex channel.

    ``r_or_t`` is r3 for SFD and t1 for RFD (the dimension not covered by the split).
    """
    rng = CounterRNG(seed, stream)
    a, b = split
    if mode.upper() == "SFD":
        G21 = rng.complex_normal((r2, b))
        G31 = rng.complex_normal((r_or_t, a))
        G32 = rng.complex_normal((r_or_t, t2))
    else:
        G21 = rng.complex_normal((r2, r_or_t))
        G31 = rng.complex_normal((a, r_or_t))
        G32 = rng.complex_normal((b, t2))
    return HalfDuplexChannel(mode.upper(), (a, b), G21, G31, G32)


def sfd_embed(hd: HalfDuplexChannel) -> ChannelMatrices:
    """Full-duplex channel with G31 -> [G31' 0] and G21 -> [0 G21'']."""
    if hd.mode != "SFD":
        raise ValueError("sfd_embed needs an SFD channel")
    a, b = hd.split
    r2, r3 = hd.G21.shape[0], hd.G31.shape[0]
    G31 = np.hstack([hd.G31, np.zeros((r3, b), dtype=complex)])
    G21 = np.hstack([np.zeros((r2, a), dtype=complex), hd.G21])
    return ChannelMatrices.from_arrays(G21, G31, hd.G32)


def rfd_embed(hd: HalfDuplexChannel) -> ChannelMatrices:
    """Full-duplex channel with G31 -> [G31'; 0] and G32 -> [0; G32'']."""
    if hd.mode != "RFD":
        raise ValueError("rfd_embed needs an RFD channel")
    a, b = hd.split
    t1, t2 = hd.G21.shape[1], hd.G32.shape[1]
    G31 = np.vstack([hd.G31, np.zeros((b, t1), dtype=complex)])
    G32 = np.vstack([np.zeros((a, t2), dtype=complex), hd.G32])
    return ChannelMatrices.from_arrays(hd.G21, G31, G32)
