import json

import numpy as np
import pytest

from mimorelay import (AntennaConfig, ChannelFormatError, ChannelMatrices, HalfDuplexChannel, random_channel,
                       random_half_duplex, rfd_embed, sfd_embed)
from mimorelay.rng import CounterRNG

MASK = (1 << 64) - 1


def splitmix_finalizer(z: int) -> int:
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def test_counter_rng_matches_pure_python():
    seed, stream = 12345, 3
    key = splitmix_finalizer(splitmix_finalizer(seed) ^ ((stream * 0xD1B54A32D192ED03 + 1) & MASK))
    expected = [splitmix_finalizer((key + k * 0x9E3779B97F4A7C15) & MASK) for k in range(1, 6)]
    got = [int(w) for w in CounterRNG(seed, stream).words(5)]
    assert got == expected


def test_counter_rng_frozen_words():
    words = [int(w) for w in CounterRNG(0, 0).words(3)]
    assert words == [0xBFEF8030DDC2D772, 0x5F552CE482F2AA47, 0x70335FC3DAF3D8A7]


def test_counter_rng_chunking_invariant():
    a = CounterRNG(9, 1)
    chunks = np.concatenate([a.words(3), a.words(4)])
    assert np.array_equal(chunks, CounterRNG(9, 1).words(7))


def test_antenna_config_validation():
    assert AntennaConfig.parse("2, 3,1,4").as_tuple() == (2, 3, 1, 4)
    for bad in [(0, 1, 1, 1), (1, 17, 1, 1), (1, 1, 1.5, 1)]:
        with pytest.raises(ValueError):
            AntennaConfig(*bad)
    with pytest.raises(ValueError):
        AntennaConfig.parse("1,2,3")


def test_random_channel_deterministic_and_shaped():
    c = AntennaConfig(2, 2, 2, 2)
    a, b = random_channel(c, 11), random_channel(c, 11)
    assert a == b
    assert a != random_channel(c, 12)
    assert a != random_channel(c, 11, stream=1)
    assert a.G21.shape == a.G31.shape == a.G32.shape == (2, 2)
    c = AntennaConfig(1, 3, 2, 4)
    ch = random_channel(c, 0)
    assert (ch.G21.shape, ch.G31.shape, ch.G32.shape) == ((2, 1), (4, 1), (4, 3))
    assert ch.G3s.shape == (4, 4) and ch.G21.shape[0] + ch.G31.shape[0] == ch.Gs1.shape[0]
    assert np.array_equal(ch.G3s, np.hstack([ch.G31, ch.G32]))
    assert np.array_equal(ch.Gs1, np.vstack([ch.G21, ch.G31]))


def test_random_channel_frozen_entry():
    ch = random_channel(AntennaConfig(1, 1, 1, 1), 7)
    assert ch.G21[0, 0] == complex(0.9654824197157275, -0.020045063370304515)


def test_random_channel_unit_power_statistics():
    c = AntennaConfig(1, 1, 1, 1)
    entries = np.concatenate([
        np.concatenate([m.ravel() for m in (ch.G21, ch.G31, ch.G32)])
        for ch in (random_channel(c, 5, stream=i) for i in range(10_000 // 3 + 1))
    ])[:10_000]
    assert abs(np.mean(np.abs(entries) ** 2) - 1.0) <= 0.05
    assert abs(np.var(entries.real) - 0.5) <= 0.05
    assert abs(np.var(entries.imag) - 0.5) <= 0.05


def test_channel_matrices_shape_errors():
    c = AntennaConfig(2, 1, 1, 1)
    with pytest.raises(ChannelFormatError) as err:
        ChannelMatrices(c, np.zeros((1, 1)), np.zeros((1, 2)), np.zeros((1, 1)))
    assert err.value.field == "G21"


def test_json_round_trip():
    ch = random_channel(AntennaConfig(2, 3, 1, 2), 4)
    assert ChannelMatrices.from_json(ch.to_json()) == ch


@pytest.mark.parametrize("drop", ["t1", "G32"])
def test_json_missing_field_named(drop):
    doc = json.loads(random_channel(AntennaConfig(1, 1, 1, 1), 0).to_json())
    del doc[drop]
    with pytest.raises(ChannelFormatError) as err:
        ChannelMatrices.from_json(json.dumps(doc))
    assert err.value.field == drop
    assert drop in str(err.value)


def test_json_malformed_entries():
    doc = json.loads(random_channel(AntennaConfig(1, 1, 1, 1), 0).to_json())
    doc["G31"] = [[[1.0]]]
    with pytest.raises(ChannelFormatError) as err:
        ChannelMatrices.from_json(json.dumps(doc))
    assert err.value.field == "G31"
    with pytest.raises(ChannelFormatError):
        ChannelMatrices.from_json("{not json")
    with pytest.raises(ChannelFormatError):
        ChannelMatrices.from_json("[1, 2]")


def test_sfd_embedding_blocks():
    hd = random_half_duplex("SFD", (2, 1), t2=2, r2=2, r_or_t=3, seed=1)
    ch = sfd_embed(hd)
    assert ch.config.as_tuple() == (3, 2, 2, 3)
    assert np.array_equal(ch.G31[:, :2], hd.G31) and not ch.G31[:, 2:].any()
    assert np.array_equal(ch.G21[:, 2:], hd.G21) and not ch.G21[:, :2].any()
    assert np.array_equal(ch.G32, hd.G32)
    scalar = sfd_embed(random_half_duplex("SFD", (1, 1), 1, 1, 1, seed=2))
    assert not scalar.G21[:, 0].any()
    with pytest.raises(ValueError):
        rfd_embed(hd)


def test_rfd_embedding_blocks():
    hd = random_half_duplex("RFD", (1, 2), t2=2, r2=1, r_or_t=2, seed=3)
    ch = rfd_embed(hd)
    assert ch.config.as_tuple() == (2, 2, 1, 3)
    assert np.array_equal(ch.G31[:1], hd.G31) and not ch.G31[1:].any()
    assert np.array_equal(ch.G32[1:], hd.G32) and not ch.G32[:1].any()
    assert np.array_equal(ch.G21, hd.G21)
    scalar = rfd_embed(random_half_duplex("RFD", (1, 1), 1, 1, 1, seed=4))
    assert not scalar.G32[0].any()
    with pytest.raises(ValueError):
        sfd_embed(hd)


def test_half_duplex_validation():
    with pytest.raises(ValueError):
        HalfDuplexChannel("XFD", (1, 1), [[1]], [[1]], [[1]])
    with pytest.raises(ValueError):
        HalfDuplexChannel("SFD", (0, 1), [[1]], [[1]], [[1]])
    with pytest.raises(ValueError):
        HalfDuplexChannel("SFD", (2, 1), [[1]], [[1]], [[1]])
    hd = HalfDuplexChannel("rfd", (1, 1), [[1]], [[1]], [[1]])
    assert hd.mode == "RFD" and hd.r3 == 2 and hd.t1 == 1
