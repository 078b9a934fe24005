import numpy as np
import pytest

from mcbeam import ChannelModelParams, SumPower, generate_instance, steering_vector
from mcbeam.channel import (PathDraw, channel_from_paths, draw_paths, dumps_instance,
                            instance_from_dict, instance_to_dict, load_instance,
                            save_instance, substream)
from mcbeam.core import InvalidInstanceError, PerAntenna


def test_steering_vector_cases():
    np.testing.assert_allclose(steering_vector(0.0, 7), np.ones(7))
    np.testing.assert_allclose(steering_vector(np.pi / 2, 2), [1, -1], atol=1e-15)
    a = steering_vector(0.3721, 33)
    assert a[0] == 1
    np.testing.assert_allclose(np.abs(a), 1.0, rtol=1e-14)


def test_degenerate_draw_gives_scaled_ones():
    paths = PathDraw(gains=np.array([1.0 + 0j]), angles=np.array([0.0]))
    np.testing.assert_allclose(channel_from_paths(paths, 9), 3.0 * np.ones(9))


def test_path_counts_in_range():
    params = ChannelModelParams(4, 1, paths_min=5, paths_max=20)
    counts = {draw_paths(substream(0, 0, t, 0), params).L for t in range(400)}
    assert min(counts) == 5 and max(counts) == 20


def test_generation_is_deterministic():
    params = ChannelModelParams(6, 5, rng_seed=7)
    a = generate_instance(params, SumPower(10.0))
    b = generate_instance(params, SumPower(10.0))
    assert dumps_instance(a) == dumps_instance(b)
    c = generate_instance(ChannelModelParams(6, 5, rng_seed=8), SumPower(10.0))
    assert not np.allclose(a.channels, c.channels)
    d = generate_instance(params, SumPower(10.0), trial=1)
    assert not np.allclose(a.channels, d.channels)


def test_trial_generation_independent_of_user_count():
    # user m's channel only depends on (seed, trial, m)
    a = generate_instance(ChannelModelParams(4, 3, rng_seed=2), SumPower(1.0))
    b = generate_instance(ChannelModelParams(4, 6, rng_seed=2), SumPower(1.0))
    np.testing.assert_array_equal(a.channels, b.channels[:3])


def test_mean_channel_energy():
    N = 16
    params = ChannelModelParams(N, 10_000, rng_seed=11)
    inst = generate_instance(params, SumPower(1.0))
    ratio = np.mean(np.sum(np.abs(inst.channels) ** 2, axis=1)) / N ** 2
    assert 0.95 <= ratio <= 1.05


def test_path_gain_statistics():
    params = ChannelModelParams(2, 1)
    g = np.concatenate([draw_paths(substream(3, 0, t, 0), params).gains
                        for t in range(3000)])
    assert abs(g.mean()) < 0.05
    assert abs(np.mean(np.abs(g) ** 2) - 1.0) < 0.05


def test_params_validation():
    with pytest.raises(ValueError):
        ChannelModelParams(4, 4, paths_min=0)
    with pytest.raises(ValueError):
        ChannelModelParams(4, 4, paths_min=6, paths_max=5)
    with pytest.raises(ValueError):
        ChannelModelParams(0, 4)


def test_noise_vars_default_and_override():
    p = ChannelModelParams(3, 4)
    assert np.all(generate_instance(p, SumPower(1.0)).noise_vars == 1.0)
    inst = generate_instance(p, SumPower(1.0), noise_vars=[1, 2, 3, 4])
    np.testing.assert_array_equal(inst.noise_vars, [1, 2, 3, 4])


def test_json_roundtrip(tmp_path):
    inst = generate_instance(ChannelModelParams(3, 2, rng_seed=1), PerAntenna((1, 2, 3)))
    d = instance_to_dict(inst)
    assert set(d) == {"N", "M", "sigma2", "power", "H"}
    assert d["power"] == {"type": "per", "P": [1.0, 2.0, 3.0]}
    assert len(d["H"]) == 2 and len(d["H"][0]) == 3 and len(d["H"][0][0]) == 2
    path = tmp_path / "inst.json"
    save_instance(inst, path)
    back = load_instance(path)
    np.testing.assert_array_equal(back.channels, inst.channels)
    assert back.power == inst.power
    assert dumps_instance(back) == path.read_text()


def test_json_errors(tmp_path):
    with pytest.raises(InvalidInstanceError):
        instance_from_dict({"N": 1})
    d = instance_to_dict(generate_instance(ChannelModelParams(2, 2), SumPower(1.0)))
    d["N"] = 3
    with pytest.raises(InvalidInstanceError):
        instance_from_dict(d)
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    with pytest.raises(InvalidInstanceError):
        load_instance(bad)
