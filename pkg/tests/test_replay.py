import numpy as np
import pytest

from sparqlab.replay import ReplayBuffer, Transition


def make_transition(i, dtype=np.float64):
    return Transition(
        s=np.full(4, float(i), dtype=dtype),
        a=np.array([i / 1000.0, -i / 1000.0], dtype=dtype),
        s_next=np.full(4, float(i) + 0.5, dtype=dtype),
        r_eff=float(i) / 7.0,
        done=(i % 5 == 0),
        queried=(i % 3 == 0),
    )


def test_size_tracks_min_of_pushes_and_capacity():
    buf = ReplayBuffer(capacity=10)
    for i in range(7):
        buf.push(make_transition(i))
    assert len(buf) == 7
    for i in range(7, 25):
        buf.push(make_transition(i))
    assert len(buf) == 10


def test_oldest_entries_are_evicted_first():
    buf = ReplayBuffer(capacity=4)
    for i in range(6):
        buf.push(make_transition(i))
    stored = {buf.get(k).s[0] for k in range(len(buf))}
    assert stored == {2.0, 3.0, 4.0, 5.0}


def test_sampled_batches_match_stored_transitions_bit_exactly():
    buf = ReplayBuffer(capacity=100)
    originals = {}
    for i in range(60):
        t = make_transition(i)
        originals[float(t.s[0])] = t
        buf.push(t)
    rng = np.random.default_rng(0)
    batch = buf.sample(32, rng)
    for row in range(32):
        key = float(batch.s[row, 0])
        src = originals[key]
        assert np.array_equal(batch.s[row], src.s)
        assert np.array_equal(batch.a[row], src.a)
        assert np.array_equal(batch.s_next[row], src.s_next)
        assert batch.r_eff[row] == src.r_eff
        assert bool(batch.done[row]) == src.done
        assert bool(batch.queried[row]) == src.queried


def test_sampling_within_a_batch_is_without_replacement():
    buf = ReplayBuffer(capacity=50)
    for i in range(50):
        buf.push(make_transition(i))
    rng = np.random.default_rng(1)
    for _ in range(20):
        batch = buf.sample(50, rng)
        assert len(set(batch.indices.tolist())) == 50


def test_oversized_batch_rejected():
    buf = ReplayBuffer(capacity=10)
    buf.push(make_transition(0))
    with pytest.raises(ValueError):
        buf.sample(2, np.random.default_rng(0))


def test_get_out_of_range():
    buf = ReplayBuffer(capacity=10)
    with pytest.raises(IndexError):
        buf.get(0)
