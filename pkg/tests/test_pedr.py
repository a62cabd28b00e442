import numpy as np
import pytest
from scipy.stats import chisquare

from ail_errors import EmptyBufferError, ShapeError
from pedr import (
    AnnealSchedule,
    PriorityBuffer,
    ReplayCoordinator,
    SumTree,
    read_buffer_snapshot,
    split_counts,
    write_buffer_snapshot,
)


def _buffer(priorities, zeta=1.0, capacity=None):
    buffer = PriorityBuffer(capacity or len(priorities), 1, 1, zeta)
    for i, p in enumerate(priorities):
        buffer.push(np.array([float(i), -float(i)]), p)
    return buffer


def test_prefix_find_examples():
    tree = SumTree(3)
    for i, v in enumerate([1.0, 2.0, 3.0]):
        tree.update(i, v)
    assert tree.total == 6.0
    assert tree.prefix_find(0.5) == 0
    assert tree.prefix_find(2.5) == 1
    assert tree.prefix_find(5.999) == 2
    with pytest.raises(ValueError):
        tree.prefix_find(6.0)


def test_sumtree_matches_linear_scan_after_random_operations():
    rng = np.random.default_rng(0)
    capacity = 37
    tree = SumTree(capacity)
    values = np.zeros(capacity)
    for _ in range(10000):
        i = int(rng.integers(capacity))
        v = float(rng.uniform(0, 5)) if rng.random() > 0.1 else 0.0
        tree.update(i, v)
        values[i] = v
    assert abs(tree.total - values.sum()) < 1e-9
    cumulative = np.cumsum(values)
    masses = rng.uniform(0, tree.total, size=10000)
    masses = masses[masses < min(tree.total, cumulative[-1])]
    expected = np.searchsorted(cumulative, masses, side="right")
    found = tree.prefix_find_many(masses)
    # Only masses away from interval boundaries are compared against the scan.
    clear = np.min(np.abs(masses[:, None] - cumulative[None, :]), axis=1) > 1e-9
    np.testing.assert_array_equal(found[clear], expected[clear])
    assert all(values[i] > 0 for i in found)
    for m in masses[:200]:
        assert tree.prefix_find(m) == tree.prefix_find_many([m])[0]


def test_update_many_equals_sequential_updates():
    rng = np.random.default_rng(1)
    a, b = SumTree(20), SumTree(20)
    indices = rng.integers(20, size=50)
    values = rng.uniform(0, 3, size=50)
    for i, v in zip(indices, values):
        a.update(int(i), float(v))
    b.update_many(indices, values)
    np.testing.assert_array_equal(a.leaves(), b.leaves())
    assert a.total == b.total


def test_push_defaults_and_fifo_eviction():
    buffer = PriorityBuffer(3, 1, 1, zeta=1.0)
    slot = buffer.push(np.array([0.0, 0.0]))
    assert slot == 0 and buffer.priorities[0] == 1.0
    buffer.push(np.array([1.0, 1.0]), 4.0)
    buffer.push(np.array([2.0, 2.0]))
    assert buffer.priorities[2] == 4.0
    slot = buffer.push(np.array([3.0, 3.0]), 2.0)
    assert slot == 0 and len(buffer) == 3
    np.testing.assert_array_equal(buffer.entries[0], [3.0, 3.0])
    with pytest.raises(ShapeError):
        buffer.push(np.zeros(3))


def test_sumtree_total_with_two_priorities():
    buffer = _buffer([3.0, 1.0])
    assert buffer.tree.total == 4.0


def test_weights_for_three_to_one_priorities():
    buffer = _buffer([3.0, 1.0])
    np.testing.assert_allclose(buffer.probabilities(), [0.75, 0.25])
    batch = buffer.sample(2000, 1.0, np.random.default_rng(0))
    for idx, w in zip(batch.indices, batch.weights):
        assert w == pytest.approx(1.0 / 3.0 if idx == 0 else 1.0)


def test_uniform_priorities_give_unit_weights():
    buffer = _buffer([2.0] * 5)
    batch = buffer.sample(50, 0.7, np.random.default_rng(1))
    np.testing.assert_allclose(buffer.probabilities(), 0.2)
    np.testing.assert_array_equal(batch.weights, 1.0)


def test_zeta_zero_is_uniform():
    buffer = _buffer([1.0, 10.0, 100.0], zeta=0.0)
    np.testing.assert_allclose(buffer.probabilities(), 1.0 / 3.0)
    np.testing.assert_array_equal(buffer.sample(20, 1.0, np.random.default_rng(2)).weights, 1.0)


def test_sampling_frequencies_pass_chi_square():
    buffer = _buffer([1.0, 2.0, 3.0])
    batch = buffer.sample(100000, 1.0, np.random.default_rng(3))
    counts = np.bincount(batch.indices, minlength=3)
    assert chisquare(counts, f_exp=100000 * np.array([1, 2, 3]) / 6).pvalue > 0.01


def test_empty_buffer_sampling():
    buffer = PriorityBuffer(4, 1, 1)
    assert len(buffer.sample(0, 1.0, np.random.default_rng(0))) == 0
    with pytest.raises(EmptyBufferError):
        buffer.sample(3, 1.0, np.random.default_rng(0))


def test_priority_update_from_confidence():
    buffer = _buffer([1.0, 1.0])
    buffer.update_priorities([0, 1], [1.0 - 1e-6, 0.25])
    assert buffer.priorities[0] == pytest.approx(1e-6)
    assert buffer.priorities[1] == pytest.approx(0.75)
    assert buffer.tree.total == pytest.approx(0.75 + 1e-6)


def test_random_updates_keep_root_equal_to_brute_force_sum():
    rng = np.random.default_rng(4)
    buffer = _buffer([1.0] * 16, zeta=0.6)
    for _ in range(300):
        idx = rng.integers(16, size=8)
        buffer.update_priorities(idx, rng.uniform(0, 1, size=8))
    assert abs(buffer.tree.total - np.sum(buffer.priorities ** 0.6)) < 1e-9


def test_mixed_buffer_operations_match_linear_scan():
    rng = np.random.default_rng(9)
    capacity, zeta = 50, 0.6
    buffer = PriorityBuffer(capacity, 2, 1, zeta)
    entries = np.zeros((capacity, 3))
    priorities = np.zeros(capacity)
    serials = np.full(capacity, -1)
    size = next_slot = pushed = 0
    pending = None
    for _ in range(10000):
        op = rng.random()
        if op < 0.4 or size == 0:
            entry = rng.normal(size=3)
            priority = float(rng.uniform(0.01, 2.0)) if rng.random() < 0.5 else None
            if priority is None:
                expected_priority = priorities[:size].max() if size else 1.0
            else:
                expected_priority = priority
            slot = buffer.push(entry, priority)
            assert slot == next_slot
            entries[slot] = entry
            priorities[slot] = expected_priority
            serials[slot] = pushed
            pushed += 1
            next_slot = (next_slot + 1) % capacity
            size = min(size + 1, capacity)
        elif op < 0.7:
            eta = float(rng.uniform(0.4, 1.0))
            pending = buffer.sample(int(rng.integers(1, 9)), eta, rng)
            assert np.all(pending.weights <= 1.0)
            assert pending.weights.max() == 1.0
            probs = priorities[:size] ** zeta / np.sum(priorities[:size] ** zeta)
            raw = (1.0 / (size * probs[pending.indices])) ** eta
            np.testing.assert_allclose(pending.weights, raw / raw.max(), rtol=1e-9)
            np.testing.assert_array_equal(pending.entries, entries[pending.indices])
        elif pending is not None:
            confidences = rng.uniform(0.0, 1.0, size=len(pending))
            skipped = buffer.update_priorities(pending.indices, confidences, pending.serials)
            expected_skips = 0
            for slot, serial, conf in zip(pending.indices, pending.serials, confidences):
                if serials[slot] == serial:
                    priorities[slot] = abs(1.0 - conf)
                else:
                    expected_skips += 1
            assert skipped == expected_skips
            pending = None

        assert len(buffer) == size
        expected_total = np.sum(priorities[:size] ** zeta)
        assert abs(buffer.tree.total - expected_total) <= 1e-9 * max(1.0, expected_total)
        assert abs(buffer.probabilities().sum() - 1.0) < 1e-9
        np.testing.assert_allclose(buffer.priorities[:size], priorities[:size], rtol=0, atol=0)


@pytest.mark.parametrize("zeta", [0.3, 0.6, 1.0])
def test_probabilities_increase_with_priority(zeta):
    rng = np.random.default_rng(10)
    priorities = rng.uniform(0.01, 5.0, size=40)
    buffer = _buffer(list(priorities), zeta=zeta)
    probs = buffer.probabilities()
    order = np.argsort(priorities)
    assert np.all(np.diff(probs[order]) > 0.0)
    np.testing.assert_array_equal(np.argsort(probs), order)


def test_stale_updates_are_skipped():
    buffer = _buffer([1.0, 1.0], capacity=2)
    batch = buffer.sample(4, 1.0, np.random.default_rng(5))
    buffer.push(np.array([9.0, 9.0]), 1.0)
    skipped = buffer.update_priorities(batch.indices, np.full(4, 0.5), batch.serials)
    assert skipped == int(np.sum(batch.indices == 0))
    assert buffer.stale_updates == skipped
    assert buffer.priorities[0] == 1.0


def test_snapshot_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    buffer = PriorityBuffer(5, 2, 1, zeta=0.6)
    for _ in range(7):
        buffer.push(rng.normal(size=3))
    buffer.update_priorities([0, 3], [0.2, 0.9])
    write_buffer_snapshot(tmp_path / "buf.csv", buffer)
    loaded = read_buffer_snapshot(tmp_path / "buf.csv")
    np.testing.assert_array_equal(loaded.entries, buffer.entries)
    np.testing.assert_array_equal(loaded.priorities, buffer.priorities)
    np.testing.assert_array_equal(loaded.serials, buffer.serials)
    np.testing.assert_array_equal(loaded.tree.leaves(), buffer.tree.leaves())
    assert (loaded.next_slot, loaded.pushed, loaded.size) == (buffer.next_slot, buffer.pushed, buffer.size)
    a = buffer.sample(10, 0.5, np.random.default_rng(7))
    b = loaded.sample(10, 0.5, np.random.default_rng(7))
    np.testing.assert_array_equal(a.indices, b.indices)


def test_split_counts_rotation():
    assert split_counts(64, 4, 0) == [16, 16, 16, 16]
    assert split_counts(8, 3, 0) == [3, 3, 2]
    assert split_counts(8, 3, 2) == [3, 2, 3]


def _coordinator(n_expert, pseudo_rows=0, ratio=7):
    rng = np.random.default_rng(8)
    buffers = []
    for _ in range(n_expert):
        b = PriorityBuffer(10, 1, 1)
        b.push_many(rng.normal(size=(10, 2)))
        buffers.append(b)
    pseudo = PriorityBuffer(1000, 1, 1)
    if pseudo_rows:
        pseudo.push_many(rng.normal(size=(pseudo_rows, 2)))
    return ReplayCoordinator(buffers, pseudo, ratio, AnnealSchedule(0.4, 100))


def test_coordinator_batch_composition():
    coord = _coordinator(4, pseudo_rows=50)
    composite = coord.sample(64, 0, np.random.default_rng(0))
    assert [len(d) for d in composite.expert_draws] == [16, 16, 16, 16]
    assert len(composite.pseudo_draw) == 448
    assert composite.expert_entries.shape == (64, 2)


def test_coordinator_without_pseudo_entries():
    coord = _coordinator(2)
    composite = coord.sample(64, 0, np.random.default_rng(0))
    assert composite.expert_entries.shape[0] == 64
    assert len(composite.pseudo_draw) == 0


def test_coordinator_rotates_remainder():
    coord = _coordinator(3)
    first = coord.sample(8, 0, np.random.default_rng(0))
    second = coord.sample(8, 1, np.random.default_rng(1))
    assert [len(d) for d in first.expert_draws] == [3, 3, 2]
    assert [len(d) for d in second.expert_draws] == [3, 2, 3]
    with pytest.raises(ShapeError):
        coord.sample(2, 0, np.random.default_rng(0))


def test_coordinator_routes_confidences_back():
    coord = _coordinator(2, pseudo_rows=20, ratio=1)
    composite = coord.sample(4, 0, np.random.default_rng(3))
    coord.update_from_confidences(composite, np.full(4, 0.25), np.full(4, 0.5))
    for buffer, draw in zip(coord.expert_buffers, composite.expert_draws):
        np.testing.assert_allclose(buffer.priorities[draw.indices], 0.75)
    np.testing.assert_allclose(coord.pseudo_buffer.priorities[composite.pseudo_draw.indices], 0.5)


def test_uniform_ablation_leaves_priorities_untouched():
    coord = _coordinator(1)
    coord.priority_updates = False
    composite = coord.sample(4, 0, np.random.default_rng(4))
    coord.update_from_confidences(composite, np.full(4, 0.1), np.zeros(0))
    np.testing.assert_array_equal(coord.expert_buffers[0].priorities, 1.0)


def test_anneal_schedule():
    schedule = AnnealSchedule(0.4, 100)
    assert schedule.value(0) == 0.4
    assert schedule.value(50) == pytest.approx(0.7)
    assert schedule.value(500) == 1.0
    assert AnnealSchedule(0.4, 0).value(0) == 1.0
