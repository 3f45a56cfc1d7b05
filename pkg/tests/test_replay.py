import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from relay_ddpg.replay import PrioritizedBuffer, SumTree


def filled(priorities, alpha=1.0, kappa=0.4, eps=0.01):
    buf = PrioritizedBuffer(len(priorities), 2, 1, alpha=alpha, kappa=kappa, eps=eps)
    for i in range(len(priorities)):
        buf.push([i, i], [i], 1, [i, i])
    # td = p - eps so the stored priority is exactly p
    buf.update_priorities(np.arange(len(priorities)), np.asarray(priorities, float) - eps)
    return buf


def draw_counts(buf, draws, batch=1000, seed=0):
    rng = np.random.default_rng(seed)
    counts = np.zeros(len(buf), dtype=np.int64)
    for _ in range(draws // batch):
        counts += np.bincount(buf.sample_indices(batch, rng), minlength=len(buf))
    return counts


def test_first_push_gets_unit_priority():
    buf = PrioritizedBuffer(4, 2, 1)
    i = buf.push([0, 0], [0], 0, [0, 0])
    assert buf.priorities[i] == 1.0
    assert buf.tree.total == pytest.approx(1.0)


def test_push_inherits_max_priority():
    buf = PrioritizedBuffer(8, 2, 1, eps=0.01)
    buf.push([0, 0], [0], 0, [0, 0])
    buf.update_priorities([0], [4.99])
    i = buf.push([1, 1], [0], 1, [1, 1])
    assert buf.priorities[i] == pytest.approx(5.0)


def test_ring_overwrites_oldest():
    buf = PrioritizedBuffer(3, 1, 1)
    for i in range(4):
        buf.push([i], [0], 0, [i])
    assert len(buf) == 3
    assert 0 not in buf.states[:, 0]
    assert buf.states[0, 0] == 3


def test_update_priority_values():
    buf = filled([1.0, 1.0], eps=0.01)
    buf.update_priorities([0, 1], [0.0, -3.0])
    assert buf.priorities[0] == pytest.approx(0.01)
    assert buf.priorities[1] == pytest.approx(3.01)
    assert buf.tree.total == pytest.approx(0.01 + 3.01, rel=1e-12)


def test_update_rejects_bad_indices():
    buf = filled([1.0, 2.0])
    with pytest.raises(IndexError):
        buf.update_priorities([2], [0.5])
    with pytest.raises(IndexError):
        buf.update_priorities([-1], [0.5])


def test_sample_refuses_when_too_few():
    buf = filled([1.0, 2.0])
    with pytest.raises(ValueError):
        buf.sample(3, np.random.default_rng(0))


def test_sampling_frequencies_match_priorities():
    buf = filled([1.0, 1.0, 2.0], alpha=1.0)
    counts = draw_counts(buf, 1_000_000, batch=999)
    freq = counts / counts.sum()
    np.testing.assert_allclose(freq, [0.25, 0.25, 0.5], atol=0.01)


def test_sampling_chi_square():
    prios = np.array([0.5, 1.0, 3.0, 0.2, 2.0, 1.3, 0.01])
    alpha = 0.6
    buf = filled(prios, alpha=alpha)
    counts = draw_counts(buf, 1_000_000, batch=1000, seed=3)
    expected = prios ** alpha / np.sum(prios ** alpha) * counts.sum()
    assert stats.chisquare(counts, expected).pvalue > 0.01


def test_small_batches_follow_the_same_law():
    buf = filled([1.0, 1.0, 2.0], alpha=1.0)
    rng = np.random.default_rng(9)
    counts = np.zeros(3)
    for _ in range(20_000):
        counts += np.bincount(buf.sample(2, rng).indices, minlength=3)
    np.testing.assert_allclose(counts / counts.sum(), [0.25, 0.25, 0.5], atol=0.01)


def test_alpha_zero_is_uniform():
    buf = filled([0.1, 1.0, 10.0, 100.0], alpha=0.0)
    np.testing.assert_allclose(buf.probabilities(), 0.25)
    batch = buf.sample(4, np.random.default_rng(0))
    np.testing.assert_array_equal(batch.weights, 1.0)


def test_equal_priorities_give_unit_weights():
    buf = filled([2.0] * 5, alpha=0.6)
    np.testing.assert_allclose(buf.sample(5, np.random.default_rng(1)).weights, 1.0)


def test_importance_weights_formula():
    prios = np.array([1.0, 2.0, 4.0, 8.0])
    buf = filled(prios, alpha=1.0, kappa=0.4)
    batch = buf.sample(4, np.random.default_rng(2))
    p = prios / prios.sum()
    raw = (len(prios) * p[batch.indices]) ** -0.4
    np.testing.assert_allclose(batch.weights, raw / raw.max(), rtol=1e-12)
    assert np.all((batch.weights > 0) & (batch.weights <= 1))
    assert np.sum(batch.weights == 1.0) >= 1


def test_batch_fields_line_up():
    buf = filled([1.0, 2.0, 3.0])
    b = buf.sample(3, np.random.default_rng(0))
    np.testing.assert_array_equal(b.states[:, 0], b.indices)
    np.testing.assert_array_equal(b.actions[:, 0], b.indices)
    assert len(b.weights) == len(b.indices) == 3


def test_sum_tree_non_power_of_two():
    tree = SumTree(5)
    tree.set(np.arange(5), [1, 2, 3, 4, 5])
    assert tree.total == 15
    assert list(tree.find([0.0, 0.99, 1.0, 2.5, 14.99])) == [0, 0, 1, 1, 4]
    assert tree.check()


def test_sum_tree_never_returns_empty_leaf():
    tree = SumTree(6)
    tree.set([0, 1, 2], [0.1, 0.2, 0.3])
    assert np.all(tree.find(np.linspace(0, tree.total, 101)) <= 2)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.booleans(), st.floats(-50, 50, allow_nan=False)), min_size=1, max_size=200),
       st.integers(1, 40))
def test_tree_invariant_under_random_ops(ops, capacity):
    buf = PrioritizedBuffer(capacity, 1, 1, alpha=0.6)
    for i, (is_push, td) in enumerate(ops):
        if is_push or len(buf) == 0:
            buf.push([td], [0], 0, [td])
        else:
            buf.update_priorities([i % len(buf)], [td])
        assert len(buf) <= capacity
    assert buf.tree.check()
    leaves = buf.tree.leaves()
    assert np.all(leaves >= 0)
    np.testing.assert_allclose(leaves[: len(buf)], buf.priorities[: len(buf)] ** 0.6, rtol=1e-12)
    assert buf.tree.total == pytest.approx(leaves.sum(), rel=1e-9)
