import numpy as np
import pytest

from simdist.tensorops import (
    ContractError,
    NumericsError,
    ParamStore,
    backward,
    concat,
    embedding_lookup,
    finite_diff_check,
    init_linear,
    layer_norm,
    linear,
    masked_softmax,
    no_grad,
    stack,
    tensor,
)


def make_store(entries):
    store = ParamStore()
    for name, arr in entries.items():
        store.add(name, arr)
    return store


def test_backward_linear_in_weights():
    # loss = sum(W @ x): dL/dW[i, j] = x[j] for every i
    rng = np.random.default_rng(1)
    x = rng.standard_normal(4).astype(np.float32)
    store = make_store({"encoder/w": rng.standard_normal((3, 4)).astype(np.float32)})
    loss = (store["encoder/w"] @ tensor(x.reshape(4, 1))).sum()
    grads = backward(loss, store)
    expected = np.tile(x, (3, 1))
    np.testing.assert_allclose(grads["encoder/w"], expected, rtol=1e-6)


def test_backward_untouched_param_gets_exact_zero():
    rng = np.random.default_rng(2)
    store = make_store({
        "encoder/used": rng.standard_normal(3).astype(np.float32),
        "encoder/unused": rng.standard_normal(3).astype(np.float32),
    })
    loss = (store["encoder/used"] * store["encoder/used"]).sum()
    grads = backward(loss, store)
    assert np.all(grads["encoder/unused"] == 0.0)


def test_backward_two_layer_matches_central_differences():
    rng = np.random.default_rng(3)
    store = ParamStore()
    init_linear(store, "encoder/l1", 5, 7, rng)
    init_linear(store, "encoder/l2", 7, 1, rng)
    x = tensor(rng.uniform(-1, 1, (4, 5)).astype(np.float32))

    def fn():
        h = linear(x, store["encoder/l1_w"], store["encoder/l1_b"]).tanh()
        y = linear(h, store["encoder/l2_w"], store["encoder/l2_b"])
        return (y * y).mean()

    assert finite_diff_check(fn, store, epsilon=1e-3) < 1e-3


def test_backward_rejects_non_scalar():
    store = make_store({"encoder/w": np.ones((2, 2), np.float32)})
    with pytest.raises(ContractError):
        backward(store["encoder/w"] * 2.0, store)


def test_backward_names_nan_node():
    store = make_store({"encoder/w": np.array([1.0, -1.0], np.float32)})
    bad = tensor(np.array([np.nan, 1.0], np.float32), name="bad_input")
    loss = (store["encoder/w"] * bad).sum()
    with pytest.raises(NumericsError, match="bad_input"):
        backward(loss, store)


def test_broadcast_gradients_reduce_to_operand_shape():
    rng = np.random.default_rng(4)
    store = make_store({"encoder/b": rng.standard_normal(3).astype(np.float32)})
    x = tensor(rng.standard_normal((5, 3)).astype(np.float32))
    loss = (x + store["encoder/b"]).sum()
    grads = backward(loss, store)
    np.testing.assert_array_equal(grads["encoder/b"], np.full(3, 5.0, np.float32))


def test_matmul_batched_weight_gradient_sums_over_batch():
    rng = np.random.default_rng(5)
    w = rng.standard_normal((3, 2)).astype(np.float32)
    store = make_store({"encoder/w": w})
    x = rng.standard_normal((4, 6, 3)).astype(np.float32)
    loss = (tensor(x) @ store["encoder/w"]).sum()
    grads = backward(loss, store)
    expected = x.reshape(-1, 3).sum(axis=0)[:, None] * np.ones((1, 2), np.float32)
    np.testing.assert_allclose(grads["encoder/w"], expected, rtol=1e-5)


def test_stack_concat_take_roundtrip_gradients():
    rng = np.random.default_rng(6)
    store = make_store({
        "encoder/a": rng.standard_normal((2, 3)).astype(np.float32),
        "encoder/b": rng.standard_normal((2, 3)).astype(np.float32),
    })
    s = stack([store["encoder/a"], store["encoder/b"]], axis=1)  # (2, 2, 3)
    c = concat([s.reshape((2, 6)), store["encoder/a"]], axis=1)  # (2, 9)
    loss = (c[:, :3] * 2.0).sum() + c[:, 3:].sum()
    grads = backward(loss, store)
    # a appears twice: as rows 0..2 of the stack (weight 2) and as the concat tail (weight 1)
    np.testing.assert_array_equal(grads["encoder/a"], np.full((2, 3), 3.0, np.float32))
    np.testing.assert_array_equal(grads["encoder/b"], np.full((2, 3), 1.0, np.float32))


def test_detach_blocks_gradient():
    store = make_store({"encoder/w": np.ones(3, np.float32)})
    w = store["encoder/w"]
    loss = (w.detach() * w).sum()
    grads = backward(loss, store)
    # only the non-detached factor contributes
    np.testing.assert_array_equal(grads["encoder/w"], np.ones(3, np.float32))


def test_layer_norm_matches_finite_differences():
    rng = np.random.default_rng(7)
    store = make_store({
        "encoder/g": rng.uniform(0.5, 1.5, 6).astype(np.float32),
        "encoder/b": rng.standard_normal(6).astype(np.float32),
        "encoder/x": rng.standard_normal((3, 6)).astype(np.float32),
    })

    def fn():
        y = layer_norm(store["encoder/x"], store["encoder/g"], store["encoder/b"])
        return (y * y).sum()

    assert finite_diff_check(fn, store, epsilon=1e-3) < 1e-3


def test_masked_softmax_fully_blocked_row_is_zero():
    logits = tensor(np.zeros((2, 3), np.float32))
    blocked = np.array([[False, False, False], [True, True, True]])
    w = masked_softmax(logits, blocked)
    np.testing.assert_allclose(w.data[0], np.full(3, 1 / 3, np.float32), rtol=1e-6)
    np.testing.assert_array_equal(w.data[1], np.zeros(3, np.float32))


def test_masked_softmax_gradients_match_finite_differences():
    rng = np.random.default_rng(8)
    store = make_store({"encoder/l": rng.standard_normal((2, 4)).astype(np.float32)})
    blocked = np.array([[False, True, False, False], [False, False, False, True]])

    def fn():
        w = masked_softmax(store["encoder/l"], blocked)
        return (w * w).sum()

    assert finite_diff_check(fn, store, epsilon=1e-3) < 1e-3


def test_embedding_lookup_scatter_gradient():
    store = make_store({"encoder/tbl": np.arange(12, dtype=np.float32).reshape(4, 3)})
    idx = np.array([[0, 2], [2, 2]])
    out = embedding_lookup(store["encoder/tbl"], idx)
    loss = out.sum()
    grads = backward(loss, store)
    expected = np.zeros((4, 3), np.float32)
    expected[0] = 1.0
    expected[2] = 3.0
    np.testing.assert_array_equal(grads["encoder/tbl"], expected)


def test_no_grad_disables_tape():
    store = make_store({"encoder/w": np.ones(2, np.float32)})
    with no_grad():
        y = (store["encoder/w"] * 3.0).sum()
    assert y.vjp is None and not y.requires_grad


class TestFiniteDiffCheck:
    def test_square_at_three(self):
        store = make_store({"encoder/x": np.array([3.0], np.float32)})

        def fn():
            x = store["encoder/x"]
            return (x * x).sum()

        # analytic gradient is 6; central difference of x^2 is exact
        grads = backward(fn(), store)
        np.testing.assert_allclose(grads["encoder/x"], [6.0], rtol=1e-6)
        assert finite_diff_check(fn, store) < 1e-6

    def test_constant_function_reports_zero(self):
        store = make_store({"encoder/x": np.array([1.5], np.float32)})

        def fn():
            return tensor(np.array(2.0, np.float32)) + 0.0 * store["encoder/x"].sum()

        assert finite_diff_check(fn, store) == 0.0

    def test_random_two_layer_network(self):
        rng = np.random.default_rng(9)
        store = ParamStore()
        init_linear(store, "encoder/l1", 3, 5, rng)
        init_linear(store, "encoder/l2", 5, 2, rng)
        x = tensor(rng.uniform(-1, 1, (2, 3)).astype(np.float32))

        def fn():
            h = linear(x, store["encoder/l1_w"], store["encoder/l1_b"]).relu()
            y = linear(h, store["encoder/l2_w"], store["encoder/l2_b"]).tanh()
            return (y * y).sum()

        assert finite_diff_check(fn, store, epsilon=1e-3) < 1e-3
