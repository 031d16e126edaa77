import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from simdist.tensorops import (
    ContractError,
    ParamStore,
    ScheduleConfig,
    adam_step,
    backward,
    lr_schedule,
)


def store_with(values):
    store = ParamStore()
    for name, arr in values.items():
        store.add(name, arr)
    return store


class TestAdam:
    def test_zero_gradients_leave_params_unchanged(self):
        store = store_with({"dynamics/w": np.array([1.0, -2.0], np.float32)})
        before = store["dynamics/w"].data.copy()
        adam_step(store, {"dynamics/w": np.zeros(2, np.float32)}, lr=1e-2)
        np.testing.assert_array_equal(store["dynamics/w"].data, before)

    def test_first_step_is_signed_lr(self):
        # bias-corrected moments cancel the magnitude on step one:
        # update = -lr * g / (|g| + eps) ~= -lr * sign(g)
        store = store_with({"dynamics/w": np.array([0.5], np.float32)})
        adam_step(store, {"dynamics/w": np.array([0.3], np.float32)}, lr=1e-2)
        np.testing.assert_allclose(store["dynamics/w"].data, [0.5 - 1e-2], rtol=1e-5)
        store2 = store_with({"dynamics/w": np.array([0.5], np.float32)})
        adam_step(store2, {"dynamics/w": np.array([-40.0], np.float32)}, lr=1e-2)
        np.testing.assert_allclose(store2["dynamics/w"].data, [0.5 + 1e-2], rtol=1e-5)

    def test_frozen_component_is_bit_identical(self):
        store = store_with({
            "dynamics/w": np.array([1.0], np.float32),
            "encoder/w": np.array([2.0], np.float32),
        })
        store.freeze("encoder")
        frozen_bytes = store["encoder/w"].data.tobytes()
        loss = (store["dynamics/w"] * store["encoder/w"].detach()).sum()
        grads = backward(loss, store)
        assert set(grads) == {"dynamics/w"}
        adam_step(store, grads, lr=1e-2)
        assert store["encoder/w"].data.tobytes() == frozen_bytes
        m, v, t = store.adam_state("encoder/w")
        assert t == 0 and np.all(m == 0) and np.all(v == 0)

    def test_gradient_for_frozen_param_is_contract_error(self):
        store = store_with({"encoder/w": np.array([1.0], np.float32)})
        store.freeze("encoder")
        with pytest.raises(ContractError):
            adam_step(store, {"encoder/w": np.array([1.0], np.float32)}, lr=1e-2)

    def test_missing_gradient_is_contract_error(self):
        store = store_with({
            "dynamics/a": np.array([1.0], np.float32),
            "dynamics/b": np.array([1.0], np.float32),
        })
        with pytest.raises(ContractError):
            adam_step(store, {"dynamics/a": np.array([1.0], np.float32)}, lr=1e-2)

    def test_freeze_zeroes_moments_and_counter(self):
        store = store_with({"encoder/w": np.array([1.0], np.float32)})
        adam_step(store, {"encoder/w": np.array([2.0], np.float32)}, lr=1e-3)
        m, v, t = store.adam_state("encoder/w")
        assert t == 1 and np.any(m != 0)
        store.freeze("encoder")
        m, v, t = store.adam_state("encoder/w")
        assert t == 0 and np.all(m == 0) and np.all(v == 0)


class TestSchedule:
    CFG = ScheduleConfig(initial_lr=2e-4, final_lr=1e-4, warmup_steps=50, total_steps=500)

    def test_warmup_origin_is_zero(self):
        assert lr_schedule(0, self.CFG) == 0.0

    def test_peak_at_warmup_end(self):
        assert lr_schedule(50, self.CFG) == pytest.approx(2e-4, rel=1e-12)

    def test_final_lr_at_total_steps(self):
        assert lr_schedule(500, self.CFG) == pytest.approx(1e-4, rel=1e-12)
        assert lr_schedule(10_000, self.CFG) == pytest.approx(1e-4, rel=1e-12)

    def test_continuous_at_warmup_boundary(self):
        left = lr_schedule(49, self.CFG)
        peak = lr_schedule(50, self.CFG)
        right = lr_schedule(51, self.CFG)
        assert left < peak
        assert peak - right < peak * 0.01

    @given(st.integers(min_value=50, max_value=600))
    @settings(max_examples=60, deadline=None)
    def test_non_increasing_after_warmup(self, step):
        assert lr_schedule(step, self.CFG) >= lr_schedule(step + 1, self.CFG) - 1e-18

    def test_invalid_configs_rejected(self):
        with pytest.raises(ContractError):
            ScheduleConfig(warmup_steps=500, total_steps=500)
        with pytest.raises(ContractError):
            ScheduleConfig(initial_lr=1e-4, final_lr=2e-4)
