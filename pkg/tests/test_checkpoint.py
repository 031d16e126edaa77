import numpy as np
import pytest

from simdist.tensorops import ContractError, ParamStore, load_checkpoint, save_checkpoint


def sample_store(rng):
    store = ParamStore()
    store.add("encoder/w", rng.standard_normal((4, 3)).astype(np.float32))
    store.add("dynamics/w", rng.standard_normal((3, 3)).astype(np.float32))
    store.add("dynamics/b", rng.standard_normal(3).astype(np.float32))
    store.add("reward/head_w", rng.standard_normal((3, 1)).astype(np.float32))
    return store


def test_round_trip_is_bit_exact(tmp_path):
    rng = np.random.default_rng(21)
    store = sample_store(rng)
    store.freeze("encoder")
    store.schedule_step = 123
    path = tmp_path / "model.ckpt"
    save_checkpoint(path, store, meta={"model.latent_width": "32", "note": "a b c"})
    loaded, meta = load_checkpoint(path)

    assert loaded.names() == store.names()
    for name in store.names():
        assert loaded[name].data.tobytes() == store[name].data.tobytes()
    assert loaded.frozen_components == frozenset({"encoder"})
    assert loaded.schedule_step == 123
    assert meta == {"model.latent_width": "32", "note": "a b c"}


def test_save_is_deterministic(tmp_path):
    rng = np.random.default_rng(22)
    store = sample_store(rng)
    p1, p2 = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
    save_checkpoint(p1, store, meta={"k": "v"})
    save_checkpoint(p2, store, meta={"k": "v"})
    assert p1.read_bytes() == p2.read_bytes()


def test_frozen_flags_follow_component(tmp_path):
    rng = np.random.default_rng(23)
    store = sample_store(rng)
    store.freeze("dynamics")
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, store)
    text = path.read_bytes().split(b"DATA\n")[0].decode()
    flags = {line.split()[1]: line.split()[3] for line in text.splitlines() if line.startswith("tensor")}
    assert flags["dynamics/w"] == "1" and flags["dynamics/b"] == "1"
    assert flags["encoder/w"] == "0"


def test_truncated_payload_rejected(tmp_path):
    rng = np.random.default_rng(24)
    store = sample_store(rng)
    path = tmp_path / "m.ckpt"
    save_checkpoint(path, store)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(ContractError, match="payload"):
        load_checkpoint(path)


def test_missing_sentinel_rejected(tmp_path):
    path = tmp_path / "junk.ckpt"
    path.write_bytes(b"SDCKPT 1\nmeta a=b\n")
    with pytest.raises(ContractError, match="DATA"):
        load_checkpoint(path)
