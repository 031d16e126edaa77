"""Named parameter groups with per-component freeze flags and Adam state.

Parameter names are ``component/rest``; the component prefix is the unit
of freezing. Checkpoints are a single file: a UTF-8 text manifest
(magic, metadata, one line per tensor) terminated by a ``DATA`` line,
followed by the raw little-endian float32 payloads in manifest order.
"""

from __future__ import annotations

import numpy as np

from .tensor import ContractError, Tensor

COMPONENTS = ("encoder", "history", "dynamics", "reward", "value", "policy", "decoder")

_MAGIC = "SDCKPT"
_VERSION = 1


class ParamStore:
    def __init__(self):
        self._params: dict[str, Tensor] = {}
        self._frozen: set[str] = set()
        self._m: dict[str, np.ndarray] = {}
        self._v: dict[str, np.ndarray] = {}
        self._t: dict[str, int] = {}
        self.schedule_step = 0

    def add(self, name, data):
        comp = component_of(name)
        if comp not in COMPONENTS:
            raise ContractError(f"unknown component '{comp}' in parameter '{name}'")
        if name in self._params:
            raise ContractError(f"duplicate parameter '{name}'")
        arr = np.ascontiguousarray(data, dtype=np.float32)
        t = Tensor(arr, requires_grad=comp not in self._frozen, name=name)
        self._params[name] = t
        self._m[name] = np.zeros_like(arr)
        self._v[name] = np.zeros_like(arr)
        self._t[name] = 0
        return t

    def __getitem__(self, name) -> Tensor:
        return self._params[name]

    def __contains__(self, name):
        return name in self._params

    def __len__(self):
        return len(self._params)

    def names(self):
        return list(self._params)

    def components(self):
        return sorted({component_of(n) for n in self._params})

    def unfrozen_names(self):
        return [n for n in self._params if component_of(n) not in self._frozen]

    def is_frozen(self, component):
        return component in self._frozen

    @property
    def frozen_components(self):
        return frozenset(self._frozen)

    def freeze(self, component):
        if component not in COMPONENTS:
            raise ContractError(f"unknown component '{component}'")
        self._frozen.add(component)
        for name, t in self._params.items():
            if component_of(name) == component:
                t.requires_grad = False
                self._m[name][:] = 0.0
                self._v[name][:] = 0.0
                self._t[name] = 0

    def unfreeze(self, component):
        self._frozen.discard(component)
        for name, t in self._params.items():
            if component_of(name) == component:
                t.requires_grad = True

    def adam_state(self, name):
        return self._m[name], self._v[name], self._t[name]

    def set_adam_step(self, name, t):
        self._t[name] = t

    def n_parameters(self):
        return sum(t.data.size for t in self._params.values())

    def copy(self):
        out = ParamStore()
        for name, t in self._params.items():
            out.add(name, t.data.copy())
            out._m[name] = self._m[name].copy()
            out._v[name] = self._v[name].copy()
            out._t[name] = self._t[name]
        for comp in self._frozen:
            out.freeze(comp)
        out.schedule_step = self.schedule_step
        return out


def component_of(name):
    return name.split("/", 1)[0]


def save_checkpoint(path, store, meta=None):
    """Write parameters to a single manifest + payload file."""
    lines = [f"{_MAGIC} {_VERSION}", f"meta schedule_step={store.schedule_step}"]
    for key in sorted(meta or {}):
        val = str((meta or {})[key])
        if "\n" in key or "\n" in val:
            raise ContractError(f"newline in checkpoint meta '{key}'")
        lines.append(f"meta {key}={val}")
    order = store.names()
    for name in order:
        t = store[name]
        dims = ",".join(str(d) for d in t.data.shape) or "scalar"
        frozen = 1 if store.is_frozen(component_of(name)) else 0
        lines.append(f"tensor {name} {dims} {frozen}")
    lines.append("DATA")
    with open(path, "wb") as fh:
        fh.write(("\n".join(lines) + "\n").encode("utf-8"))
        for name in order:
            fh.write(np.ascontiguousarray(store[name].data, dtype="<f4").tobytes())


def load_checkpoint(path):
    """Read a checkpoint; returns (ParamStore, meta dict)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    sep = blob.find(b"DATA\n")
    if sep < 0:
        raise ContractError(f"{path}: missing DATA sentinel")
    header = blob[:sep].decode("utf-8").splitlines()
    payload = blob[sep + 5:]
    if not header or header[0] != f"{_MAGIC} {_VERSION}":
        raise ContractError(f"{path}: bad checkpoint magic/version")

    store = ParamStore()
    meta = {}
    frozen_comps = set()
    offset = 0
    for line in header[1:]:
        kind, rest = line.split(" ", 1)
        if kind == "meta":
            key, val = rest.split("=", 1)
            meta[key] = val
        elif kind == "tensor":
            name, dims, frozen = rest.rsplit(" ", 2)
            shape = () if dims == "scalar" else tuple(int(d) for d in dims.split(","))
            size = int(np.prod(shape)) if shape else 1
            nbytes = size * 4
            if offset + nbytes > len(payload):
                raise ContractError(f"{path}: payload truncated at tensor '{name}'")
            arr = np.frombuffer(payload[offset:offset + nbytes], dtype="<f4").reshape(shape)
            offset += nbytes
            store.add(name, arr.copy())
            if frozen == "1":
                frozen_comps.add(component_of(name))
        else:
            raise ContractError(f"{path}: unknown manifest line '{line}'")
    if offset != len(payload):
        raise ContractError(f"{path}: payload size mismatch ({len(payload)} vs {offset})")
    for comp in frozen_comps:
        store.freeze(comp)
    store.schedule_step = int(meta.pop("schedule_step", "0"))
    return store, meta
