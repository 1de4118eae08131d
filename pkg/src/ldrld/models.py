"""Seeded MLP classifier and versioned binary checkpoints.

Initialization draws every parameter from a scaled uniform distribution
with bound 1/sqrt(fan_in), layer by layer (weights then bias), from a
generator seeded by the spec.  Identical specs therefore always produce
bit-identical parameters, and checkpoints round-trip byte for byte.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from . import tensor as tt
from .tensor import Tensor, as_tensor

__all__ = ["MlpSpec", "Mlp", "save_checkpoint", "load_checkpoint", "CHECKPOINT_MAGIC"]

CHECKPOINT_MAGIC = b"LDRLDCKPT"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class MlpSpec:
    """Architecture plus the seed that fixes its initial parameters."""

    input_dim: int
    hidden_dims: tuple[int, ...]
    num_classes: int
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1:
            raise ValueError(f"input_dim must be >= 1, got {self.input_dim}")
        if any(h < 1 for h in self.hidden_dims):
            raise ValueError(f"hidden dims must be >= 1, got {self.hidden_dims}")
        if self.num_classes < 2:
            raise ValueError(f"num_classes must be >= 2, got {self.num_classes}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 unsigned bits, got {self.seed}")

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        dims = [self.input_dim, *self.hidden_dims, self.num_classes]
        return list(zip(dims[:-1], dims[1:]))


class Mlp:
    """Fully connected ReLU network producing raw class logits."""

    def __init__(self, spec: MlpSpec, requires_grad: bool = True) -> None:
        self.spec = spec
        rng = np.random.default_rng(spec.seed)
        self.layers: list[tuple[Tensor, Tensor]] = []
        for fan_in, fan_out in spec.layer_dims:
            bound = 1.0 / np.sqrt(fan_in)
            w = rng.uniform(-bound, bound, size=(fan_in, fan_out))
            b = rng.uniform(-bound, bound, size=fan_out)
            self.layers.append(
                (Tensor(w, requires_grad=requires_grad), Tensor(b, requires_grad=requires_grad))
            )

    @property
    def params(self) -> list[Tensor]:
        return [p for layer in self.layers for p in layer]

    def forward(self, x) -> Tensor:
        """Logits for a batch; input rows must match the spec's input_dim."""
        h = as_tensor(x)
        if h.data.ndim != 2 or h.data.shape[1] != self.spec.input_dim:
            raise ValueError(
                f"input of shape {h.data.shape} does not match input_dim {self.spec.input_dim}"
            )
        last = len(self.layers) - 1
        for k, (w, b) in enumerate(self.layers):
            h = tt.matmul(h, w) + b
            if k != last:
                h = tt.relu(h)
        return h

    def predict(self, x) -> np.ndarray:
        """Argmax class per row, ties to the lower class index."""
        return np.argmax(self.forward(x).data, axis=1)


def save_checkpoint(path, model: Mlp) -> None:
    """Write magic, format version, architecture fields, then parameter buffers.

    All integers and floats are stored little-endian; parameters appear in
    layer order, weights before bias.
    """
    spec = model.spec
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", CHECKPOINT_VERSION))
        fh.write(struct.pack("<I", spec.input_dim))
        fh.write(struct.pack("<I", len(spec.hidden_dims)))
        for h in spec.hidden_dims:
            fh.write(struct.pack("<I", h))
        fh.write(struct.pack("<I", spec.num_classes))
        fh.write(struct.pack("<Q", spec.seed))
        for w, b in model.layers:
            fh.write(np.ascontiguousarray(w.data, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b.data, dtype="<f8").tobytes())


def load_checkpoint(path, requires_grad: bool = False) -> Mlp:
    """Reconstruct a model from a checkpoint, validating magic, version and size."""
    with open(path, "rb") as fh:
        blob = fh.read()
    off = len(CHECKPOINT_MAGIC)
    if blob[:off] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: not a checkpoint (bad magic {blob[:off]!r})")

    def read(fmt: str):
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(blob):
            raise ValueError(f"{path}: truncated checkpoint")
        values = struct.unpack_from(fmt, blob, off)
        off += size
        return values

    (version,) = read("<I")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {version}")
    (input_dim,) = read("<I")
    (n_hidden,) = read("<I")
    hidden = tuple(read(f"<{n_hidden}I")) if n_hidden else ()
    (num_classes,) = read("<I")
    (seed,) = read("<Q")
    spec = MlpSpec(input_dim=input_dim, hidden_dims=hidden, num_classes=num_classes, seed=seed)

    model = Mlp(spec, requires_grad=requires_grad)
    for w, b in model.layers:
        for param in (w, b):
            nbytes = param.data.size * 8
            if off + nbytes > len(blob):
                raise ValueError(f"{path}: truncated parameter buffer")
            buf = np.frombuffer(blob, dtype="<f8", count=param.data.size, offset=off)
            param.data = np.ascontiguousarray(buf.reshape(param.data.shape))
            off += nbytes
    if off != len(blob):
        raise ValueError(f"{path}: {len(blob) - off} trailing bytes after parameters")
    return model
