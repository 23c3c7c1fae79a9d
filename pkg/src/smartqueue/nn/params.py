"""Named parameter containers, initialisation and binary checkpoints."""

from __future__ import annotations

import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from ..errors import ConfigError, DimensionError, PreconditionError

MAGIC = b"SQPS"
VERSION = 1


class ParamSet:
    """Ordered mapping ``name -> 2-D float64 array``.

    Names follow ``<layer-id>.W`` / ``<layer-id>.b``; biases are stored as
    ``(1, n)`` rows so every entry is a matrix. Iteration order is insertion
    order, which makes flattening and serialisation deterministic.
    """

    def __init__(self, items: Iterable[tuple[str, np.ndarray]] = ()):
        self._data: OrderedDict[str, np.ndarray] = OrderedDict()
        for name, value in items:
            self[name] = value

    def __getitem__(self, name: str) -> np.ndarray:
        return self._data[name]

    def __setitem__(self, name: str, value) -> None:
        arr = np.asarray(value, dtype=np.float64)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise DimensionError(f"parameter {name!r} must be 2-D, got shape {arr.shape}")
        self._data[name] = arr

    def __contains__(self, name: object) -> bool:
        return name in self._data

    def __iter__(self) -> Iterator[str]:
        return iter(self._data)

    def __len__(self) -> int:
        return len(self._data)

    def __repr__(self) -> str:
        shapes = ", ".join(f"{k}{v.shape}" for k, v in self._data.items())
        return f"ParamSet({shapes})"

    def names(self) -> list[str]:
        return list(self._data)

    def items(self):
        return self._data.items()

    def values(self):
        return self._data.values()

    def shapes(self) -> dict[str, tuple[int, int]]:
        return {k: v.shape for k, v in self._data.items()}

    def copy(self) -> "ParamSet":
        return ParamSet((k, v.copy()) for k, v in self._data.items())

    def zeros_like(self) -> "ParamSet":
        return ParamSet((k, np.zeros_like(v)) for k, v in self._data.items())

    def num_values(self) -> int:
        return sum(v.size for v in self._data.values())

    def subset(self, prefix: str) -> "ParamSet":
        """Entries whose name starts with ``prefix`` (views, not copies)."""
        out = ParamSet()
        for k, v in self._data.items():
            if k.startswith(prefix):
                out._data[k] = v
        return out

    def update(self, other: "ParamSet") -> None:
        for k, v in other.items():
            self._data[k] = v

    def check_compatible(self, other: "ParamSet") -> None:
        if self.names() != other.names():
            raise DimensionError(
                f"parameter names differ: {sorted(set(self.names()) ^ set(other.names()))}"
            )
        for k, v in self._data.items():
            if v.shape != other[k].shape:
                raise DimensionError(f"{k}: shape {v.shape} vs {other[k].shape}")

    def flatten(self) -> np.ndarray:
        return np.concatenate([v.ravel() for v in self._data.values()])

    def allclose(self, other: "ParamSet", atol: float = 0.0) -> bool:
        return self.names() == other.names() and all(
            np.allclose(v, other[k], rtol=0.0, atol=atol) for k, v in self._data.items()
        )

    def all_finite(self) -> bool:
        return all(np.isfinite(v).all() for v in self._data.values())


@dataclass(frozen=True)
class AttentionConfig:
    heads: int = 8
    model_dim: int = 128
    key_dim: int = 16

    def __post_init__(self):
        if min(self.heads, self.model_dim, self.key_dim) < 1:
            raise PreconditionError("attention sizes must be >= 1")
        if self.heads * self.key_dim != self.model_dim:
            raise PreconditionError(
                f"heads*key_dim must equal model_dim ({self.heads}*{self.key_dim} != {self.model_dim})"
            )


def glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def init_dense(params: ParamSet, layer: str, fan_in: int, fan_out: int, rng) -> None:
    params[f"{layer}.W"] = glorot(rng, fan_in, fan_out)
    params[f"{layer}.b"] = np.zeros((1, fan_out))


def init_mlp(params: ParamSet, prefix: str, sizes: list[int], rng) -> None:
    """Dense stack ``sizes[0] -> sizes[1] -> ...`` named ``prefix.0``, ``prefix.1``..."""
    for i, (a, b) in enumerate(zip(sizes[:-1], sizes[1:])):
        init_dense(params, f"{prefix}.{i}", a, b, rng)


def init_attention(params: ParamSet, prefix: str, cfg: AttentionConfig, rng) -> None:
    d, hk = cfg.model_dim, cfg.heads * cfg.key_dim
    params[f"{prefix}.Wq"] = glorot(rng, d, hk)
    params[f"{prefix}.Wk"] = glorot(rng, d, hk)
    params[f"{prefix}.Wv"] = glorot(rng, d, hk)
    init_dense(params, f"{prefix}.out", hk, d, rng)


def mlp_layers(params: ParamSet, prefix: str) -> list[str]:
    """Layer ids ``prefix.0 .. prefix.k`` present in ``params``, in order."""
    out = []
    i = 0
    while f"{prefix}.{i}.W" in params:
        out.append(f"{prefix}.{i}")
        i += 1
    return out


def save_params(params: ParamSet, path: str | Path) -> None:
    """Write ``params`` to ``path``.

    Layout: ``b"SQPS"``, one version byte, then one record per entry until
    EOF. A record is ``<H`` name length, UTF-8 name, ``<I`` rows, ``<I`` cols
    and ``rows*cols`` little-endian float64 values in row-major order.
    """
    Path(path).write_bytes(dumps_params(params))


def dumps_params(params: ParamSet) -> bytes:
    chunks = [MAGIC, struct.pack("<B", VERSION)]
    for name, arr in params.items():
        raw = name.encode("utf-8")
        rows, cols = arr.shape
        chunks.append(struct.pack("<H", len(raw)))
        chunks.append(raw)
        chunks.append(struct.pack("<II", rows, cols))
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(chunks)


def load_params(path: str | Path) -> ParamSet:
    return loads_params(Path(path).read_bytes())


def loads_params(blob: bytes) -> ParamSet:
    if blob[:4] != MAGIC:
        raise ConfigError("not a parameter file (bad magic)")
    if blob[4] != VERSION:
        raise ConfigError(f"unsupported parameter file version {blob[4]}")
    pos = 5
    out = ParamSet()
    try:
        while pos < len(blob):
            (n,) = struct.unpack_from("<H", blob, pos)
            pos += 2
            name = blob[pos : pos + n].decode("utf-8")
            pos += n
            rows, cols = struct.unpack_from("<II", blob, pos)
            pos += 8
            count = rows * cols
            arr = np.frombuffer(blob, dtype="<f8", count=count, offset=pos)
            pos += 8 * count
            out[name] = arr.reshape(rows, cols).astype(np.float64)
    except (struct.error, ValueError) as exc:
        raise ConfigError(f"truncated parameter file: {exc}") from None
    return out
