"""Ring-factor and CP-factor models with linear bias, plus checkpoint I/O.

The ring model keeps three non-negative core tensors, one per mode, each a
stack of R x R lateral slices (shape R x mode_size x R).  A cell prediction
is the trace of the cyclic product of the three slices picked out by
(i, j, k), plus a linear-bias term: the inner product of three bias rows.
The CP baseline replaces the slice product with a plain rank-R triple
product; its bias term is identical.

All parameters are float64 and non-negative; models are immutable in
practice (training builds new arrays rather than mutating in place).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FormatError

_MAGIC_TR = b"TRLB"
_MAGIC_CP = b"CPLB"
_VERSION = 1
_HEADER = struct.Struct("<4sI4Q")


def _as_param(arr, shape, name):
    a = np.asarray(arr, dtype=np.float64)
    if a.shape != shape:
        raise DomainError(f"{name} must have shape {shape}, got {a.shape}")
    if not np.all(np.isfinite(a)) or np.any(a < 0.0):
        raise DomainError(f"{name} must be finite and non-negative")
    return a


def _check_indices(dims, ii, jj, kk):
    for mode, idx in enumerate((ii, jj, kk)):
        idx = np.asarray(idx)
        if np.any(idx < 0) or np.any(idx >= dims[mode]):
            raise DomainError(f"index out of bounds for mode {mode} of size {dims[mode]}")


@dataclass(frozen=True)
class TrModel:
    """Three ring cores (R x n x R each) and three bias matrices (n x R)."""

    cores: tuple
    biases: tuple

    def __post_init__(self):
        if len(self.cores) != 3 or len(self.biases) != 3:
            raise DomainError("expected exactly three cores and three bias matrices")
        c0 = np.asarray(self.cores[0])
        if c0.ndim != 3 or c0.shape[0] < 1:
            raise DomainError("cores must be rank x mode_size x rank arrays")
        rank = int(c0.shape[0])
        cores, biases = [], []
        for m in range(3):
            n = int(np.asarray(self.cores[m]).shape[1])
            cores.append(_as_param(self.cores[m], (rank, n, rank), f"core[{m}]"))
            biases.append(_as_param(self.biases[m], (n, rank), f"bias[{m}]"))
        object.__setattr__(self, "cores", tuple(cores))
        object.__setattr__(self, "biases", tuple(biases))

    @property
    def rank(self) -> int:
        return self.cores[0].shape[0]

    @property
    def dims(self):
        return tuple(c.shape[1] for c in self.cores)

    def predict_core(self, i, j, k) -> float:
        """Trace of the cyclic slice product for cell (i, j, k)."""
        _check_indices(self.dims, i, j, k)
        prod = self.cores[0][:, i, :] @ self.cores[1][:, j, :] @ self.cores[2][:, k, :]
        return float(np.trace(prod))

    def predict_bias(self, i, j, k) -> float:
        """Inner product of the three bias rows for cell (i, j, k)."""
        _check_indices(self.dims, i, j, k)
        return float(np.sum(self.biases[0][i] * self.biases[1][j] * self.biases[2][k]))

    def predict(self, i, j, k) -> float:
        return self.predict_core(i, j, k) + self.predict_bias(i, j, k)

    def predict_many(self, ii, jj, kk):
        """Vectorized predict over aligned index arrays."""
        _check_indices(self.dims, ii, jj, kk)
        core = np.einsum(
            "aeb,bec,cea->e",
            self.cores[0][:, ii, :],
            self.cores[1][:, jj, :],
            self.cores[2][:, kk, :],
        )
        bias = np.einsum(
            "er,er,er->e", self.biases[0][ii], self.biases[1][jj], self.biases[2][kk]
        )
        return core + bias

    def copy(self) -> "TrModel":
        return TrModel(
            tuple(c.copy() for c in self.cores),
            tuple(b.copy() for b in self.biases),
        )


@dataclass(frozen=True)
class CpModel:
    """Baseline: three factor matrices (n x R) and three bias matrices (n x R)."""

    factors: tuple
    biases: tuple

    def __post_init__(self):
        if len(self.factors) != 3 or len(self.biases) != 3:
            raise DomainError("expected exactly three factors and three bias matrices")
        rank = int(np.asarray(self.factors[0]).shape[-1])
        if rank < 1:
            raise DomainError("rank must be >= 1")
        factors, biases = [], []
        for m in range(3):
            n = int(np.asarray(self.factors[m]).shape[0])
            factors.append(_as_param(self.factors[m], (n, rank), f"factor[{m}]"))
            biases.append(_as_param(self.biases[m], (n, rank), f"bias[{m}]"))
        object.__setattr__(self, "factors", tuple(factors))
        object.__setattr__(self, "biases", tuple(biases))

    @property
    def rank(self) -> int:
        return self.factors[0].shape[1]

    @property
    def dims(self):
        return tuple(f.shape[0] for f in self.factors)

    def predict_core(self, i, j, k) -> float:
        _check_indices(self.dims, i, j, k)
        return float(np.sum(self.factors[0][i] * self.factors[1][j] * self.factors[2][k]))

    def predict_bias(self, i, j, k) -> float:
        _check_indices(self.dims, i, j, k)
        return float(np.sum(self.biases[0][i] * self.biases[1][j] * self.biases[2][k]))

    def predict(self, i, j, k) -> float:
        return self.predict_core(i, j, k) + self.predict_bias(i, j, k)

    def predict_many(self, ii, jj, kk):
        _check_indices(self.dims, ii, jj, kk)
        core = np.einsum(
            "er,er,er->e", self.factors[0][ii], self.factors[1][jj], self.factors[2][kk]
        )
        bias = np.einsum(
            "er,er,er->e", self.biases[0][ii], self.biases[1][jj], self.biases[2][kk]
        )
        return core + bias

    def copy(self) -> "CpModel":
        return CpModel(
            tuple(f.copy() for f in self.factors),
            tuple(b.copy() for b in self.biases),
        )


def init_model(dims, rank, seed, lo=0.01, hi=0.1, bias=True) -> TrModel:
    """Draw a strictly positive random ring model, uniform on [lo, hi).

    A strictly positive start matters: multiplicative training can never
    move a parameter off zero.  With bias=False the bias matrices are
    zero-initialized (and stay zero under training with bias disabled).
    """
    _check_init_args(dims, rank, lo, hi)
    rng = np.random.default_rng(seed)
    cores = tuple(rng.uniform(lo, hi, size=(rank, n, rank)) for n in dims)
    biases = _init_bias(rng, dims, rank, lo, hi, bias)
    return TrModel(cores, biases)


def init_cp_model(dims, rank, seed, lo=0.01, hi=0.1, bias=True) -> CpModel:
    """Random CP baseline model, same conventions as init_model."""
    _check_init_args(dims, rank, lo, hi)
    rng = np.random.default_rng(seed)
    factors = tuple(rng.uniform(lo, hi, size=(n, rank)) for n in dims)
    biases = _init_bias(rng, dims, rank, lo, hi, bias)
    return CpModel(factors, biases)


def _check_init_args(dims, rank, lo, hi):
    if len(dims) != 3 or any(int(n) < 1 for n in dims):
        raise DomainError(f"dims must be three positive sizes, got {tuple(dims)}")
    if rank < 1:
        raise DomainError("rank must be >= 1")
    if not 0.0 < lo < hi:
        raise DomainError(f"need 0 < lo < hi, got lo={lo}, hi={hi}")


def _init_bias(rng, dims, rank, lo, hi, bias):
    if bias:
        return tuple(rng.uniform(lo, hi, size=(n, rank)) for n in dims)
    return tuple(np.zeros((n, rank)) for n in dims)


def save_model(model, path):
    """Write a checkpoint.

    Layout, all little-endian: 4-byte magic (`TRLB` for ring models,
    `CPLB` for the CP baseline), u32 format version (1), then |I|, |J|,
    |K|, R as u64, then the six parameter arrays as contiguous f64 in
    order: the three cores/factors (modes 0, 1, 2), then the three bias
    matrices.  Cores are stored as R x n x R row-major, factor and bias
    matrices as n x R row-major.
    """
    if isinstance(model, TrModel):
        magic, blocks = _MAGIC_TR, (*model.cores, *model.biases)
    elif isinstance(model, CpModel):
        magic, blocks = _MAGIC_CP, (*model.factors, *model.biases)
    else:
        raise DomainError(f"cannot save object of type {type(model).__name__}")
    header = _HEADER.pack(magic, _VERSION, *model.dims, model.rank)
    with open(path, "wb") as fh:
        fh.write(header)
        for block in blocks:
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_model(path):
    """Read a checkpoint written by save_model; returns TrModel or CpModel."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < _HEADER.size:
        raise FormatError(f"{path}: truncated header ({len(blob)} bytes)")
    magic, version, d0, d1, d2, rank = _HEADER.unpack_from(blob)
    if magic not in (_MAGIC_TR, _MAGIC_CP):
        raise FormatError(f"{path}: bad magic {magic!r}")
    if version != _VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if rank < 1 or min(d0, d1, d2) < 1:
        raise FormatError(f"{path}: invalid header (dims=({d0}, {d1}, {d2}), rank={rank})")
    dims = (d0, d1, d2)
    if magic == _MAGIC_TR:
        shapes = [(rank, n, rank) for n in dims] + [(n, rank) for n in dims]
    else:
        shapes = [(n, rank) for n in dims] + [(n, rank) for n in dims]
    expected = _HEADER.size + 8 * sum(int(np.prod(s)) for s in shapes)
    if len(blob) != expected:
        raise FormatError(f"{path}: expected {expected} bytes, found {len(blob)}")
    offset = _HEADER.size
    arrays = []
    for shape in shapes:
        count = int(np.prod(shape))
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
        arrays.append(arr.astype(np.float64).reshape(shape))
        offset += 8 * count
    try:
        if magic == _MAGIC_TR:
            return TrModel(tuple(arrays[:3]), tuple(arrays[3:]))
        return CpModel(tuple(arrays[:3]), tuple(arrays[3:]))
    except DomainError as exc:
        raise FormatError(f"{path}: invalid parameters: {exc}") from None
