"""Synthetic sparse-tensor generation and brute-force reference oracles.

The oracles in this module are deliberately naive: explicit Python loops,
no matrix products, no code shared with the optimized model/trainer paths.
They exist so that every optimized computation in the package can be
checked against an independent implementation of the same arithmetic.
Keep them slow and obvious.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .model import CpModel, TrModel
from .tensor_store import SparseTensor, from_cells


@dataclass(frozen=True)
class SynthSpec:
    """Recipe for a synthetic sparse tensor with known low-rank structure."""

    dims: tuple
    true_rank: int
    density: float
    noise_sigma: float = 0.0
    weight_scale: float = 10.0
    seed: int = 0
    family: str = "tr"

    def validate(self):
        if len(self.dims) != 3 or any(int(n) < 1 for n in self.dims):
            raise DomainError(f"dims must be three positive sizes, got {self.dims}")
        if self.true_rank < 1:
            raise DomainError("true_rank must be >= 1")
        if not 0.0 < self.density <= 1.0:
            raise DomainError(f"density must be in (0, 1], got {self.density}")
        if self.noise_sigma < 0.0:
            raise DomainError("noise_sigma must be >= 0")
        if self.weight_scale <= 0.0:
            raise DomainError("weight_scale must be > 0")
        if self.family not in ("tr", "cp"):
            raise DomainError(f"family must be 'tr' or 'cp', got {self.family!r}")


def generate(spec: SynthSpec):
    """Sample a ground-truth model and a sparse tensor drawn from it.

    Factor entries are uniform on [0.1, 1.0), then rescaled so the mean
    sampled cell value is about weight_scale / 2.  Bias matrices of the
    ground truth are zero, so the clean cell values are pure low-rank
    contractions.  Observed weights are clean values plus optional
    Gaussian noise, truncated at zero (truncation keeps generation a
    single pass; the slight bias toward zero is fine for test data).

    Returns (tensor, ground_truth_model).
    """
    spec.validate()
    rng = np.random.default_rng(spec.seed)
    d0, d1, d2 = (int(n) for n in spec.dims)
    total = d0 * d1 * d2
    n_cells = int(math.ceil(spec.density * total))
    if n_cells < 1:
        raise DomainError("density too low: zero cells sampled")

    rank = spec.true_rank
    if spec.family == "tr":
        parts = [rng.uniform(0.1, 1.0, size=(rank, n, rank)) for n in spec.dims]
    else:
        parts = [rng.uniform(0.1, 1.0, size=(n, rank)) for n in spec.dims]

    flat = rng.choice(total, size=n_cells, replace=False)
    kk = flat % d2
    jj = (flat // d2) % d1
    ii = flat // (d1 * d2)

    clean = _clean_values(spec.family, parts, ii, jj, kk)
    # Trilinear model: scaling every factor by s**(1/3) scales values by s.
    scale = (spec.weight_scale / 2.0) / float(np.mean(clean))
    parts = [p * scale ** (1.0 / 3.0) for p in parts]
    clean = _clean_values(spec.family, parts, ii, jj, kk)

    values = clean
    if spec.noise_sigma > 0.0:
        values = np.maximum(0.0, clean + rng.normal(0.0, spec.noise_sigma, size=n_cells))

    zero_bias = tuple(np.zeros((n, rank)) for n in spec.dims)
    if spec.family == "tr":
        truth = TrModel(tuple(parts), zero_bias)
    else:
        truth = CpModel(tuple(parts), zero_bias)
    tensor = from_cells((ii, jj, kk), values, dims=(d0, d1, d2))
    return tensor, truth


def _clean_values(family, parts, ii, jj, kk):
    if family == "tr":
        return np.array(
            [oracle_tr_element(parts[0], parts[1], parts[2], i, j, k)
             for i, j, k in zip(ii, jj, kk)]
        )
    return np.array(
        [oracle_cp_element(parts[0], parts[1], parts[2], i, j, k)
         for i, j, k in zip(ii, jj, kk)]
    )


def oracle_tr_element(core0, core1, core2, i, j, k) -> float:
    """Cell value of the ring contraction as an explicit triple sum.

    Loops over all (r1, r2, r3) combinations; shares nothing with the
    trace-of-slice-products fast path.
    """
    rank = core0.shape[0]
    for name, core in (("core0", core0), ("core1", core1), ("core2", core2)):
        if core.ndim != 3 or core.shape[0] != rank or core.shape[2] != rank:
            raise DomainError(f"{name} has inconsistent shape {core.shape}")
    total = 0.0
    for r1 in range(rank):
        for r2 in range(rank):
            for r3 in range(rank):
                total += core0[r3, i, r1] * core1[r1, j, r2] * core2[r2, k, r3]
    return total


def oracle_cp_element(fac0, fac1, fac2, i, j, k) -> float:
    """CP cell value as an explicit rank loop."""
    total = 0.0
    for r in range(fac0.shape[1]):
        total += fac0[i, r] * fac1[j, r] * fac2[k, r]
    return total


def oracle_bias_element(row_i, row_j, row_k) -> float:
    """Bias value via the full diagonal-slice trace, not the inner product.

    Builds the three diagonal matrices the bias rows stand for and takes
    the trace of their product with explicit loops.  Agreement with the
    inner-product fast path is what the tests assert.
    """
    rank = len(row_i)
    mats = []
    for row in (row_i, row_j, row_k):
        m = [[0.0] * rank for _ in range(rank)]
        for r in range(rank):
            m[r][r] = float(row[r])
        mats.append(m)
    prod_ab = [
        [sum(mats[0][a][t] * mats[1][t][b] for t in range(rank)) for b in range(rank)]
        for a in range(rank)
    ]
    trace = 0.0
    for a in range(rank):
        for t in range(rank):
            trace += prod_ab[a][t] * mats[2][t][a]
    return trace


def _oracle_predict_cell(cores, biases, i, j, k, bias_enabled):
    value = oracle_tr_element(cores[0], cores[1], cores[2], i, j, k)
    if bias_enabled:
        for r in range(biases[0].shape[1]):
            value += biases[0][i, r] * biases[1][j, r] * biases[2][k, r]
    return value


def _oracle_predict_cell_cp(factors, biases, i, j, k, bias_enabled):
    value = oracle_cp_element(factors[0], factors[1], factors[2], i, j, k)
    if bias_enabled:
        for r in range(biases[0].shape[1]):
            value += biases[0][i, r] * biases[1][j, r] * biases[2][k, r]
    return value


def oracle_epoch(model: TrModel, tensor: SparseTensor, train, cfg) -> TrModel:
    """One training epoch of the ring model, transliterated element by element.

    Mirrors the trainer's contract exactly -- block order core0, core1,
    core2, then the three bias blocks; cell estimates recomputed at the
    start of every block; regularization added once per entry inside the
    per-slice sums; denominators guarded by cfg.eps; parameters with an
    all-zero numerator (and slices with no training entries) left
    unchanged -- but written as plain nested loops over every index.
    Intended only for tensors with a few dozen entries.
    """
    cores = [c.copy() for c in model.cores]
    biases = [b.copy() for b in model.biases]
    rank = model.rank
    cells = [tensor.entry(int(p)) for p in train]

    for mode in range(3):
        nxt, nxt2 = (mode + 1) % 3, (mode + 2) % 3
        yhat = [_oracle_predict_cell(cores, biases, c.i, c.j, c.k, cfg.bias_enabled)
                for c in cells]
        new = cores[mode].copy()
        for idx in range(tensor.dims[mode]):
            rows = [(p, c) for p, c in enumerate(cells) if (c.i, c.j, c.k)[mode] == idx]
            if not rows:
                continue
            for a in range(rank):
                for b in range(rank):
                    num = 0.0
                    den = 0.0
                    for p, c in rows:
                        cell = (c.i, c.j, c.k)
                        coef = 0.0
                        for t in range(rank):
                            coef += cores[nxt][b, cell[nxt], t] * cores[nxt2][t, cell[nxt2], a]
                        num += c.y * coef
                        den += yhat[p] * coef + cfg.lambda1 * cores[mode][a, idx, b]
                    if num > 0.0:
                        new[a, idx, b] = cores[mode][a, idx, b] * num / (den + cfg.eps)
        cores[mode] = new

    if cfg.bias_enabled:
        for mode in range(3):
            nxt, nxt2 = (mode + 1) % 3, (mode + 2) % 3
            yhat = [_oracle_predict_cell(cores, biases, c.i, c.j, c.k, True)
                    for c in cells]
            new = biases[mode].copy()
            for idx in range(tensor.dims[mode]):
                rows = [(p, c) for p, c in enumerate(cells) if (c.i, c.j, c.k)[mode] == idx]
                if not rows:
                    continue
                for r in range(rank):
                    num = 0.0
                    den = 0.0
                    for p, c in rows:
                        cell = (c.i, c.j, c.k)
                        coef = biases[nxt][cell[nxt], r] * biases[nxt2][cell[nxt2], r]
                        num += c.y * coef
                        den += yhat[p] * coef + cfg.lambda2 * biases[mode][idx, r]
                    if num > 0.0:
                        new[idx, r] = biases[mode][idx, r] * num / (den + cfg.eps)
            biases[mode] = new

    return TrModel(tuple(cores), tuple(biases))


def oracle_cp_epoch(model: CpModel, tensor: SparseTensor, train, cfg) -> CpModel:
    """One training epoch of the CP baseline, written as plain loops."""
    factors = [f.copy() for f in model.factors]
    biases = [b.copy() for b in model.biases]
    rank = model.rank
    cells = [tensor.entry(int(p)) for p in train]

    def run_blocks(mats, lam):
        for mode in range(3):
            nxt, nxt2 = (mode + 1) % 3, (mode + 2) % 3
            yhat = [_oracle_predict_cell_cp(factors, biases, c.i, c.j, c.k, cfg.bias_enabled)
                    for c in cells]
            new = mats[mode].copy()
            for idx in range(tensor.dims[mode]):
                rows = [(p, c) for p, c in enumerate(cells) if (c.i, c.j, c.k)[mode] == idx]
                if not rows:
                    continue
                for r in range(rank):
                    num = 0.0
                    den = 0.0
                    for p, c in rows:
                        cell = (c.i, c.j, c.k)
                        coef = mats[nxt][cell[nxt], r] * mats[nxt2][cell[nxt2], r]
                        num += c.y * coef
                        den += yhat[p] * coef + lam * mats[mode][idx, r]
                    if num > 0.0:
                        new[idx, r] = mats[mode][idx, r] * num / (den + cfg.eps)
            mats[mode] = new

    run_blocks(factors, cfg.lambda1)
    if cfg.bias_enabled:
        run_blocks(biases, cfg.lambda2)
    return CpModel(tuple(factors), tuple(biases))
