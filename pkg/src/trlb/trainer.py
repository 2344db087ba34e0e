"""Multiplicative-update training for the ring model and the CP baseline.

Each epoch runs six parameter blocks in a fixed order: the three cores
(or CP factors) mode by mode, then the three bias matrices mode by mode.
Within a block every slice is rescaled by a ratio of two non-negative
sums accumulated over the training entries that touch it:

    numerator    sum of  y * coefficient
    denominator  sum of (estimate * coefficient + lambda * parameter),
                 plus a small guard eps

where the coefficient is the partial derivative of the cell estimate with
respect to the parameter (a product of the other two factors' slices or
rows), and the cell estimates are recomputed once at the start of each
block from the parameters as they stand.  Because every quantity involved
is non-negative, the update can never produce a negative parameter.  The
regularization term sits inside the per-entry sum, so a slice touched by
many entries is penalized once per touch.

Conventions that the brute-force oracle mirrors exactly: slices with no
training entries are skipped; a parameter whose whole numerator is zero
is left unchanged (rather than being zeroed by a degenerate 0/eps ratio).
The bias update for the target-node and time modes follows the same form
as the source-node one, each summing over the entries that touch its own
slice; this symmetry also gives the second and third core updates.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError
from .metrics import evaluate
from .model import CpModel, TrModel, init_cp_model, init_model


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters and bookkeeping knobs for one training run."""

    rank: int
    lambda1: float = 0.0
    lambda2: float = 0.0
    max_epochs: int = 100
    patience: int = 0
    min_delta: float = 0.0
    seed: int = 0
    eps: float = 1e-12
    bias_enabled: bool = True

    def problems(self):
        """All constraint violations, so callers can report them at once."""
        out = []
        if self.rank < 1:
            out.append(f"rank must be >= 1, got {self.rank}")
        if self.lambda1 < 0.0:
            out.append(f"lambda1 must be >= 0, got {self.lambda1}")
        if self.lambda2 < 0.0:
            out.append(f"lambda2 must be >= 0, got {self.lambda2}")
        if self.max_epochs < 1:
            out.append(f"max_epochs must be >= 1, got {self.max_epochs}")
        if self.patience < 0:
            out.append(f"patience must be >= 0, got {self.patience}")
        if self.min_delta < 0.0:
            out.append(f"min_delta must be >= 0, got {self.min_delta}")
        if self.eps <= 0.0:
            out.append(f"eps must be > 0, got {self.eps}")
        return out

    def validate(self):
        problems = self.problems()
        if problems:
            raise DomainError("; ".join(problems))


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    objective: float
    train_rmse: float
    val_rmse: float
    val_mae: float


class UpdatePlan:
    """Training entries gathered and grouped by slice, one grouping per mode.

    For each mode: `order` lists chunk-local entry indices sorted by slice
    id (stable, so entries stay in ascending position order within a
    slice -- the summation order contract), `starts` the group offsets
    into `order`, `ids` the slice ids with at least one entry, `counts`
    the group sizes.
    """

    def __init__(self, tensor, positions):
        positions = np.asarray(positions, dtype=np.int64)
        self.n_entries = int(positions.size)
        self.cells = tuple(c[positions] for c in tensor.coords)
        self.values = tensor.values[positions]
        self.modes = []
        for m in range(3):
            order = np.argsort(self.cells[m], kind="stable")
            sorted_ids = self.cells[m][order]
            if sorted_ids.size:
                starts = np.flatnonzero(np.r_[True, sorted_ids[1:] != sorted_ids[:-1]])
                ids = sorted_ids[starts]
                counts = np.diff(np.r_[starts, sorted_ids.size])
            else:
                starts = np.empty(0, dtype=np.int64)
                ids = np.empty(0, dtype=np.int64)
                counts = np.empty(0, dtype=np.int64)
            self.modes.append((order, starts, ids, counts))


def _chunk_entries(plan, mode, lo, hi):
    """Entry data for groups [lo, hi) of a mode, in slice-grouped order."""
    order, starts, ids, counts = plan.modes[mode]
    lo_e = int(starts[lo])
    hi_e = int(starts[hi]) if hi < starts.size else order.size
    sel = order[lo_e:hi_e]
    cell = tuple(plan.cells[t][sel] for t in range(3))
    seg = starts[lo:hi] - lo_e
    return cell, plan.values[sel], seg, ids[lo:hi], counts[lo:hi]


def _guard_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise NumericError(f"non-finite {what} during update")


def _ring_core_chunk(cores, biases, mode, plan, cfg, lo, hi):
    """Updated slices for groups [lo, hi) of one core's grouping."""
    cell, y, seg, ids, counts = _chunk_entries(plan, mode, lo, hi)
    nxt, nxt2 = (mode + 1) % 3, (mode + 2) % 3
    # non-finite intermediates are caught by the guards, not by warnings
    # (errstate is thread-local, so it lives here inside the worker)
    with np.errstate(over="ignore", invalid="ignore"):
        left = cores[nxt][:, cell[nxt], :].transpose(1, 0, 2)
        right = cores[nxt2][:, cell[nxt2], :].transpose(1, 0, 2)
        prod = left @ right
        own = cores[mode][:, cell[mode], :].transpose(1, 0, 2)
        yhat = np.einsum("eab,eba->e", own, prod)
        if cfg.bias_enabled:
            yhat = yhat + np.einsum(
                "er,er,er->e", biases[0][cell[0]], biases[1][cell[1]], biases[2][cell[2]]
            )
        _guard_finite(yhat, f"cell estimate (core block, mode {mode})")
        coef = prod.transpose(0, 2, 1)
        num = np.add.reduceat(y[:, None, None] * coef, seg, axis=0)
        den = np.add.reduceat(yhat[:, None, None] * coef, seg, axis=0)
        old = cores[mode][:, ids, :].transpose(1, 0, 2)
        den = den + counts[:, None, None] * cfg.lambda1 * old + cfg.eps
        upd = np.where(num > 0.0, old * num / den, old)
    return ids, upd


def _row_chunk(rows, mode, lam, eps, predict, plan, lo, hi):
    """Updated rows for groups [lo, hi) of one row-matrix's grouping."""
    cell, y, seg, ids, counts = _chunk_entries(plan, mode, lo, hi)
    nxt, nxt2 = (mode + 1) % 3, (mode + 2) % 3
    with np.errstate(over="ignore", invalid="ignore"):
        coef = rows[nxt][cell[nxt]] * rows[nxt2][cell[nxt2]]
        yhat = predict(cell)
        _guard_finite(yhat, f"cell estimate (row block, mode {mode})")
        num = np.add.reduceat(y[:, None] * coef, seg, axis=0)
        den = np.add.reduceat(yhat[:, None] * coef, seg, axis=0)
        old = rows[mode][ids]
        den = den + counts[:, None] * lam * old + eps
        upd = np.where(num > 0.0, old * num / den, old)
    return ids, upd


def _map_chunks(pool, threads, n_groups, worker):
    if n_groups == 0:
        return []
    if pool is None or n_groups == 1:
        return [worker(0, n_groups)]
    n_chunks = min(threads, n_groups)
    bounds = np.linspace(0, n_groups, n_chunks + 1).astype(int)
    futures = [
        pool.submit(worker, int(lo), int(hi))
        for lo, hi in zip(bounds[:-1], bounds[1:])
        if hi > lo
    ]
    return [f.result() for f in futures]


def _predict_ring(cores, biases, cell, bias_enabled):
    yhat = np.einsum(
        "aeb,bec,cea->e",
        cores[0][:, cell[0], :],
        cores[1][:, cell[1], :],
        cores[2][:, cell[2], :],
    )
    if bias_enabled:
        yhat = yhat + np.einsum(
            "er,er,er->e", biases[0][cell[0]], biases[1][cell[1]], biases[2][cell[2]]
        )
    return yhat


def _predict_cp(factors, biases, cell, bias_enabled):
    yhat = np.einsum(
        "er,er,er->e", factors[0][cell[0]], factors[1][cell[1]], factors[2][cell[2]]
    )
    if bias_enabled:
        yhat = yhat + np.einsum(
            "er,er,er->e", biases[0][cell[0]], biases[1][cell[1]], biases[2][cell[2]]
        )
    return yhat


def epoch_update(model, tensor, train, cfg, plan=None, threads=1):
    """One full epoch of multiplicative updates on a ring model.

    Returns a new model; the input model is not touched.  Worker threads
    (when threads > 1) partition slices, never split one, so results are
    bit-identical to the sequential path.
    """
    if plan is None:
        plan = UpdatePlan(tensor, train)
    cores = list(model.cores)
    biases = list(model.biases)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        for mode in range(3):
            n_groups = plan.modes[mode][1].size

            def worker(lo, hi, mode=mode):
                return _ring_core_chunk(cores, biases, mode, plan, cfg, lo, hi)

            new = cores[mode].copy()
            for ids, upd in _map_chunks(pool, threads, n_groups, worker):
                new[:, ids, :] = upd.transpose(1, 0, 2)
            _guard_finite(new, f"core parameters (mode {mode})")
            cores[mode] = new

        if cfg.bias_enabled:
            for mode in range(3):
                n_groups = plan.modes[mode][1].size

                def predict(cell):
                    return _predict_ring(cores, biases, cell, True)

                def worker(lo, hi, mode=mode):
                    return _row_chunk(biases, mode, cfg.lambda2, cfg.eps, predict,
                                      plan, lo, hi)

                new = biases[mode].copy()
                for ids, upd in _map_chunks(pool, threads, n_groups, worker):
                    new[ids] = upd
                _guard_finite(new, f"bias parameters (mode {mode})")
                biases[mode] = new
    finally:
        if pool is not None:
            pool.shutdown()
    return TrModel(tuple(cores), tuple(biases))


def cp_epoch_update(model, tensor, train, cfg, plan=None, threads=1):
    """One full epoch of multiplicative updates on the CP baseline."""
    if plan is None:
        plan = UpdatePlan(tensor, train)
    factors = list(model.factors)
    biases = list(model.biases)
    pool = ThreadPoolExecutor(max_workers=threads) if threads > 1 else None
    try:
        def run_rows(rows, lam, label):
            for mode in range(3):
                n_groups = plan.modes[mode][1].size

                def predict(cell):
                    return _predict_cp(factors, biases, cell, cfg.bias_enabled)

                def worker(lo, hi, mode=mode):
                    return _row_chunk(rows, mode, lam, cfg.eps, predict, plan, lo, hi)

                new = rows[mode].copy()
                for ids, upd in _map_chunks(pool, threads, n_groups, worker):
                    new[ids] = upd
                _guard_finite(new, f"{label} parameters (mode {mode})")
                rows[mode] = new

        run_rows(factors, cfg.lambda1, "factor")
        if cfg.bias_enabled:
            run_rows(biases, cfg.lambda2, "bias")
    finally:
        if pool is not None:
            pool.shutdown()
    return CpModel(tuple(factors), tuple(biases))


def _squared_row_norms(model):
    """Per-slice and per-bias-row squared norms, as (core_norms, bias_norms)."""
    if isinstance(model, TrModel):
        core_norms = [np.sum(c * c, axis=(0, 2)) for c in model.cores]
    else:
        core_norms = [np.sum(f * f, axis=1) for f in model.factors]
    bias_norms = [np.sum(b * b, axis=1) for b in model.biases]
    return core_norms, bias_norms


def objective(model, tensor, positions, cfg) -> float:
    """Penalized squared error summed over a subset of entries.

    Per entry: squared residual, plus lambda1 times the squared norms of
    the three slices it touches, plus lambda2 times the squared norms of
    the three bias rows it touches.
    """
    positions = np.asarray(positions, dtype=np.int64)
    if positions.size == 0:
        raise DomainError("objective over an empty subset")
    cell = tuple(c[positions] for c in tensor.coords)
    residual = tensor.values[positions] - model.predict_many(*cell)
    total = float(residual @ residual)
    core_norms, bias_norms = _squared_row_norms(model)
    for m in range(3):
        total += cfg.lambda1 * float(core_norms[m][cell[m]].sum())
        total += cfg.lambda2 * float(bias_norms[m][cell[m]].sum())
    return total


def _fit(model, step, tensor, sp, cfg, threads, on_epoch):
    plan = UpdatePlan(tensor, sp.train)
    stats = []
    best_model = model
    best_val = math.inf
    stop_ref = math.inf
    streak = 0
    for epoch in range(1, cfg.max_epochs + 1):
        started = time.perf_counter()
        try:
            model = step(model, tensor, sp.train, cfg, plan=plan, threads=threads)
        except NumericError as err:
            raise NumericError(f"epoch {epoch}: {err}", epoch=epoch) from err
        val_report = evaluate(model, tensor, sp.val)
        st = EpochStats(
            epoch=epoch,
            objective=objective(model, tensor, sp.train, cfg),
            train_rmse=evaluate(model, tensor, sp.train).rmse,
            val_rmse=val_report.rmse,
            val_mae=val_report.mae,
        )
        stats.append(st)
        if on_epoch is not None:
            on_epoch(st, time.perf_counter() - started)
        if st.val_rmse < best_val:
            best_val = st.val_rmse
            best_model = model
        # patience counts epochs without an improvement of at least min_delta
        if st.val_rmse < stop_ref - cfg.min_delta:
            stop_ref = st.val_rmse
            streak = 0
        else:
            streak += 1
            if cfg.patience > 0 and streak >= cfg.patience:
                break
    return best_model, stats


def _check_split(sp):
    if sp.train.size == 0:
        raise DomainError("training subset is empty")
    if sp.val.size == 0:
        raise DomainError("validation subset is empty")


def train(tensor, sp, cfg, threads=1, on_epoch=None):
    """Train a ring model on the train subset with validation-based stopping.

    Runs up to cfg.max_epochs epochs; with patience > 0, stops once the
    validation RMSE has gone `patience` consecutive epochs without
    improving by at least min_delta (patience=0 disables early stopping).
    Returns (best-validation-RMSE model snapshot, list of EpochStats).
    on_epoch, when given, is called after every epoch with
    (EpochStats, wall_seconds).
    """
    cfg.validate()
    _check_split(sp)
    model = init_model(tensor.dims, cfg.rank, cfg.seed, bias=cfg.bias_enabled)
    return _fit(model, epoch_update, tensor, sp, cfg, threads, on_epoch)


def train_cp_baseline(tensor, sp, cfg, threads=1, on_epoch=None):
    """Train the CP baseline under the identical harness as train()."""
    cfg.validate()
    _check_split(sp)
    model = init_cp_model(tensor.dims, cfg.rank, cfg.seed, bias=cfg.bias_enabled)
    return _fit(model, cp_epoch_update, tensor, sp, cfg, threads, on_epoch)
