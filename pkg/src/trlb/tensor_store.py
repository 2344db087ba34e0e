"""Sparse storage, indexing, and 7:1:2 splitting of observed network weights.

An observation is a directed edge weight: source node i, target node j,
time slot k, weight y >= 0.  Observations are kept in coordinate form,
canonically sorted by (i, j, k), with per-mode slice indices so that all
entries touching a given node or time slot can be fetched in O(1).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ParseError

# Mode numbering used throughout: 0 = source node (i), 1 = target node (j),
# 2 = time slot (k).
MODE_NAMES = ("i", "j", "k")


@dataclass(frozen=True)
class Entry:
    """A single observed weight at cell (i, j, k)."""

    i: int
    j: int
    k: int
    y: float


class SparseTensor:
    """Immutable coordinate-format collection of observed entries.

    Attributes:
        dims: (|I|, |J|, |K|) mode sizes.
        coords: tuple of three int64 arrays (i-, j-, k-coordinates), one
            element per entry, sorted lexicographically by (i, j, k).
        values: float64 array of weights, aligned with coords.
        slice_index: per mode, a list with one positions-array per index;
            slice_index[0][i] holds the entry positions whose i-coordinate
            is exactly i.
    """

    def __init__(self, coords, values, dims):
        ii, jj, kk = (np.asarray(c, dtype=np.int64) for c in coords)
        yy = np.asarray(values, dtype=np.float64)
        if not (ii.shape == jj.shape == kk.shape == yy.shape) or ii.ndim != 1:
            raise DomainError("coordinate and value arrays must be 1-D and aligned")
        dims = tuple(int(d) for d in dims)
        if len(dims) != 3 or any(d < 1 for d in dims):
            raise DomainError(f"dims must be three positive sizes, got {dims}")
        if yy.size == 0:
            raise DomainError("a sparse tensor must contain at least one entry")
        if np.any(yy < 0.0) or not np.all(np.isfinite(yy)):
            raise DomainError("weights must be finite and non-negative")
        for mode, cc in enumerate((ii, jj, kk)):
            if np.any(cc < 0) or np.any(cc >= dims[mode]):
                raise DomainError(
                    f"{MODE_NAMES[mode]}-coordinates must lie in [0, {dims[mode]})"
                )

        order = np.lexsort((kk, jj, ii))
        ii, jj, kk, yy = ii[order], jj[order], kk[order], yy[order]
        flat = (ii * dims[1] + jj) * dims[2] + kk
        if flat.size > 1 and np.any(np.diff(flat) == 0):
            raise DomainError("duplicate (i, j, k) cells are not allowed")

        self.dims = dims
        self.coords = (ii, jj, kk)
        self.values = yy
        self.slice_index = tuple(
            _group_positions(cc, dims[mode]) for mode, cc in enumerate(self.coords)
        )
        for arr in (*self.coords, self.values):
            arr.flags.writeable = False

    @property
    def n_entries(self) -> int:
        return int(self.values.size)

    def entry(self, position: int) -> Entry:
        ii, jj, kk = self.coords
        return Entry(int(ii[position]), int(jj[position]), int(kk[position]),
                     float(self.values[position]))

    def entries(self):
        return [self.entry(p) for p in range(self.n_entries)]


def _group_positions(cc, size):
    """List of position arrays, one per index value in [0, size)."""
    order = np.argsort(cc, kind="stable").astype(np.int64)
    counts = np.bincount(cc, minlength=size)
    return np.split(order, np.cumsum(counts)[:-1])


def from_cells(coords, values, dims=None, average_duplicates=False):
    """Build a SparseTensor from raw coordinate arrays.

    dims defaults to (max i + 1, max j + 1, max k + 1).  With
    average_duplicates, repeated (i, j, k) cells collapse to the mean of
    their weights; otherwise duplicates are an error.
    """
    ii, jj, kk = (np.asarray(c, dtype=np.int64) for c in coords)
    yy = np.asarray(values, dtype=np.float64)
    if yy.size == 0:
        raise DomainError("no entries given")
    if dims is None:
        if np.any(ii < 0) or np.any(jj < 0) or np.any(kk < 0):
            raise DomainError("coordinates must be non-negative")
        dims = (int(ii.max()) + 1, int(jj.max()) + 1, int(kk.max()) + 1)
    if average_duplicates:
        flat = (ii * dims[1] + jj) * dims[2] + kk
        uniq, inverse = np.unique(flat, return_inverse=True)
        if uniq.size != flat.size:
            sums = np.bincount(inverse, weights=yy)
            counts = np.bincount(inverse)
            yy = sums / counts
            kk = uniq % dims[2]
            jj = (uniq // dims[2]) % dims[1]
            ii = uniq // (dims[1] * dims[2])
    return SparseTensor((ii, jj, kk), yy, dims)


def _split_fields(line, fmt):
    if fmt == "csv":
        return [f.strip() for f in line.split(",")]
    return line.split()


def load_entries(path, fmt="tsv", dims=None, remap=False):
    """Load observations from a text file, one `i j k weight` line each.

    Lines starting with `#` and blank lines are skipped.  fmt selects the
    separator: "tsv" for whitespace, "csv" for commas.  Duplicate cells are
    averaged.  With remap=True, raw ids per mode are compacted to dense
    0-based indices and the mapping is written to `<path>.idmap`.
    """
    if fmt not in ("tsv", "csv"):
        raise DomainError(f"unknown format {fmt!r}, expected 'tsv' or 'csv'")
    raw = [[], [], []]
    weights = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = _split_fields(line, fmt)
            if len(fields) != 4:
                raise ParseError(f"{path}: line {lineno}: expected 4 fields, got {len(fields)}")
            try:
                cell = [int(fields[m]) for m in range(3)]
                y = float(fields[3])
            except ValueError as exc:
                raise ParseError(f"{path}: line {lineno}: {exc}") from None
            if any(c < 0 for c in cell):
                raise DomainError(f"{path}: line {lineno}: negative index")
            if not np.isfinite(y) or y < 0.0:
                raise DomainError(f"{path}: line {lineno}: weight must be finite and >= 0")
            for m in range(3):
                raw[m].append(cell[m])
            weights.append(y)
    if not weights:
        raise DomainError(f"{path}: no data lines")

    cols = [np.asarray(c, dtype=np.int64) for c in raw]
    if remap:
        maps = []
        for m in range(3):
            uniq, dense = np.unique(cols[m], return_inverse=True)
            maps.append(uniq)
            cols[m] = dense.astype(np.int64)
        with open(f"{path}.idmap", "w", encoding="utf-8") as fh:
            fh.write("# mode original compact\n")
            for m, uniq in enumerate(maps):
                for compact, original in enumerate(uniq):
                    fh.write(f"{MODE_NAMES[m]} {original} {compact}\n")
    return from_cells(cols, weights, dims=dims, average_duplicates=True)


def write_entries(tensor, path, fmt="tsv", header=()):
    """Write a tensor in the text format understood by load_entries.

    Extra header strings are emitted as comment lines, so callers can
    echo provenance (seeds, generator settings) into the file.
    """
    sep = "," if fmt == "csv" else " "
    ii, jj, kk = tensor.coords
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# dims{sep}{tensor.dims[0]}{sep}{tensor.dims[1]}{sep}{tensor.dims[2]}\n")
        for line in header:
            fh.write(f"# {line}\n")
        for p in range(tensor.n_entries):
            y = float(tensor.values[p])
            fh.write(f"{ii[p]}{sep}{jj[p]}{sep}{kk[p]}{sep}{y!r}\n")


@dataclass(frozen=True)
class Split:
    """Disjoint exhaustive partition of entry positions, ratio ~7:1:2.

    train gets floor(0.7 n) positions, val floor(0.1 n), and the remainder
    goes to test.  Position arrays are sorted ascending.
    """

    train: np.ndarray
    val: np.ndarray
    test: np.ndarray
    seed: int
    n_entries: int

    def subset(self, name):
        try:
            return {"train": self.train, "val": self.val, "test": self.test}[name]
        except KeyError:
            raise DomainError(f"unknown subset {name!r}") from None


def split(tensor, seed):
    """Randomly partition entry positions into train/val/test at 7:1:2."""
    n = tensor.n_entries
    if n < 10:
        raise DomainError(f"need at least 10 entries to split, got {n}")
    rng = np.random.default_rng(seed)
    perm = rng.permutation(n)
    # integer floors of 0.7n and 0.1n (float multiplication can undershoot)
    n_train = 7 * n // 10
    n_val = n // 10
    return Split(
        train=np.sort(perm[:n_train]),
        val=np.sort(perm[n_train:n_train + n_val]),
        test=np.sort(perm[n_train + n_val:]),
        seed=int(seed),
        n_entries=n,
    )


def slice_entries(tensor, mode, index):
    """Positions of all entries whose mode-coordinate equals index."""
    if mode not in (0, 1, 2):
        raise DomainError(f"mode must be 0 (i), 1 (j) or 2 (k), got {mode}")
    if not 0 <= index < tensor.dims[mode]:
        raise DomainError(
            f"index {index} out of bounds for mode {MODE_NAMES[mode]} "
            f"of size {tensor.dims[mode]}"
        )
    return tensor.slice_index[mode][index]


def write_split_manifest(sp, path):
    """Write a replayable manifest: seed, counts, and position labels."""
    labels = np.empty(sp.n_entries, dtype="U5")
    labels[sp.train] = "train"
    labels[sp.val] = "val"
    labels[sp.test] = "test"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# seed {sp.seed}\n")
        fh.write(f"# entries {sp.n_entries}\n")
        fh.write(f"# counts train={sp.train.size} val={sp.val.size} test={sp.test.size}\n")
        for pos in range(sp.n_entries):
            fh.write(f"{pos} {labels[pos]}\n")


def read_split_manifest(path):
    """Parse a manifest written by write_split_manifest back into a Split."""
    seed = None
    buckets = {"train": [], "val": [], "test": []}
    n_seen = 0
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                fields = line[1:].split()
                if len(fields) == 2 and fields[0] == "seed":
                    seed = int(fields[1])
                continue
            fields = line.split()
            if len(fields) != 2 or fields[1] not in buckets:
                raise ParseError(f"{path}: line {lineno}: expected '<position> <train|val|test>'")
            try:
                pos = int(fields[0])
            except ValueError:
                raise ParseError(f"{path}: line {lineno}: bad position {fields[0]!r}") from None
            buckets[fields[1]].append(pos)
            n_seen += 1
    if n_seen == 0:
        raise DomainError(f"{path}: empty manifest")
    if seed is None:
        raise ParseError(f"{path}: missing '# seed' header")
    sp = Split(
        train=np.sort(np.asarray(buckets["train"], dtype=np.int64)),
        val=np.sort(np.asarray(buckets["val"], dtype=np.int64)),
        test=np.sort(np.asarray(buckets["test"], dtype=np.int64)),
        seed=seed,
        n_entries=n_seen,
    )
    covered = np.concatenate([sp.train, sp.val, sp.test])
    if not np.array_equal(np.sort(covered), np.arange(n_seen)):
        raise DomainError(f"{path}: positions do not cover 0..{n_seen - 1} exactly once")
    return sp
