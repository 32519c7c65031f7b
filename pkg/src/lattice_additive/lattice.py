"""Lattice fields, neighbour schemes and regression-sample extraction.

Sites are addressed with 1-based ``(u, v)`` coordinates, ``u`` indexing rows
and ``v`` columns. Internally values live in a 0-based numpy array.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "LatticeField",
    "NeighborScheme",
    "RegressionSample",
    "CodingPartition",
    "FOUR_NEIGHBORS",
    "extract_samples",
    "checkerboard_coding",
    "read_csv_field",
    "write_csv_field",
    "read_pgm",
    "read_field",
]


class NoInteriorSitesError(ValueError):
    pass


@dataclass(frozen=True)
class LatticeField:
    """Real observations on an ``n_rows x n_cols`` rectangular grid."""

    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise ValueError("field values must be a non-empty 2-D array")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape

    def __getitem__(self, site):
        u, v = site
        return self.values[u - 1, v - 1]

    def window(self, u0: int, v0: int, rows: int, cols: int) -> "LatticeField":
        """Sub-field with top-left site ``(u0, v0)`` (1-based)."""
        if u0 < 1 or v0 < 1 or rows < 1 or cols < 1:
            raise ValueError("window origin and size must be positive")
        if u0 - 1 + rows > self.n_rows or v0 - 1 + cols > self.n_cols:
            raise ValueError(
                f"window {rows}x{cols} at ({u0},{v0}) exceeds field {self.shape}"
            )
        return LatticeField(self.values[u0 - 1:u0 - 1 + rows, v0 - 1:v0 - 1 + cols])

    def shifted(self, c: float) -> "LatticeField":
        return LatticeField(self.values + c)


@dataclass(frozen=True)
class NeighborScheme:
    """Ordered lattice offsets ``i_1, ..., i_d``; ``X(s)_j = Y(s - i_j)``."""

    offsets: tuple[tuple[int, int], ...]

    def __post_init__(self):
        offsets = tuple((int(du), int(dv)) for du, dv in self.offsets)
        if len(offsets) < 1:
            raise ValueError("a neighbour scheme needs at least one offset")
        if len(set(offsets)) != len(offsets):
            raise ValueError("neighbour offsets must be distinct")
        if (0, 0) in offsets:
            raise ValueError("offset (0, 0) is the site itself")
        object.__setattr__(self, "offsets", offsets)

    @property
    def d(self) -> int:
        return len(self.offsets)

    @classmethod
    def parse(cls, text: str) -> "NeighborScheme":
        """Parse ``"-1,0;0,-1;1,0;0,1"``."""
        pairs = []
        for chunk in text.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            parts = chunk.split(",")
            if len(parts) != 2:
                raise ValueError(f"cannot parse offset {chunk!r}")
            pairs.append((int(parts[0]), int(parts[1])))
        return cls(tuple(pairs))

    def format(self) -> str:
        return ";".join(f"{du},{dv}" for du, dv in self.offsets)


# North, west, south, east: X = (Y(u-1,v), Y(u,v-1), Y(u+1,v), Y(u,v+1)).
FOUR_NEIGHBORS = NeighborScheme(((1, 0), (0, 1), (-1, 0), (0, -1)))


@dataclass(frozen=True)
class RegressionSample:
    """Pairs ``(Y(s), X(s))`` over the sites with a complete neighbourhood."""

    responses: np.ndarray
    designs: np.ndarray
    sites: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.responses, dtype=float)
        x = np.asarray(self.designs, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        sites = np.asarray(self.sites, dtype=int).reshape(-1, 2) if len(y) else np.zeros((0, 2), int)
        if not (len(y) == x.shape[0] == sites.shape[0]):
            raise ValueError("responses, designs and sites must have equal length")
        object.__setattr__(self, "responses", y)
        object.__setattr__(self, "designs", x)
        object.__setattr__(self, "sites", sites)

    @property
    def n(self) -> int:
        return len(self.responses)

    @property
    def d(self) -> int:
        return self.designs.shape[1]

    @classmethod
    def from_arrays(cls, designs, responses) -> "RegressionSample":
        """Sample without lattice provenance; sites are ``(k, 0)`` placeholders."""
        y = np.asarray(responses, dtype=float)
        return cls(y, designs, np.column_stack([np.arange(len(y)), np.zeros(len(y), int)]))

    def without(self, rows) -> "RegressionSample":
        keep = np.ones(self.n, dtype=bool)
        keep[rows] = False
        return RegressionSample(self.responses[keep], self.designs[keep], self.sites[keep])


@dataclass(frozen=True)
class CodingPartition:
    """Checkerboard split of interior sites into two non-adjacent codes."""

    code_a: np.ndarray
    code_b: np.ndarray


def _interior_mask(shape, offsets):
    n_rows, n_cols = shape
    mask = np.ones(shape, dtype=bool)
    for du, dv in offsets:
        # s - i must lie in the grid: 1 <= u - du <= n_rows
        if du > 0:
            mask[:du, :] = False
        elif du < 0:
            mask[n_rows + du:, :] = False
        if dv > 0:
            mask[:, :dv] = False
        elif dv < 0:
            mask[:, n_cols + dv:] = False
    return mask


def extract_samples(field: LatticeField, scheme: NeighborScheme) -> RegressionSample:
    """Regression pairs at every site whose full neighbourhood is observed.

    Rows come out in raster order (by ``u``, then ``v``). Sites missing any
    neighbour are dropped; there is no padding or wraparound.
    """
    mask = _interior_mask(field.shape, scheme.offsets)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise NoInteriorSitesError("no interior sites for this neighbour scheme")
    vals = field.values
    designs = np.column_stack([vals[rows - du, cols - dv] for du, dv in scheme.offsets])
    return RegressionSample(vals[rows, cols], designs, np.column_stack([rows + 1, cols + 1]))


def checkerboard_coding(field: LatticeField) -> CodingPartition:
    """Split the 4-neighbour interior by the parity of ``u + v``."""
    mask = _interior_mask(field.shape, FOUR_NEIGHBORS.offsets)
    rows, cols = np.nonzero(mask)
    if rows.size == 0:
        raise NoInteriorSitesError("no interior sites for the 4-neighbour scheme")
    sites = np.column_stack([rows + 1, cols + 1])
    even = (sites.sum(axis=1) % 2) == 0
    return CodingPartition(sites[even], sites[~even])


# --------------------------------------------------------------------------
# file formats

def read_csv_field(path) -> LatticeField:
    rows = []
    with open(path, newline="") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append([float(tok) for tok in line.split(",")])
    if not rows or len({len(r) for r in rows}) != 1:
        raise ValueError(f"{path}: rows must be non-empty and of equal length")
    return LatticeField(np.array(rows))


def write_csv_field(field: LatticeField, path) -> None:
    # repr() round-trips exactly
    with open(path, "w", newline="\n") as fh:
        for row in field.values:
            fh.write(",".join(repr(float(x)) for x in row) + "\n")


def _pgm_tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError("truncated PGM header")
        tokens.append(data[start:pos])
    return tokens, pos


def read_pgm(path) -> LatticeField:
    """Read a P2 (ASCII) or P5 (binary) greymap; intensities are kept verbatim."""
    data = Path(path).read_bytes()
    magic = data[:2]
    if magic not in (b"P2", b"P5"):
        raise ValueError(f"{path}: not a P2/P5 PGM file")
    (w, h, maxval), pos = _pgm_tokens(data, 3, 2)
    w, h, maxval = int(w), int(h), int(maxval)
    if not 0 < maxval <= 65535:
        raise ValueError(f"{path}: maxval {maxval} out of range")
    if magic == b"P2":
        tokens = data[pos:].split()
        if len(tokens) < w * h:
            raise ValueError(f"{path}: expected {w * h} pixels, found {len(tokens)}")
        pix = np.array([int(t) for t in tokens[:w * h]], dtype=float)
    else:
        pos += 1  # single whitespace after maxval
        dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
        raw = data[pos:pos + w * h * dtype.itemsize]
        if len(raw) < w * h * dtype.itemsize:
            raise ValueError(f"{path}: truncated raster")
        pix = np.frombuffer(raw, dtype=dtype).astype(float)
    return LatticeField(pix.reshape(h, w))


def read_field(path) -> LatticeField:
    """Dispatch on extension: ``.pgm`` images, anything else as CSV."""
    if str(path).lower().endswith(".pgm"):
        return read_pgm(path)
    return read_csv_field(path)
