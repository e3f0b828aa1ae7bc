"""Real Fourier basis on the periodic unit square.

Fields live on a regular n x n grid over [0, 1)^2 (n even), cell centers at
s = (col/n, row/n) in row-major order, and are expanded in cosine/sine waves

    cos(k's),  sin(k's),      k = 2*pi*(i, j),

with integer frequencies -(n/2 - 1) <= i, j <= n/2.  Under the conjugate
symmetry of real fields the n^2 frequencies collapse to K = n^2/2 + 2
distinct wavenumbers: four self-conjugate ones

    (0, 0), (0, n*pi), (n*pi, 0), (n*pi, n*pi)

whose sine vanishes identically on the grid (cosine-only), and (K - 4)
cosine/sine pairs, one representative per {k, -k}.

Coefficient layout (length n^2): the four cosine-only amplitudes first, then
the pairs ordered by increasing |k|^2 (ties broken lexicographically on
(i, j)), each as adjacent (cos, sin) slots.  Columns are scaled 1/n
(cosine-only) and sqrt(2)/n (pairs) so that the basis matrix is orthonormal;
the forward transform is its transpose and both directions are computed with
FFTs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft

__all__ = [
    "WavenumberGrid",
    "FrequencySelection",
    "IncidenceMap",
    "build_wavenumber_grid",
    "forward_transform",
    "inverse_transform",
    "select_frequencies",
    "build_incidence",
    "embed_padded",
    "cell_coords",
    "dense_basis_matrix",
]

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class WavenumberGrid:
    """Wavenumber layout for an n x n grid; build with :func:`build_wavenumber_grid`.

    Attributes
    ----------
    n : int
        Grid side length (even, >= 4).
    index : (K, 2) int array
        Representative integer frequencies (i, j); rows 0..3 are the
        cosine-only ones, rows 4.. the pair representatives in slot order.
    k : (K, 2) float array
        Wavenumbers 2*pi*(i, j).
    slot_k : (n^2, 2) float array
        Wavenumber attached to each coefficient slot (pairs duplicated).
    slot_is_sin : (n^2,) bool array
        True on sine slots.
    slot_scale : (n^2,) float array
        Column normalization (1/n or sqrt(2)/n).
    """

    n: int
    index: np.ndarray
    k: np.ndarray
    slot_k: np.ndarray
    slot_is_sin: np.ndarray
    slot_scale: np.ndarray
    # FFT gather positions: (row, col) of each representative in an n x n
    # spectrum array, plus the conjugate mirror of each pair representative.
    _fft_pos_fixed: np.ndarray
    _fft_pos_pair: np.ndarray
    _fft_pos_pair_mirror: np.ndarray

    @property
    def n_slots(self) -> int:
        return self.n * self.n

    @property
    def n_wavenumbers(self) -> int:
        return self.index.shape[0]

    @property
    def n_pairs(self) -> int:
        return self.index.shape[0] - 4

    def slot_index(self, wavenumber_row: int) -> int:
        """First coefficient slot of the given `index` row."""
        if wavenumber_row < 4:
            return wavenumber_row
        return 4 + 2 * (wavenumber_row - 4)


def _wrap_index(x: np.ndarray, n: int) -> np.ndarray:
    """Map integers onto the canonical range -(n/2 - 1) .. n/2 (mod n)."""
    half = n // 2
    return (x + half - 1) % n - (half - 1)


def build_wavenumber_grid(n: int) -> WavenumberGrid:
    """Construct the coefficient layout for an n x n grid.

    Parameters
    ----------
    n : int
        Side length; must be even and at least 4.
    """
    if n != int(n) or n < 4 or n % 2:
        raise ValueError(f"grid side must be an even integer >= 4, got {n!r}")
    n = int(n)
    half = n // 2

    fixed = np.array([(0, 0), (0, half), (half, 0), (half, half)], dtype=np.int64)

    rng_vals = np.arange(-(half - 1), half + 1, dtype=np.int64)
    ii, jj = np.meshgrid(rng_vals, rng_vals, indexing="ij")
    pairs: set[tuple[int, int]] = set()
    for i, j in zip(ii.ravel(), jj.ravel()):
        if i in (0, half) and j in (0, half):
            continue
        mi = int(_wrap_index(np.int64(-i), n))
        mj = int(_wrap_index(np.int64(-j), n))
        pairs.add(max((int(i), int(j)), (mi, mj)))
    ordered = sorted(pairs, key=lambda t: (t[0] * t[0] + t[1] * t[1], t))
    index = np.vstack([fixed, np.array(ordered, dtype=np.int64)])

    k = TWO_PI * index.astype(float)
    n_pairs = index.shape[0] - 4

    slot_k = np.empty((n * n, 2))
    slot_k[:4] = k[:4]
    slot_k[4::2] = k[4:]
    slot_k[5::2] = k[4:]
    slot_is_sin = np.zeros(n * n, dtype=bool)
    slot_is_sin[5::2] = True
    slot_scale = np.full(n * n, np.sqrt(2.0) / n)
    slot_scale[:4] = 1.0 / n

    # Spectrum array positions: axis 0 (rows) carries j, axis 1 (cols) carries i.
    pos = np.stack([index[:, 1] % n, index[:, 0] % n], axis=1)
    mirror = np.stack([(-index[4:, 1]) % n, (-index[4:, 0]) % n], axis=1)

    return WavenumberGrid(
        n=n,
        index=index,
        k=k,
        slot_k=slot_k,
        slot_is_sin=slot_is_sin,
        slot_scale=slot_scale,
        _fft_pos_fixed=pos[:4],
        _fft_pos_pair=pos[4:],
        _fft_pos_pair_mirror=mirror,
    )


def cell_coords(n: int) -> np.ndarray:
    """Cell-center coordinates, shape (n^2, 2), row-major: s = (col/n, row/n)."""
    row, col = np.divmod(np.arange(n * n), n)
    return np.stack([col / n, row / n], axis=1)


def _check_field_shape(grid: WavenumberGrid, arr: np.ndarray, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.shape[-1] != grid.n_slots:
        raise ValueError(
            f"{what} last axis must have length n^2 = {grid.n_slots}, got {arr.shape}"
        )
    return arr


def forward_transform(grid: WavenumberGrid, field, workers: int = 1) -> np.ndarray:
    """Project field values onto the coefficient layout (transpose of the basis).

    `field` has shape (..., n^2); leading axes are batched through the FFT.
    """
    x = _check_field_shape(grid, field, "field")
    n = grid.n
    batch = x.shape[:-1]
    spec = scipy.fft.fft2(x.reshape(batch + (n, n)), workers=workers)

    coeffs = np.empty_like(x)
    fr, fc = grid._fft_pos_fixed[:, 0], grid._fft_pos_fixed[:, 1]
    pr, pc = grid._fft_pos_pair[:, 0], grid._fft_pos_pair[:, 1]
    coeffs[..., :4] = spec[..., fr, fc].real / n
    cpair = spec[..., pr, pc]
    scale = np.sqrt(2.0) / n
    coeffs[..., 4::2] = cpair.real * scale
    coeffs[..., 5::2] = cpair.imag * (-scale)
    return coeffs


def inverse_transform(grid: WavenumberGrid, coeffs, workers: int = 1) -> np.ndarray:
    """Evaluate the expansion on the grid: the exact inverse of :func:`forward_transform`."""
    a = _check_field_shape(grid, coeffs, "coeffs")
    n = grid.n
    batch = a.shape[:-1]
    spec = np.zeros(batch + (n, n), dtype=complex)

    fr, fc = grid._fft_pos_fixed[:, 0], grid._fft_pos_fixed[:, 1]
    pr, pc = grid._fft_pos_pair[:, 0], grid._fft_pos_pair[:, 1]
    mr, mc = grid._fft_pos_pair_mirror[:, 0], grid._fft_pos_pair_mirror[:, 1]
    spec[..., fr, fc] = a[..., :4] * n
    zp = (a[..., 4::2] - 1j * a[..., 5::2]) * (n / np.sqrt(2.0))
    spec[..., pr, pc] = zp
    spec[..., mr, mc] = zp.conj()

    field = scipy.fft.ifft2(spec, workers=workers).real
    return field.reshape(batch + (grid.n_slots,))


@dataclass(frozen=True)
class FrequencySelection:
    """A pair-complete, low-frequency-first subset of coefficient slots."""

    n: int
    requested: int
    slots: np.ndarray  # kept slot indices (a prefix of the layout)
    wavenumbers: np.ndarray  # (n_kept_wavenumbers, 2) integer frequencies

    @property
    def kept_size(self) -> int:
        return self.slots.size

    @property
    def n_wavenumbers(self) -> int:
        return self.wavenumbers.shape[0]


def select_frequencies(grid: WavenumberGrid, count: int) -> FrequencySelection:
    """Keep the four cosine-only slots plus whole low-|k|^2 pairs, >= `count` slots.

    Odd in-range counts are rounded up to the next pair boundary; the actual
    kept size is recorded on the selection.  Counts outside [4, n^2] raise,
    naming the nearest feasible sizes.
    """
    if count != int(count):
        raise ValueError(f"count must be an integer, got {count!r}")
    count = int(count)
    total = grid.n_slots
    if count < 4 or count > total:
        raise ValueError(
            f"count={count} is unreachable; feasible sizes are 4, 6, ..., {total}"
        )
    kept = 4 + 2 * ((count - 4 + 1) // 2)
    n_wave = 4 + (kept - 4) // 2
    return FrequencySelection(
        n=grid.n,
        requested=count,
        slots=np.arange(kept),
        wavenumbers=grid.index[:n_wave].copy(),
    )


@dataclass(frozen=True)
class IncidenceMap:
    """Assignment of point locations to grid cells (nearest center, periodic)."""

    n: int
    cell_indices: np.ndarray  # (m,) row-major cell index per location
    locations: np.ndarray  # (m, 2) the coordinates that were assigned

    @property
    def n_locations(self) -> int:
        return self.cell_indices.size

    def apply(self, fields) -> np.ndarray:
        """Restrict field values (..., n^2) to the assigned cells, (..., m)."""
        fields = np.asarray(fields)
        if fields.shape[-1] != self.n * self.n:
            raise ValueError(
                f"field last axis must be n^2 = {self.n * self.n}, got {fields.shape}"
            )
        return fields[..., self.cell_indices]


def build_incidence(locations, grid: WavenumberGrid) -> IncidenceMap:
    """Map locations in [0, 1]^2 to their nearest cell center.

    Distance is periodic (the domain is a torus); exact half-way ties go to
    the lower index on each axis.
    """
    loc = np.atleast_2d(np.asarray(locations, dtype=float))
    if loc.ndim != 2 or loc.shape[1] != 2:
        raise ValueError(f"locations must be (m, 2), got {loc.shape}")
    if not np.all(np.isfinite(loc)) or loc.min() < 0.0 or loc.max() > 1.0:
        raise ValueError("locations must be finite and inside [0, 1]^2")
    n = grid.n
    # round-half-down, then wrap onto the torus
    col = np.ceil(loc[:, 0] * n - 0.5).astype(np.int64) % n
    row = np.ceil(loc[:, 1] * n - 0.5).astype(np.int64) % n
    return IncidenceMap(n=n, cell_indices=row * n + col, locations=loc.copy())


def embed_padded(field, padding_factor: int) -> np.ndarray:
    """Embed an inner field into the low-index corner of an enlarged grid.

    The enlarged grid is square with side padding_factor * max(inner shape);
    cells outside the inner region are zero.  padding_factor=1 on a square
    field is the identity.
    """
    inner = np.asarray(field, dtype=float)
    if inner.ndim != 2:
        raise ValueError(f"field must be 2-D, got shape {inner.shape}")
    if padding_factor != int(padding_factor) or padding_factor < 1:
        raise ValueError(f"padding_factor must be an integer >= 1, got {padding_factor!r}")
    n_out = int(padding_factor) * max(inner.shape)
    if n_out % 2 or n_out < 4:
        raise ValueError(f"enlarged side must be even and >= 4, got {n_out}")
    out = np.zeros((n_out, n_out))
    out[: inner.shape[0], : inner.shape[1]] = inner
    return out


def dense_basis_matrix(grid: WavenumberGrid, slots=None, cells=None) -> np.ndarray:
    """Materialize basis columns: entry [l, j] = scaled cos/sin(k_j ' s_l).

    `slots` selects coefficient slots (default: all), `cells` grid cells
    (default: all).  With both defaults this is the full orthonormal matrix;
    it is meant for small systems (reduced bases, oracles), not production
    transforms.
    """
    slots = np.arange(grid.n_slots) if slots is None else np.asarray(slots, dtype=np.int64)
    cells = np.arange(grid.n_slots) if cells is None else np.asarray(cells, dtype=np.int64)
    coords = cell_coords(grid.n)[cells]
    phase = coords @ grid.slot_k[slots].T
    out = np.where(grid.slot_is_sin[slots], np.sin(phase), np.cos(phase))
    return out * grid.slot_scale[slots]
