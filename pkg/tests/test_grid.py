"""Tests for the real Fourier layout and its transforms.

Covers layout invariants (slot ordering, wavenumber wrapping), exact
orthonormality and round-trips of the FFT-backed transforms, frequency
selection, location-to-cell incidence, and zero padding.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from specdrift.grid import (
    build_incidence,
    build_wavenumber_grid,
    cell_coords,
    dense_basis_matrix,
    embed_padded,
    forward_transform,
    inverse_transform,
    select_frequencies,
)

from _oracles import naive_basis_matrix

# =============================================================================
# Layout
# =============================================================================


def test_slot_count_and_fixed_block():
    grid = build_wavenumber_grid(8)
    assert grid.n_slots == 64
    assert grid.n_wavenumbers == 64 // 2 + 2
    # the four cosine-only slots come first, in the pinned order
    fixed = grid.index[:4]
    expected = np.array([[0, 0], [0, 4], [4, 0], [4, 4]])
    assert np.array_equal(fixed, expected)
    assert not grid.slot_is_sin[:4].any()


def test_pairs_sorted_by_energy_then_lex():
    grid = build_wavenumber_grid(6)
    pairs = grid.index[4:]
    energies = (pairs**2).sum(axis=1)
    order = np.lexsort((pairs[:, 1], pairs[:, 0], energies))
    assert np.array_equal(order, np.arange(len(pairs)))


def test_wavenumbers_within_frequency_range():
    for n in (4, 6, 10):
        grid = build_wavenumber_grid(n)
        assert grid.index.min() >= -(n // 2 - 1)
        assert grid.index.max() <= n // 2


def test_pair_slots_interleave_cos_sin():
    grid = build_wavenumber_grid(4)
    assert not grid.slot_is_sin[4::2].any()
    assert grid.slot_is_sin[5::2].all()
    # both slots of a pair share the wavenumber
    assert np.array_equal(grid.slot_k[4::2], grid.slot_k[5::2])


def test_odd_or_small_n_rejected():
    with pytest.raises(ValueError):
        build_wavenumber_grid(5)
    with pytest.raises(ValueError):
        build_wavenumber_grid(2)


# =============================================================================
# Transforms
# =============================================================================


def test_basis_matrix_is_orthonormal():
    for n in (4, 8):
        grid = build_wavenumber_grid(n)
        basis = dense_basis_matrix(grid)
        gram = basis.T @ basis
        assert np.allclose(gram, np.eye(grid.n_slots), atol=1e-12)


def test_dense_basis_matches_naive_loops():
    grid = build_wavenumber_grid(6)
    assert np.allclose(dense_basis_matrix(grid), naive_basis_matrix(grid), atol=1e-12)


def test_forward_equals_basis_transpose():
    rng = np.random.default_rng(11)
    grid = build_wavenumber_grid(8)
    x = rng.standard_normal(64)
    basis = dense_basis_matrix(grid)
    assert np.allclose(forward_transform(grid, x), basis.T @ x, atol=1e-12)


def test_round_trip_identity():
    rng = np.random.default_rng(7)
    grid = build_wavenumber_grid(10)
    x = rng.standard_normal((3, 100))
    back = inverse_transform(grid, forward_transform(grid, x))
    assert np.allclose(back, x, atol=1e-12)


def test_constant_field_hits_slot_zero_only():
    grid = build_wavenumber_grid(8)
    coeffs = forward_transform(grid, np.full(64, 3.25))
    assert coeffs[0] == pytest.approx(3.25 * 8)  # scale 1/n on the mean slot
    assert np.allclose(coeffs[1:], 0.0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(
    st.integers(min_value=2, max_value=6).map(lambda k: 2 * k),
    st.integers(min_value=0, max_value=2**32 - 1),
)
def test_transform_preserves_energy(n, seed):
    # Parseval: orthonormal change of basis keeps the 2-norm
    rng = np.random.default_rng(seed)
    grid = build_wavenumber_grid(n)
    x = rng.standard_normal(n * n)
    coeffs = forward_transform(grid, x)
    assert np.linalg.norm(coeffs) == pytest.approx(np.linalg.norm(x), rel=1e-10)


def test_batched_transform_matches_loop():
    rng = np.random.default_rng(3)
    grid = build_wavenumber_grid(6)
    batch = rng.standard_normal((5, 36))
    stacked = forward_transform(grid, batch)
    for i in range(5):
        assert np.allclose(stacked[i], forward_transform(grid, batch[i]))


# =============================================================================
# Frequency selection
# =============================================================================


def test_selection_rounds_odd_counts_up():
    grid = build_wavenumber_grid(20)
    sel = select_frequencies(grid, 29)
    assert sel.kept_size == 30
    assert sel.requested == 29


def test_selection_example_sizes():
    # 54 slots = 4 cosine-only + 25 pairs = 29 distinct wavenumbers
    grid = build_wavenumber_grid(200)
    sel = select_frequencies(grid, 54)
    assert sel.kept_size == 54
    assert sel.n_wavenumbers == 29


def test_selection_keeps_lowest_energy_pairs():
    # the four cosine-only slots are always kept; among pairs the kept set
    # is the low-|k|^2 prefix
    grid = build_wavenumber_grid(8)
    sel = select_frequencies(grid, 10)
    kept_e = (grid.slot_k[sel.slots[4:]] ** 2).sum(axis=1)
    dropped_e = (grid.slot_k[sel.kept_size:] ** 2).sum(axis=1)
    assert kept_e.max() <= dropped_e.min() + 1e-9


def test_selection_range_errors():
    grid = build_wavenumber_grid(4)
    with pytest.raises(ValueError, match="feasible sizes"):
        select_frequencies(grid, 3)
    with pytest.raises(ValueError, match="feasible sizes"):
        select_frequencies(grid, 17)
    full = select_frequencies(grid, 16)
    assert full.kept_size == 16


# =============================================================================
# Incidence and padding
# =============================================================================


def test_incidence_maps_cell_centers_to_themselves():
    grid = build_wavenumber_grid(8)
    coords = cell_coords(8)
    inc = build_incidence(coords, grid)
    assert np.array_equal(inc.cell_indices, np.arange(64))


def test_incidence_wraps_periodically():
    grid = build_wavenumber_grid(4)
    # just past the right/top edge lands back in column/row 0
    inc = build_incidence(np.array([[0.999, 0.0], [0.0, 0.999]]), grid)
    near_origin = build_incidence(np.array([[0.0, 0.0]]), grid).cell_indices[0]
    assert inc.cell_indices[0] == near_origin
    assert inc.cell_indices[1] == near_origin


def test_incidence_apply_picks_columns():
    rng = np.random.default_rng(5)
    grid = build_wavenumber_grid(4)
    locs = rng.uniform(0, 1, size=(7, 2))
    inc = build_incidence(locs, grid)
    fields = rng.standard_normal((3, 16))
    assert np.array_equal(inc.apply(fields), fields[:, inc.cell_indices])


def test_embed_padded_grows_and_preserves_corner():
    rng = np.random.default_rng(9)
    field = rng.standard_normal((6, 4))
    padded = embed_padded(field, 2)
    assert padded.shape == (12, 12)
    assert np.array_equal(padded[:6, :4], field)
    assert np.count_nonzero(padded) == field.size


def test_embed_padded_rejects_bad_factor():
    with pytest.raises(ValueError):
        embed_padded(np.zeros((4, 4)), 0)
