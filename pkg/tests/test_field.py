"""Tests for grids, fields, Pauli matrices and discrete norms."""

import itertools

import numpy as np
import pytest

from manakov_solver.analytic import SolitonParams, soliton_field
from manakov_solver.field import (
    Field,
    Grid1D,
    discrete_h1_norm,
    discrete_l2_mass,
    inner_product,
    noise_matrix,
    pauli,
)


def random_field(grid: Grid1D, seed: int = 0) -> Field:
    rng = np.random.default_rng(seed)
    m = grid.interior_points
    return Field.from_interior(grid, rng.normal(size=(m, 2)) + 1j * rng.normal(size=(m, 2)))


class TestGrid1D:
    """Tests for the uniform grid."""

    def test_spacing_and_nodes(self) -> None:
        """Test dx = 2a/(M+1) and nodes spanning [-a, a]."""
        grid = Grid1D(half_width=30.0, interior_points=512)
        assert grid.dx == pytest.approx(60.0 / 513)
        assert grid.n_nodes == 514
        assert grid.nodes[0] == -30.0
        assert grid.nodes[-1] == pytest.approx(30.0)
        assert len(grid.interior_nodes) == 512

    def test_invalid_half_width(self) -> None:
        """Test nonpositive half width is rejected."""
        with pytest.raises(ValueError):
            Grid1D(half_width=0.0, interior_points=10)

    def test_too_few_points(self) -> None:
        """Test fewer than two interior points is rejected."""
        with pytest.raises(ValueError):
            Grid1D(half_width=1.0, interior_points=1)


class TestField:
    """Tests for the Field container."""

    def test_boundaries_are_zero(self) -> None:
        """Test from_interior pads the Dirichlet nodes with zeros."""
        grid = Grid1D(1.0, 5)
        f = Field.from_interior(grid, np.ones((5, 2)))
        assert np.all(f.values[0] == 0)
        assert np.all(f.values[-1] == 0)

    def test_nonzero_boundary_rejected(self) -> None:
        """Test a nonzero boundary value raises."""
        grid = Grid1D(1.0, 3)
        values = np.zeros((5, 2), dtype=complex)
        values[0, 1] = 1e-300
        with pytest.raises(ValueError):
            Field(grid, values)

    def test_wrong_shape_rejected(self) -> None:
        """Test values must match the grid length."""
        with pytest.raises(ValueError):
            Field(Grid1D(1.0, 3), np.zeros((4, 2)))

    def test_values_are_read_only(self) -> None:
        """Test fields are immutable once built."""
        f = Field.zeros(Grid1D(1.0, 3))
        with pytest.raises(ValueError):
            f.values[1, 0] = 1.0

    def test_arithmetic_keeps_boundaries(self) -> None:
        """Test sums and scalar products keep Dirichlet zeros."""
        grid = Grid1D(2.0, 16)
        u, v = random_field(grid, 1), random_field(grid, 2)
        w = 2j * (u - v) + v
        assert np.all(w.values[[0, -1]] == 0)
        np.testing.assert_allclose(w.interior, 2j * (u.interior - v.interior) + v.interior)

    def test_mismatched_grids(self) -> None:
        """Test arithmetic across grids raises."""
        with pytest.raises(ValueError):
            Field.zeros(Grid1D(1.0, 3)) + Field.zeros(Grid1D(1.0, 4))

    def test_save_csv(self, tmp_path) -> None:
        """Test snapshot CSV layout."""
        grid = Grid1D(1.0, 4)
        path = random_field(grid).save_csv(tmp_path / "snap.csv")
        lines = path.read_text().splitlines()
        assert lines[0] == "x,re_x1,im_x1,re_x2,im_x2"
        assert len(lines) == grid.n_nodes + 1
        assert lines[1].split(",")[1:] == ["0", "0", "0", "0"]


class TestPauli:
    """Tests for the Pauli algebra."""

    def test_sigma3_entries(self) -> None:
        """Test sigma_3 = diag(1, -1)."""
        np.testing.assert_array_equal(pauli(3).entries, [[1, 0], [0, -1]])

    def test_commutation_example(self) -> None:
        """Test sigma_1 sigma_2 = i sigma_3."""
        assert np.array_equal(pauli(1) @ pauli(2), 1j * pauli(3).entries)

    def test_all_products(self) -> None:
        """Test sigma_j sigma_k = delta_jk I + i eps_jkl sigma_l exactly."""
        eye = np.eye(2)
        for j, k in itertools.product((1, 2, 3), repeat=2):
            expected = eye * (j == k)
            for m in (1, 2, 3):
                eps = np.sign((k - j) * (m - j) * (m - k)) if len({j, k, m}) == 3 else 0
                expected = expected + 1j * eps * pauli(m).entries
            assert np.array_equal(pauli(j) @ pauli(k), expected), (j, k)

    def test_anticommutation(self) -> None:
        """Test sigma_j sigma_k + sigma_k sigma_j = 2 delta_jk I."""
        for j, k in itertools.product((1, 2, 3), repeat=2):
            anti = pauli(j) @ pauli(k) + pauli(k) @ pauli(j)
            assert np.array_equal(anti, 2 * (j == k) * np.eye(2))

    def test_hermitian(self) -> None:
        """Test every Pauli matrix is Hermitian."""
        for k in (1, 2, 3):
            entries = pauli(k).entries
            assert np.array_equal(entries, entries.conj().T)

    def test_invalid_index(self) -> None:
        """Test indices outside 1..3 are rejected."""
        for k in (0, 4, -1):
            with pytest.raises(ValueError):
                pauli(k)

    def test_noise_matrix_squares_to_norm(self) -> None:
        """Test (sum sigma_k chi_k)^2 = |chi|^2 I."""
        chi = (0.3, -1.2, 0.7)
        s = noise_matrix(chi)
        np.testing.assert_allclose(s @ s, sum(c * c for c in chi) * np.eye(2), atol=1e-15)


class TestNorms:
    """Tests for discrete mass and H1 norm."""

    def test_zero_field(self) -> None:
        """Test zero field has zero norms."""
        f = Field.zeros(Grid1D(1.0, 8))
        assert discrete_l2_mass(f) == 0.0
        assert discrete_h1_norm(f) == 0.0

    def test_single_node(self) -> None:
        """Test one unit value gives mass dx."""
        grid = Grid1D(1.0, 9)
        interior = np.zeros((9, 2))
        interior[4, 0] = 1.0
        assert discrete_l2_mass(Field.from_interior(grid, interior)) == pytest.approx(grid.dx)

    def test_phase_invariance(self) -> None:
        """Test mass is unchanged by a unit complex scalar."""
        f = random_field(Grid1D(3.0, 64))
        rotated = np.exp(0.7j) * f
        assert discrete_l2_mass(rotated) == pytest.approx(discrete_l2_mass(f), rel=1e-14)

    def test_soliton_mass(self) -> None:
        """Test the soliton mass is close to 2 eta on a fine grid."""
        f = soliton_field(0.0, Grid1D(30.0, 4000), SolitonParams(eta=0.5))
        assert discrete_l2_mass(f) == pytest.approx(1.0, rel=1e-6)

    def test_h1_linear_ramp(self) -> None:
        """Test H1 norm of a ramp against direct summation."""
        m = 6
        grid = Grid1D(1.0, m)
        ramp = np.zeros((m, 2))
        ramp[:, 0] = np.arange(1, m + 1)
        f = Field.from_interior(grid, ramp)
        mass = grid.dx * np.sum(np.arange(1, m + 1) ** 2)
        gradient = (m + m**2) / grid.dx
        assert discrete_h1_norm(f) == pytest.approx(np.sqrt(mass + gradient), rel=1e-14)

    def test_h1_dominates_l2(self) -> None:
        """Test H1 norm is at least the L2 norm."""
        for seed in range(5):
            f = random_field(Grid1D(2.0, 32), seed)
            assert discrete_h1_norm(f) >= np.sqrt(discrete_l2_mass(f))

    def test_inner_product_matches_mass(self) -> None:
        """Test <u, u> = mass(u)."""
        f = random_field(Grid1D(2.0, 32))
        assert inner_product(f, f).real == pytest.approx(discrete_l2_mass(f), rel=1e-14)
        assert inner_product(f, f).imag == pytest.approx(0.0, abs=1e-14)
