"""Unit tests for the dense statevector oracle."""

import itertools

import numpy as np
import pytest

from src.config import Config
from src.errors import (
    InvalidBasis,
    SingularInput,
    SiteAlreadyMeasured,
    TooManyQubits,
    ZeroProbabilityBranch,
)
from src.qmath import H, KET0, X, Z, d_matrix, operator_distance, rz
from src.statevec import (
    LatticeSpec,
    MeasurementBasis,
    PureState,
    TeleportRun,
    b_chain_spectra,
    b_diagonal,
    b_site_density,
    build_cluster,
    dump_amplitudes,
    expectation,
    extract_map,
    extract_teleported,
    fidelity,
    load_amplitudes,
    measure,
    reduced_density,
    schmidt_spectrum,
    spectrum_mismatch,
    stabilizer_residual,
    two_point,
    weighted_chain_spectra,
    weighted_graph_state,
)
from tests.conftest import n_operator


class TestLatticeSpec:
    """Tests for lattice construction."""

    def test_chain_edges(self):
        assert LatticeSpec.chain(4).edges == [(1, 2), (2, 3), (3, 4)]

    def test_ring_closes(self):
        assert (1, 5) in LatticeSpec.ring(5).edges

    def test_ring_needs_three_sites(self):
        with pytest.raises(ValueError):
            LatticeSpec.ring(2)

    def test_grid_is_row_major(self):
        grid = LatticeSpec.grid(2, 3)
        assert grid.n == 6
        assert (1, 2) in grid.edges
        assert (1, 4) in grid.edges
        assert grid.neighbors(5) == [2, 4, 6]

    def test_cubic_edge_count(self):
        assert len(LatticeSpec.cubic(2, 2, 2).edges) == 12

    def test_from_edges_rejects_self_loop(self):
        with pytest.raises(ValueError):
            LatticeSpec.from_edges(3, [(1, 1)])

    def test_with_ops_rejects_singular(self):
        with pytest.raises(SingularInput):
            LatticeSpec.chain(3).with_ops({2: np.diag([1.0, 0.0])})

    def test_with_ops_rejects_unknown_site(self):
        with pytest.raises(ValueError):
            LatticeSpec.chain(3).with_ops({7: H})


class TestBuildCluster:
    """Tests for build_cluster."""

    def test_stabilizers_hold(self):
        lattice = LatticeSpec.chain(4)
        state = build_cluster(lattice)
        for site in range(1, 5):
            assert stabilizer_residual(state, lattice, site) < 1e-12

    def test_grid_stabilizers_hold(self):
        lattice = LatticeSpec.grid(2, 3)
        state = build_cluster(lattice)
        assert max(stabilizer_residual(state, lattice, s) for s in range(1, 7)) < 1e-12

    def test_normalized(self):
        state = build_cluster(LatticeSpec.chain(3).with_ops({2: d_matrix(0.2, 5.0)}))
        assert np.isclose(state.norm, 1.0)

    def test_amplitude_budget(self, monkeypatch):
        monkeypatch.setattr(Config, "MAX_AMPLITUDES", 16)
        with pytest.raises(TooManyQubits):
            build_cluster(LatticeSpec.chain(5))

    def test_input_site_must_exist(self):
        with pytest.raises(ValueError):
            build_cluster(LatticeSpec.chain(3), input_state=KET0, input_site=9)


class TestMeasurementBasis:
    """Tests for MeasurementBasis."""

    def test_rejects_non_orthogonal(self):
        with pytest.raises(InvalidBasis):
            MeasurementBasis.from_vectors([1, 0], [1, 1])

    def test_xy_plane(self):
        basis = MeasurementBasis.xy(0.8)
        assert abs(np.vdot(basis.m, basis.m_perp)) < 1e-12
        assert basis.phi == np.pi / 2

    def test_bloch_poles(self):
        basis = MeasurementBasis.bloch(0.0, 0.3)
        assert np.allclose(basis.m, H @ KET0)

    def test_pauli_eigenvectors(self):
        for name, op in (("X", X), ("Z", Z)):
            basis = MeasurementBasis.pauli(name)
            assert np.allclose(op @ basis.m, basis.m)
            assert np.allclose(op @ basis.m_perp, -basis.m_perp)

    def test_unknown_pauli(self):
        with pytest.raises(ValueError):
            MeasurementBasis.pauli("W")


class TestMeasure:
    """Tests for single-site measurement."""

    def test_perfect_chain_outcomes_are_fair(self):
        """x-y measurements on a perfect chain give each outcome with probability 1/2."""
        state = build_cluster(LatticeSpec.chain(4))
        for site, xi in zip((1, 2, 3), (0.3, 1.2, 2.5)):
            result = measure(state, site, MeasurementBasis.xy(xi), outcome=1)
            assert np.isclose(result.probability, 0.5)
            state = result.state

    def test_sampling_uses_rng(self, rng):
        state = build_cluster(LatticeSpec.chain(3))
        result = measure(state, 1, MeasurementBasis.xy(0.4), rng=rng)
        assert result.outcome in (0, 1)
        assert 1 in result.state.measured

    def test_site_measured_twice(self):
        state = build_cluster(LatticeSpec.chain(3))
        state = measure(state, 2, MeasurementBasis.computational(), outcome=0).state
        with pytest.raises(SiteAlreadyMeasured):
            measure(state, 2, MeasurementBasis.computational(), outcome=0)

    def test_zero_probability_branch(self):
        state = build_cluster(LatticeSpec.chain(2), input_state=KET0)
        with pytest.raises(ZeroProbabilityBranch):
            measure(state, 1, MeasurementBasis.computational(), outcome=1)


class TestTeleportation:
    """Tests for tomographic map extraction."""

    @pytest.mark.parametrize("outcome", [0, 1])
    def test_xy_teleports_rotation(self, outcome):
        """Outcome m in the x-y basis at xi teleports X^m H Rz(xi)."""
        xi = 0.7
        run = TeleportRun(LatticeSpec.chain(2), (1,), (2,), ((1, MeasurementBasis.xy(xi), outcome),))
        expected = np.linalg.matrix_power(X, outcome) @ H @ rz(xi)
        assert operator_distance(extract_teleported(run), expected) < 1e-12

    def test_output_sites_must_be_unmeasured(self):
        run = TeleportRun(LatticeSpec.chain(3), (1,), (2,), ((1, MeasurementBasis.xy(0.0), 0),))
        with pytest.raises(ValueError):
            extract_teleported(run)

    def test_four_site_chain_composes(self):
        lattice = LatticeSpec.chain(4)
        angles = (0.2, 0.9, 1.4)
        for outcomes in itertools.product((0, 1), repeat=3):
            run = TeleportRun(
                lattice, (1,), (4,),
                tuple((s, MeasurementBasis.xy(a), m) for s, a, m in zip((1, 2, 3), angles, outcomes)),
            )
            expected = np.eye(2)
            for a, m in zip(angles, outcomes):
                expected = np.linalg.matrix_power(X, m) @ H @ rz(a) @ expected
            assert operator_distance(extract_teleported(run), expected) < 1e-10

    def test_two_wire_map(self):
        """Two independent wires teleport H on each logical qubit."""
        lattice = LatticeSpec.from_edges(4, [(1, 3), (2, 4)])
        basis = MeasurementBasis.xy(0.0)
        run = TeleportRun(lattice, (1, 2), (3, 4), ((1, basis, 0), (2, basis, 0)))
        assert operator_distance(extract_map(run), np.kron(H, H)) < 1e-12


class TestDensities:
    """Tests for reduced states and Schmidt spectra."""

    def test_n_site_schmidt_on_ring(self):
        theta = 0.35
        state = build_cluster(LatticeSpec.ring(4).with_ops({2: n_operator(theta, 0.8)}))
        assert np.allclose(schmidt_spectrum(state, [2]), [np.cos(theta), np.sin(theta)])

    def test_b_site_density_closed_form(self, rng):
        lattice = LatticeSpec.grid(2, 3)
        thetas = {1: 0.3, 3: 1.2, 5: 0.7}
        state = build_cluster(lattice.with_ops({s: b_diagonal(t) for s, t in thetas.items()}))
        for site in range(1, 7):
            assert np.allclose(reduced_density(state, [site]), b_site_density(lattice, thetas, site), atol=1e-10)

    def test_schmidt_needs_nontrivial_cut(self):
        with pytest.raises(ValueError):
            schmidt_spectrum(build_cluster(LatticeSpec.chain(3)), [1, 2, 3])

    def test_single_n_correlation(self):
        theta, gamma = 0.35, 0.8
        state = build_cluster(LatticeSpec.ring(8).with_ops({4: n_operator(theta, gamma)}))
        assert np.isclose(two_point(state, 3, "Z", 5, "Z"), np.cos(2 * theta) * np.cos(gamma))

    def test_perfect_cluster_has_no_z_correlation(self):
        state = build_cluster(LatticeSpec.chain(5))
        assert abs(two_point(state, 2, "Z", 4, "Z")) < 1e-12
        assert abs(expectation(state, {3: "Z"})) < 1e-12

    def test_two_point_needs_distinct_sites(self):
        with pytest.raises(ValueError):
            two_point(build_cluster(LatticeSpec.chain(3)), 2, "Z", 2, "Z")


class TestWeightedChains:
    """Tests for the weighted graph comparison."""

    def test_weighted_spectra_match_state(self):
        phi12, phi23 = 0.9, 2.3
        state = weighted_graph_state(3, [phi12, phi23])
        for site, (large, small) in zip((1, 2, 3), weighted_chain_spectra(phi12, phi23)):
            values = np.sort(np.linalg.eigvalsh(reduced_density(state, [site])))
            assert np.allclose(values, [small, large])

    def test_b_chain_spectra_match_state(self):
        theta = 0.4
        state = build_cluster(LatticeSpec.chain(3).with_ops({2: b_diagonal(theta)}))
        for site, (large, small) in zip((1, 2, 3), b_chain_spectra(theta)):
            values = np.sort(np.linalg.eigvalsh(reduced_density(state, [site])))
            assert np.allclose(values, [small, large])

    def test_pi_weights_are_a_cluster(self):
        state = weighted_graph_state(3, {(1, 2): np.pi, (2, 3): np.pi})
        assert np.isclose(fidelity(state, build_cluster(LatticeSpec.chain(3))), 1.0)

    def test_mismatch_is_positive(self):
        grid = np.linspace(0, 2 * np.pi, 40)
        assert min(spectrum_mismatch(0.4, a, b) for a in grid for b in grid) > 1e-3


class TestAmplitudeDump:
    """Tests for the debug amplitude files."""

    @pytest.mark.parametrize("fmt", ["bin", "csv"])
    def test_dump_and_load(self, tmp_path, fmt):
        state = build_cluster(LatticeSpec.chain(3).with_ops({2: n_operator(0.3, 0.5)}))
        path = dump_amplitudes(state, tmp_path / f"state.{fmt}", fmt=fmt)
        loaded = load_amplitudes(path)
        assert loaded.n == 3
        assert np.allclose(loaded.amps, state.amps)

    def test_binary_header(self, tmp_path):
        path = dump_amplitudes(PureState(1, [1, 0]), tmp_path / "s.bin", fmt="bin")
        assert path.read_bytes()[:4] == b"SVEC"

    def test_binary_dump_replaces_without_temp_files(self, tmp_path):
        path = tmp_path / "s.bin"
        path.write_bytes(b"stale contents that are longer than the new file")
        dump_amplitudes(PureState(1, [0, 1]), path, fmt="bin")
        raw = path.read_bytes()
        assert len(raw) == 4 + 4 + 2 * 16
        assert np.allclose(load_amplitudes(path).amps, [0, 1])
        assert not list(tmp_path.glob("*.tmp"))
