import math

import numpy as np
import pytest

from ringsim.model import (
    GAMMA0,
    LAMBDA0,
    ConfigError,
    build_geometry,
    circular_inplane_polarization,
    coupling_matrices,
    effective_matrix,
    greens_scalar,
    impurity_only_geometry,
    inplane_pair_coupling,
    make_config,
)


def pairwise_distances(positions):
    diff = positions[:, None, :] - positions[None, :, :]
    return np.linalg.norm(diff, axis=-1)


class TestGeometry:
    def test_hexagon_radius_equals_spacing(self):
        geo = build_geometry(6, 13.7)
        assert geo.radius == pytest.approx(geo.spacing, rel=1e-14)

    def test_square_radius(self):
        # d = 1 corresponds to lambda_over_d = 2*pi
        geo = build_geometry(4, LAMBDA0 / 1.0)
        assert geo.spacing == pytest.approx(1.0, rel=1e-14)
        assert geo.radius == pytest.approx(1.0 / math.sqrt(2.0), rel=1e-14)

    def test_nonagon_dimensions(self):
        geo = build_geometry(9, 20.0)
        assert geo.spacing == pytest.approx(math.pi / 10.0, rel=1e-14)
        assert geo.radius == pytest.approx(
            geo.spacing / (2.0 * math.sin(math.pi / 9.0)), rel=1e-14)
        assert geo.radius == pytest.approx(0.45927, abs=5e-6)

    @pytest.mark.parametrize("n,lod", [(2, 4.0), (5, 9.3), (9, 20.0), (16, 55.0)])
    def test_positions_on_circle_with_correct_spacing(self, n, lod):
        geo = build_geometry(n, lod)
        radii = np.linalg.norm(geo.positions, axis=1)
        assert np.allclose(radii, geo.radius, rtol=1e-12)
        dist = pairwise_distances(geo.positions)
        nn = np.array([dist[i, (i + 1) % n] for i in range(n)])
        assert np.allclose(nn, geo.spacing, rtol=1e-12)

    def test_single_emitter_convention(self):
        geo = build_geometry(1, 10.0)
        assert geo.radius == pytest.approx(geo.spacing)
        assert np.linalg.norm(geo.positions[0]) == pytest.approx(geo.spacing)

    def test_rejects_bad_input(self):
        with pytest.raises(ConfigError):
            build_geometry(0, 10.0)
        with pytest.raises(ConfigError):
            build_geometry(4, float("nan"))
        with pytest.raises(ConfigError):
            build_geometry(4, -3.0)


class TestGreensScalar:
    def test_transverse_separation_drops_projection_term(self):
        p = circular_inplane_polarization()
        z = 0.73
        got = greens_scalar([0, 0, z], [0, 0, 0], p, p)
        x = z
        expected = 3 * GAMMA0 / (4 * x**3) * np.exp(1j * x) * (1 - 1j * x - x**2)
        assert got == pytest.approx(expected, rel=1e-14)

    def test_inplane_separation_reduces_to_closed_form(self):
        # (p* . rhat)(p . rhat) = 1/2 for any in-plane separation
        p = circular_inplane_polarization()
        for r in (0.2, 0.45927, 1.3, 7.0):
            got = greens_scalar([r, 0, 0], [0, 0, 0], p, p)
            assert got == pytest.approx(inplane_pair_coupling(r), rel=1e-14)

    def test_near_field_dissipative_coupling_saturates(self):
        # coplanar circular pair: Gamma_ij -> gamma0 as k0 r -> 0
        g = inplane_pair_coupling(1e-3)
        gamma_ij = -2.0 * g.imag
        assert abs(gamma_ij / GAMMA0 - 1.0) < 1e-4

    def test_symmetry_on_random_coplanar_pairs(self):
        rng = np.random.default_rng(7)
        p = circular_inplane_polarization()
        for _ in range(100):
            a = np.append(rng.uniform(-2, 2, size=2), 0.0)
            b = np.append(rng.uniform(-2, 2, size=2), 0.0)
            if np.linalg.norm(a - b) < 1e-6:
                continue
            assert greens_scalar(a, b, p, p) == pytest.approx(
                greens_scalar(b, a, p, p), rel=1e-14)

    def test_coincident_positions_rejected(self):
        p = circular_inplane_polarization()
        with pytest.raises(ValueError):
            greens_scalar([1, 0, 0], [1, 0, 0], p, p)


class TestCouplingMatrices:
    def test_symmetric_matrix(self):
        cm = coupling_matrices(make_config(2, 8.0))
        assert cm.g[0, 1] == cm.g[1, 0]
        assert np.array_equal(cm.g, cm.g.T)

    def test_reality_split(self):
        cm = coupling_matrices(make_config(7, 15.0, delta_I=0.4, gamma_I=2.0))
        assert np.array_equal(cm.j_part, cm.g.real)
        assert np.array_equal(cm.gamma_part, -2.0 * cm.g.imag)

    def test_diagonal_convention(self):
        cm = coupling_matrices(make_config(5, 12.0, delta_I=0.3, gamma_I=1.7,
                                           gamma_T=0.9))
        assert np.allclose(np.diag(cm.gamma_part)[:5], GAMMA0)
        assert np.diag(cm.gamma_part)[5] == pytest.approx(1.7)
        # gamma_T lives in the config, not in g
        assert cm.g[5, 5] == pytest.approx(-0.3 - 0.5j * 1.7)
        m = effective_matrix(cm, gamma_T=0.9)
        assert m[5, 5] == pytest.approx(-0.3 - 0.5j * (1.7 + 0.9))

    @pytest.mark.parametrize("n", range(2, 17))
    def test_dissipation_matrix_psd(self, n):
        for lod in (2.0, 5.0, 20.0, 60.0):
            cm = coupling_matrices(make_config(n, lod))
            evals = np.linalg.eigvalsh(cm.gamma_part)
            assert evals.min() >= -1e-10

    def test_impurity_column_matches_closed_form(self):
        cfg = make_config(9, 20.0)
        cm = coupling_matrices(cfg)
        expected = inplane_pair_coupling(cfg.geometry.radius)
        for i in range(9):
            assert cm.g[i, 9] == pytest.approx(expected, rel=1e-12)

    def test_impurity_scaling_sqrt_gamma_ratio(self):
        base = coupling_matrices(make_config(4, 10.0, gamma_I=1.0))
        scaled = coupling_matrices(make_config(4, 10.0, gamma_I=4.0))
        assert np.allclose(scaled.g[:4, 4], 2.0 * base.g[:4, 4], rtol=1e-13)
        assert np.allclose(scaled.g[:4, :4], base.g[:4, :4], rtol=1e-13)

    def test_rotational_invariance(self):
        cfg = make_config(9, 20.0)
        cm = coupling_matrices(cfg)
        phi = 0.6180339887
        rot = np.array([[math.cos(phi), -math.sin(phi), 0.0],
                        [math.sin(phi), math.cos(phi), 0.0],
                        [0.0, 0.0, 1.0]])
        geo = cfg.geometry
        rotated = type(geo)(n_ring=geo.n_ring, spacing=geo.spacing,
                            radius=geo.radius,
                            positions=geo.positions @ rot.T,
                            impurity_position=geo.impurity_position)
        cm_rot = coupling_matrices(type(cfg)(geometry=rotated,
                                             impurity=cfg.impurity,
                                             ring_polarization=cfg.ring_polarization))
        assert np.allclose(cm_rot.g, cm.g, atol=1e-12 * np.abs(cm.g).max())

    def test_impurity_only_config(self):
        cfg = make_config(0, 20.0, delta_I=0.2, gamma_I=1.5)
        cm = coupling_matrices(cfg)
        assert cm.g.shape == (1, 1)
        assert cm.g[0, 0] == pytest.approx(-0.2 - 0.75j)

    def test_impurity_only_geometry_helper(self):
        geo = impurity_only_geometry()
        assert geo.n_ring == 0
        assert geo.positions.shape == (0, 3)
