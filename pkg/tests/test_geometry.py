import math

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from bihfusion.geometry import (
    DegenerateGeometry,
    DegenerateTorsion,
    LocalFrame,
    SE3Transform,
    apply_se3,
    build_local_frame,
    edge_rotation_angle,
    euler_angles,
    rot_y,
    rot_z,
    side_chain_torsions,
    spherical_coords,
    torsion_angle,
)

from oracles import dihedral_textbook

seeds = st.integers(0, 2**32 - 1)


def angle_diff(a, b):
    return abs(math.remainder(a - b, 2 * math.pi))


def random_triple(rng):
    while True:
        pts = rng.normal(scale=3.0, size=(3, 3))
        a, b = pts[2] - pts[1], pts[0] - pts[1]
        if np.linalg.norm(np.cross(a, b)) > 0.1 * np.linalg.norm(a) * np.linalg.norm(b):
            return pts


def random_frame(rng):
    n, ca, c = random_triple(rng)
    return build_local_frame(n, ca, c)


def moved_frame(f: LocalFrame, t: SE3Transform) -> LocalFrame:
    return LocalFrame(apply_se3(t, f.origin), f.axes @ t.rotation.T)


def check_frame(f: LocalFrame):
    e1, e2, e3 = f.axes
    np.testing.assert_allclose(f.axes @ f.axes.T, np.eye(3), atol=1e-10)
    np.testing.assert_allclose(np.cross(e1, e2), e3, atol=1e-10)


class TestSE3Transform:
    def test_rejects_non_rotation(self):
        with pytest.raises(ValueError):
            SE3Transform(np.diag([1.0, 1.0, -1.0]), np.zeros(3))
        with pytest.raises(ValueError):
            SE3Transform(2 * np.eye(3), np.zeros(3))

    def test_identity(self):
        p = np.random.default_rng(0).normal(size=(5, 3))
        assert np.array_equal(apply_se3(SE3Transform.identity(), p), p)

    def test_translation(self):
        t = SE3Transform(np.eye(3), np.array([1.0, 2.0, 3.0]))
        assert np.array_equal(apply_se3(t, np.zeros(3)), [1.0, 2.0, 3.0])

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_composition(self, seed):
        rng = np.random.default_rng(seed)
        t1, t2 = SE3Transform.random(rng), SE3Transform.random(rng)
        p = rng.normal(size=(4, 3))
        np.testing.assert_allclose(apply_se3(t2, apply_se3(t1, p)), apply_se3(t2.compose(t1), p),
                                   rtol=0, atol=1e-12 * 100)  # coordinates of magnitude ~1e2

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_random_is_proper(self, seed):
        t = SE3Transform.random(np.random.default_rng(seed))
        assert abs(np.linalg.det(t.rotation) - 1) < 1e-10


class TestLocalFrame:
    def test_axis_aligned(self):
        f = build_local_frame([0, 1, 0], [0, 0, 0], [1, 0, 0])
        np.testing.assert_array_equal(f.axes, np.eye(3))
        np.testing.assert_array_equal(f.origin, [0, 0, 0])

    @pytest.mark.parametrize("n", [[2, 0, 0], [-1, 0, 0], [0, 0, 0]])
    def test_degenerate(self, n):
        with pytest.raises(DegenerateGeometry):
            build_local_frame(n, [0, 0, 0], [1, 0, 0])

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_orthonormal_right_handed(self, seed):
        check_frame(random_frame(np.random.default_rng(seed)))

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_equivariant(self, seed):
        rng = np.random.default_rng(seed)
        pts = random_triple(rng)
        t = SE3Transform.random(rng)
        f = build_local_frame(*pts)
        g = build_local_frame(*apply_se3(t, pts))
        np.testing.assert_allclose(g.axes, f.axes @ t.rotation.T, atol=1e-10)
        np.testing.assert_allclose(g.origin, apply_se3(t, f.origin), atol=1e-10)


class TestSpherical:
    identity = LocalFrame(np.zeros(3), np.eye(3))

    def test_polar_axis(self):
        assert spherical_coords(self.identity, [0, 0, 5]) == (5.0, 0.0, 0.0)

    def test_three_four_five(self):
        d, th, ph = spherical_coords(self.identity, [3, 4, 0])
        assert d == 5.0 and th == pytest.approx(math.pi / 2, abs=1e-15)
        assert ph == math.atan2(4, 3)

    def test_coincident(self):
        assert spherical_coords(self.identity, [0, 0, 0]) == (0.0, 0.0, 0.0)

    def test_negative_axis(self):
        d, th, ph = spherical_coords(self.identity, [0, 0, -2])
        assert (d, th, ph) == (2.0, math.pi, 0.0)

    def test_phi_pi_not_minus_pi(self):
        _, _, ph = spherical_coords(self.identity, [-1.0, -0.0, 0.0])
        assert ph == math.pi

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_invariance_and_ranges(self, seed):
        rng = np.random.default_rng(seed)
        f = random_frame(rng)
        p = rng.normal(scale=5, size=3)
        t = SE3Transform.random(rng)
        a = spherical_coords(f, p)
        b = spherical_coords(moved_frame(f, t), apply_se3(t, p))
        assert abs(a[0] - b[0]) < 1e-9 and abs(a[1] - b[1]) < 1e-9 and angle_diff(a[2], b[2]) < 1e-9
        assert 0 <= a[1] <= math.pi and -math.pi < a[2] <= math.pi

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_reconstructs_point(self, seed):
        rng = np.random.default_rng(seed)
        f = random_frame(rng)
        p = rng.normal(scale=5, size=3)
        d, th, ph = spherical_coords(f, p)
        local = d * np.array([math.sin(th) * math.cos(ph), math.sin(th) * math.sin(ph), math.cos(th)])
        np.testing.assert_allclose(f.origin + local @ f.axes, p, atol=1e-12)


class TestTorsion:
    def test_cis(self):
        assert torsion_angle([0, 1, 0], [0, 0, 0], [1, 0, 0], [1, 1, 0]) == 0.0

    def test_trans(self):
        assert torsion_angle([0, 1, 0], [0, 0, 0], [1, 0, 0], [1, -1, 0]) == math.pi

    def test_collinear(self):
        with pytest.raises(DegenerateTorsion):
            torsion_angle([0, 0, 0], [1, 0, 0], [2, 0, 0], [2, 1, 0])
        with pytest.raises(DegenerateTorsion):
            torsion_angle([0, 1, 0], [0, 0, 0], [0, 0, 0], [1, 1, 0])

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_matches_projection_oracle(self, seed):
        rng = np.random.default_rng(seed)
        q = rng.normal(size=(4, 3))
        assert angle_diff(torsion_angle(*q), dihedral_textbook(*q)) < 1e-9

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_invariant_and_mirror_negates(self, seed):
        rng = np.random.default_rng(seed)
        q = rng.normal(size=(4, 3))
        t = SE3Transform.random(rng)
        a = torsion_angle(*q)
        assert angle_diff(a, torsion_angle(*apply_se3(t, q))) < 1e-9
        mirrored = q * np.array([-1.0, 1.0, 1.0])
        assert angle_diff(-a, torsion_angle(*mirrored)) < 1e-9
        assert -math.pi < a <= math.pi


class TestEdgeRotation:
    def test_pure_translation(self):
        f = LocalFrame(np.zeros(3), np.eye(3))
        g = LocalFrame(np.array([1.0, 2.0, 3.0]), np.eye(3))
        assert edge_rotation_angle(f, g) == 0.0

    def test_quarter_turn_about_edge(self):
        f = LocalFrame(np.zeros(3), np.eye(3))
        g = LocalFrame(np.array([0.0, 0.0, 4.0]), (rot_z(math.pi / 2) @ np.eye(3)).T)
        assert edge_rotation_angle(f, g) == pytest.approx(math.pi / 2, abs=1e-15)
        g_neg = LocalFrame(g.origin, (rot_z(-math.pi / 2)).T)
        assert edge_rotation_angle(f, g_neg) == pytest.approx(-math.pi / 2, abs=1e-15)

    def test_e1_along_edge(self):
        f = LocalFrame(np.zeros(3), np.eye(3))
        g = LocalFrame(np.array([3.0, 0.0, 0.0]), rot_z(0.7).T)
        assert edge_rotation_angle(f, g) == 0.0

    def test_coincident_origins(self):
        f = LocalFrame(np.zeros(3), np.eye(3))
        with pytest.raises(DegenerateGeometry):
            edge_rotation_angle(f, f)

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_invariant(self, seed):
        rng = np.random.default_rng(seed)
        f, g = random_frame(rng), random_frame(rng)
        assume(np.linalg.norm(f.origin - g.origin) > 1e-3)
        t = SE3Transform.random(rng)
        a = edge_rotation_angle(f, g)
        b = edge_rotation_angle(moved_frame(f, t), moved_frame(g, t))
        assert angle_diff(a, b) < 1e-9 and -math.pi < a <= math.pi


class TestEuler:
    def test_identity(self):
        f = LocalFrame(np.zeros(3), np.eye(3))
        assert euler_angles(f, f) == (0.0, 0.0, 0.0)

    @pytest.mark.parametrize("alpha", [0.3, -1.2, 2.9])
    def test_single_axis(self, alpha):
        f = LocalFrame(np.zeros(3), np.eye(3))
        g = LocalFrame(np.ones(3), rot_z(alpha).T)
        t1, t2, t3 = euler_angles(f, g)
        assert t1 == pytest.approx(alpha, abs=1e-15) and t2 == 0.0 and t3 == 0.0

    @settings(max_examples=100, deadline=None)
    @given(seeds)
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        f, g = random_frame(rng), random_frame(rng)
        t1, t2, t3 = euler_angles(f, g)
        rel = f.rotation.T @ g.rotation
        np.testing.assert_allclose(rot_z(t1) @ rot_y(t2) @ rot_z(t3), rel, atol=1e-9)
        assert all(-math.pi < a <= math.pi for a in (t1, t3)) and 0 <= t2 <= math.pi

    def test_gimbal_pi(self):
        f = LocalFrame(np.zeros(3), np.eye(3))
        rel = rot_z(0.4) @ rot_y(math.pi)
        g = LocalFrame(np.ones(3), rel.T)
        t1, t2, t3 = euler_angles(f, g)
        assert t3 == 0.0
        np.testing.assert_allclose(rot_z(t1) @ rot_y(t2) @ rot_z(t3), rel, atol=1e-12)

    @settings(max_examples=50, deadline=None)
    @given(seeds)
    def test_invariant(self, seed):
        rng = np.random.default_rng(seed)
        f, g = random_frame(rng), random_frame(rng)
        t = SE3Transform.random(rng)
        a = euler_angles(f, g)
        b = euler_angles(moved_frame(f, t), moved_frame(g, t))
        assert all(angle_diff(x, y) < 1e-9 for x, y in zip(a, b))


class TestSideChain:
    backbone = {"N": [1.458, 0, 0], "CA": [0, 0, 0], "C": [-0.55, 1.42, 0]}

    def test_glycine_masked(self):
        t = side_chain_torsions("G", self.backbone)
        assert not t.defined_mask.any() and np.isnan(t.chi).all()

    def test_alanine_masked(self):
        t = side_chain_torsions("A", {**self.backbone, "CB": [-0.5, -0.8, 1.2]})
        assert not t.defined_mask.any()

    def test_planar_chi1(self):
        atoms = {"N": [0, 1, 0], "CA": [0, 0, 0], "CB": [1, 0, 0], "OG": [1, 1, 0], "C": [0, 0, 1]}
        t = side_chain_torsions("S", atoms)
        assert t.chi[0] == 0.0
        assert t.defined_mask.tolist() == [True, False, False, False]
        assert np.isnan(t.chi[1:]).all()

    def test_missing_atom_masks(self):
        atoms = {"N": [0, 1, 0], "CA": [0, 0, 0], "CB": [1, 0, 0], "CG": [1, 1, 0]}
        t = side_chain_torsions("K", atoms)  # CD, CE, NZ absent
        assert t.defined_mask.tolist() == [True, False, False, False]

    def test_lysine_four(self):
        rng = np.random.default_rng(0)
        names = ["N", "CA", "CB", "CG", "CD", "CE", "NZ"]
        atoms = dict(zip(names, np.cumsum(rng.normal(size=(7, 3)), axis=0)))
        t = side_chain_torsions("K", atoms)
        assert t.defined_mask.all()
        quads = [names[k:k + 4] for k in range(4)]
        for k, q in enumerate(quads):
            assert angle_diff(t.chi[k], dihedral_textbook(*(atoms[n] for n in q))) < 1e-9

    def test_index_and_letter_agree(self):
        from bihfusion.constants import aa_index

        atoms = {"N": [0, 1, 0], "CA": [0, 0, 0], "CB": [1, 0, 0], "OG": [1, 0.5, 0.5]}
        a = side_chain_torsions("S", atoms)
        b = side_chain_torsions(aa_index("S"), atoms)
        assert np.array_equal(a.chi, b.chi, equal_nan=True)
