"""SE(3)-invariant geometry of residue frames.

All angles are radians. Signed angles are reported in (-pi, pi]; polar
angles in [0, pi]. The batched ``*_many`` helpers operate on stacked arrays
and back the graph featurizer; the scalar functions are thin wrappers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .constants import CHI_ATOMS, aa_letter

COLLINEAR_TOL = 1e-6
PROJECTION_TOL = 1e-9
GIMBAL_TOL = 1e-9


class DegenerateGeometry(ValueError):
    pass


class DegenerateTorsion(DegenerateGeometry):
    pass


def wrap_angle(a):
    """Map angles from atan2's [-pi, pi] onto (-pi, pi]."""
    a = np.asarray(a, dtype=np.float64)
    return np.where(a <= -np.pi, a + 2.0 * np.pi, a)


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


@dataclass(frozen=True)
class SE3Transform:
    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.rotation, dtype=np.float64)
        t = np.asarray(self.translation, dtype=np.float64)
        if r.shape != (3, 3) or t.shape != (3,):
            raise ValueError("rotation must be 3x3 and translation length 3")
        if not np.allclose(r.T @ r, np.eye(3), atol=1e-10, rtol=0):
            raise ValueError("rotation is not orthogonal")
        if abs(np.linalg.det(r) - 1.0) > 1e-10:
            raise ValueError("rotation has det != +1")
        object.__setattr__(self, "rotation", r)
        object.__setattr__(self, "translation", t)

    @classmethod
    def identity(cls) -> "SE3Transform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def random(cls, rng: np.random.Generator, max_shift: float = 50.0) -> "SE3Transform":
        q, r = np.linalg.qr(rng.standard_normal((3, 3)))
        q = q * np.sign(np.diag(r))
        if np.linalg.det(q) < 0:
            q[:, 0] = -q[:, 0]
        return cls(q, rng.uniform(-max_shift, max_shift, size=3))

    def compose(self, first: "SE3Transform") -> "SE3Transform":
        """Transform equal to applying ``first`` and then ``self``."""
        return SE3Transform(self.rotation @ first.rotation,
                            self.rotation @ first.translation + self.translation)

    def __call__(self, points) -> np.ndarray:
        return apply_se3(self, points)


def apply_se3(t: SE3Transform, points) -> np.ndarray:
    p = np.asarray(points, dtype=np.float64)
    return p @ t.rotation.T + t.translation


@dataclass(frozen=True)
class LocalFrame:
    origin: np.ndarray
    axes: np.ndarray  # rows e1, e2, e3

    @property
    def rotation(self) -> np.ndarray:
        """Matrix whose columns are the frame axes."""
        return self.axes.T


def frames_many(n: np.ndarray, ca: np.ndarray, c: np.ndarray):
    """Gram-Schmidt frames for stacked (N, CA, C) triples.

    Returns ``(origins, axes, valid)`` with ``axes[k]`` holding rows e1, e2, e3.
    Rows with collinear or coincident atoms are flagged invalid and get
    identity axes.
    """
    n, ca, c = (np.asarray(x, dtype=np.float64).reshape(-1, 3) for x in (n, ca, c))
    a = c - ca
    b = n - ca
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    cross_norm = np.linalg.norm(np.cross(a, b), axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        sin_ang = cross_norm / (na * nb)
    valid = (na > 0) & (nb > 0) & (sin_ang > np.sin(COLLINEAR_TOL))
    axes = np.tile(np.eye(3), (len(ca), 1, 1))
    if valid.any():
        av, bv = a[valid], b[valid]
        e1 = _unit(av)
        w = bv - np.sum(bv * e1, axis=1, keepdims=True) * e1
        e2 = _unit(w)
        e3 = np.cross(e1, e2)
        axes[valid] = np.stack([e1, e2, e3], axis=1)
    return ca.copy(), axes, valid


def build_local_frame(n, ca, c) -> LocalFrame:
    origins, axes, valid = frames_many(n, ca, c)
    if not valid[0]:
        raise DegenerateGeometry("frame atoms are coincident or collinear")
    return LocalFrame(origins[0], axes[0])


def spherical_many(origins: np.ndarray, axes: np.ndarray, points: np.ndarray):
    """(d, theta, phi) of each point in the matching frame."""
    r = np.einsum("kij,kj->ki", axes, points - origins)
    d = np.linalg.norm(r, axis=1)
    rho = np.hypot(r[:, 0], r[:, 1])
    theta = np.where(d > 0, np.arctan2(rho, r[:, 2]), 0.0)
    phi = np.where(rho > 0, wrap_angle(np.arctan2(r[:, 1], r[:, 0])), 0.0)
    return d, theta, phi


def spherical_coords(frame: LocalFrame, p) -> tuple[float, float, float]:
    d, th, ph = spherical_many(frame.origin[None], frame.axes[None], np.asarray(p, float)[None])
    return float(d[0]), float(th[0]), float(ph[0])


def dihedral_many(p1, p2, p3, p4, strict: bool = True):
    """Signed dihedral angles; with ``strict=False`` degenerate rows come back NaN."""
    p1, p2, p3, p4 = (np.asarray(x, dtype=np.float64).reshape(-1, 3) for x in (p1, p2, p3, p4))
    b1, b2, b3 = p2 - p1, p3 - p2, p4 - p3
    n1 = np.cross(b1, b2)
    n2 = np.cross(b2, b3)
    nb1, nb2, nb3 = (np.linalg.norm(b, axis=1) for b in (b1, b2, b3))
    with np.errstate(divide="ignore", invalid="ignore"):
        s1 = np.linalg.norm(n1, axis=1) / (nb1 * nb2)
        s2 = np.linalg.norm(n2, axis=1) / (nb2 * nb3)
        b2hat = b2 / nb2[:, None]
    bad = ~((nb1 > 0) & (nb2 > 0) & (nb3 > 0)
            & (s1 > np.sin(COLLINEAR_TOL)) & (s2 > np.sin(COLLINEAR_TOL)))
    if strict and bad.any():
        raise DegenerateTorsion("collinear or coincident atoms in torsion quadruple")
    x = np.sum(n1 * n2, axis=1)
    y = np.sum(np.cross(n1, n2) * np.nan_to_num(b2hat), axis=1)
    ang = wrap_angle(np.arctan2(y, x))
    return np.where(bad, np.nan, ang)


def torsion_angle(p1, p2, p3, p4) -> float:
    return float(dihedral_many(p1, p2, p3, p4)[0])


def edge_rotation_many(o_i, ax_i, o_j, ax_j):
    """Signed angle about the edge i->j between the two frames' e1 projections."""
    u = o_j - o_i
    norm = np.linalg.norm(u, axis=1)
    if np.any(norm == 0):
        raise DegenerateGeometry("coincident frame origins")
    u = u / norm[:, None]
    e1i, e1j = ax_i[:, 0], ax_j[:, 0]
    a = e1i - np.sum(e1i * u, axis=1, keepdims=True) * u
    b = e1j - np.sum(e1j * u, axis=1, keepdims=True) * u
    small = (np.linalg.norm(a, axis=1) < PROJECTION_TOL) | (np.linalg.norm(b, axis=1) < PROJECTION_TOL)
    tau = wrap_angle(np.arctan2(np.sum(u * np.cross(a, b), axis=1), np.sum(a * b, axis=1)))
    return np.where(small, 0.0, tau)


def edge_rotation_angle(frame_i: LocalFrame, frame_j: LocalFrame) -> float:
    return float(edge_rotation_many(frame_i.origin[None], frame_i.axes[None],
                                    frame_j.origin[None], frame_j.axes[None])[0])


def euler_many(ax_i: np.ndarray, ax_j: np.ndarray):
    """Z-Y-Z angles of R_i^T R_j for stacked frame pairs.

    When the middle angle is within the gimbal tolerance of 0 or pi, the
    third angle is fixed to 0 and the first absorbs the whole in-plane turn.
    """
    r = np.einsum("kab,kcb->kac", ax_i, ax_j)  # axes_i @ axes_j^T
    s = np.hypot(r[:, 0, 2], r[:, 1, 2])
    t2 = np.arctan2(s, r[:, 2, 2])
    regular = s >= GIMBAL_TOL
    t1 = np.where(regular, np.arctan2(r[:, 1, 2], r[:, 0, 2]), np.arctan2(-r[:, 0, 1], r[:, 1, 1]))
    t3 = np.where(regular, np.arctan2(r[:, 2, 1], -r[:, 2, 0]), 0.0)
    return wrap_angle(t1), t2, wrap_angle(t3)


def euler_angles(frame_i: LocalFrame, frame_j: LocalFrame) -> tuple[float, float, float]:
    a, b, c = euler_many(frame_i.axes[None], frame_j.axes[None])
    return float(a[0]), float(b[0]), float(c[0])


def rot_z(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_y(a: float) -> np.ndarray:
    c, s = np.cos(a), np.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class SideChainTorsions:
    chi: np.ndarray        # (4,), NaN where undefined
    defined_mask: np.ndarray  # (4,) bool


def side_chain_torsions(aa_type: int | str, atoms: Mapping[str, Sequence[float]]) -> SideChainTorsions:
    """chi1..chi4 from the standard atom table; missing or degenerate entries are masked."""
    letter = aa_type if isinstance(aa_type, str) else aa_letter(aa_type)
    chi = np.full(4, np.nan)
    mask = np.zeros(4, dtype=bool)
    for k, quad in enumerate(CHI_ATOMS.get(letter, [])):
        if not all(name in atoms for name in quad):
            continue
        val = dihedral_many(*(atoms[name] for name in quad), strict=False)[0]
        if np.isfinite(val):
            chi[k] = val
            mask[k] = True
    return SideChainTorsions(chi, mask)
