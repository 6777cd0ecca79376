"""Rigid-body pose and bounding-box primitives.

Conventions used throughout the package:

* quaternions are ``(w, x, y, z)`` and must be unit norm,
* translations are meters in a fixed world frame (z up),
* sensor frames are x-forward / y-left / z-up.

Both :class:`Pose` and :class:`BBox3` are immutable value types; they are
safe to share between threads but the containers that hold them are not.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

QUAT_NORM_TOL = 1e-9


class InvalidGeometry(ValueError):
    """A quaternion is not unit norm or a box extent is not positive."""


def _float3(values: Sequence[float], what: str) -> tuple[float, float, float]:
    vals = tuple(float(v) for v in values)
    if len(vals) != 3:
        raise InvalidGeometry(f"{what} must have exactly 3 components, got {len(vals)}")
    if not all(math.isfinite(v) for v in vals):
        raise InvalidGeometry(f"{what} must be finite, got {vals}")
    return vals  # type: ignore[return-value]


@dataclass(frozen=True)
class Pose:
    """A rigid transform: rotation quaternion ``q`` plus translation ``t``."""

    q: tuple[float, float, float, float]
    t: tuple[float, float, float]

    def __post_init__(self) -> None:
        q = tuple(float(v) for v in self.q)
        if len(q) != 4 or not all(math.isfinite(v) for v in q):
            raise InvalidGeometry(f"quaternion must be 4 finite components, got {self.q!r}")
        norm = math.sqrt(sum(v * v for v in q))
        if abs(norm - 1.0) > QUAT_NORM_TOL:
            raise InvalidGeometry(f"quaternion norm {norm!r} deviates from 1 beyond {QUAT_NORM_TOL}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "t", _float3(self.t, "translation"))

    @classmethod
    def identity(cls, t: Sequence[float] = (0.0, 0.0, 0.0)) -> "Pose":
        return cls((1.0, 0.0, 0.0, 0.0), tuple(t))  # type: ignore[arg-type]

    @classmethod
    def from_dict(cls, data: dict) -> "Pose":
        return cls(tuple(data["q"]), tuple(data["t"]))

    def to_dict(self) -> dict:
        return {"q": list(self.q), "t": list(self.t)}


@dataclass(frozen=True)
class BBox3:
    """Axis-aligned box extents ``(w, h, d)`` = size along x, z and y."""

    extents: tuple[float, float, float]

    def __post_init__(self) -> None:
        ext = _float3(self.extents, "extents")
        if not all(v > 0.0 for v in ext):
            raise InvalidGeometry(f"extents must be strictly positive, got {ext}")
        object.__setattr__(self, "extents", ext)

    @property
    def max_extent(self) -> float:
        return max(self.extents)

    @property
    def volume(self) -> float:
        w, h, d = self.extents
        return w * h * d

    def half_sizes_xyz(self) -> tuple[float, float, float]:
        """Half sizes reordered onto world axes (x, y, z)."""
        w, h, d = self.extents
        return (w / 2.0, d / 2.0, h / 2.0)


def normalize_quat(q: Sequence[float]) -> tuple[float, float, float, float]:
    """Return ``q`` scaled to unit norm (helper for building poses)."""
    norm = math.sqrt(sum(float(v) * float(v) for v in q))
    if norm == 0.0 or not math.isfinite(norm):
        raise InvalidGeometry("cannot normalize a zero/non-finite quaternion")
    return tuple(float(v) / norm for v in q)  # type: ignore[return-value]


def quat_mul(a: Sequence[float], b: Sequence[float]) -> tuple[float, float, float, float]:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return (
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    )


def quat_conj(q: Sequence[float]) -> tuple[float, float, float, float]:
    w, x, y, z = q
    return (w, -x, -y, -z)


def quat_rotate(q: Sequence[float], v: Sequence[float]) -> tuple[float, float, float]:
    """Rotate vector ``v`` by quaternion ``q``."""
    _, x, y, z = quat_mul(quat_mul(q, (0.0, *v)), quat_conj(q))
    return (x, y, z)


def quat_angle(qa: Sequence[float], qb: Sequence[float]) -> float:
    """Geodesic rotation angle between two unit quaternions, in [0, pi].

    Uses atan2 on the relative quaternion, which stays accurate for tiny
    angles and folds the q/-q double cover.
    """
    w, x, y, z = quat_mul(quat_conj(qa), qb)
    return 2.0 * math.atan2(math.sqrt(x * x + y * y + z * z), abs(w))


def pose_distance(a: Pose, b: Pose, rot_weight: float = 0.0) -> float:
    """Displacement between two poses.

    Euclidean distance between the translations, combined with the geodesic
    rotation angle scaled by ``rot_weight``:

        sqrt(|t_a - t_b|^2 + (rot_weight * angle)^2)

    The default weight of 0 makes the comparison translation-only, which is
    how the change-detection pipeline is tuned.
    """
    if rot_weight < 0.0:
        raise ValueError("rot_weight must be >= 0")
    dx = a.t[0] - b.t[0]
    dy = a.t[1] - b.t[1]
    dz = a.t[2] - b.t[2]
    trans_sq = dx * dx + dy * dy + dz * dz
    if rot_weight == 0.0:
        return math.sqrt(trans_sq)
    ang = rot_weight * quat_angle(a.q, b.q)
    return math.sqrt(trans_sq + ang * ang)


def point_in_aabb(point: Sequence[float], center: Sequence[float], half_sizes: Sequence[float]) -> bool:
    """Inclusive containment test of a point in an axis-aligned box."""
    return all(abs(point[i] - center[i]) <= half_sizes[i] for i in range(3))


def poses_close(a: Pose, b: Pose, tol: float) -> bool:
    """Component-wise comparison of two poses (quaternion signs literal)."""
    return all(abs(x - y) <= tol for x, y in zip(a.q, b.q)) and all(
        abs(x - y) <= tol for x, y in zip(a.t, b.t)
    )


def vec_norm(v: Iterable[float]) -> float:
    return math.sqrt(sum(float(x) * float(x) for x in v))
