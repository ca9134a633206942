"""Rigid-body poses, point clouds, and the pose-error kernels.

Everything here is plain float64 numpy, pure, and safe to call from
parallel workers. Units are meters and radians unless noted.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .exceptions import ContractError


def normalize_quaternion(q, tol=1e-3):
    """Return q scaled to unit length; reject inputs farther than ``tol`` off."""
    q = np.asarray(q, dtype=np.float64)
    if q.shape != (4,):
        raise ContractError(f"quaternion must have shape (4,), got {q.shape}")
    n = float(np.linalg.norm(q))
    if abs(n - 1.0) > tol:
        raise ContractError(f"quaternion norm {n:.6f} is not within {tol} of 1")
    return q / n


@dataclass(frozen=True)
class Pose:
    """Rigid transform: unit quaternion (w, x, y, z) plus translation in meters."""

    rotation: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "rotation", normalize_quaternion(self.rotation))
        t = np.asarray(self.translation, dtype=np.float64)
        if t.shape != (3,):
            raise ContractError(f"translation must have shape (3,), got {t.shape}")
        object.__setattr__(self, "translation", t)

    @staticmethod
    def identity():
        return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @staticmethod
    def from_axis_angle(axis, angle, translation=(0.0, 0.0, 0.0)):
        axis = np.asarray(axis, dtype=np.float64)
        n = np.linalg.norm(axis)
        if n == 0.0:
            raise ContractError("rotation axis must be nonzero")
        axis = axis / n
        half = 0.5 * float(angle)
        q = np.concatenate(([np.cos(half)], np.sin(half) * axis))
        return Pose(q, np.asarray(translation, dtype=np.float64))

    @property
    def matrix(self):
        return quat_to_matrix(self.rotation)

    def compose(self, other: "Pose") -> "Pose":
        """self applied after other: (self * other)(x) = self(other(x))."""
        q = quat_multiply(self.rotation, other.rotation)
        t = self.matrix @ other.translation + self.translation
        return Pose(q, t)

    def inverse(self) -> "Pose":
        q_inv = quat_conjugate(self.rotation)
        return Pose(q_inv, -(quat_to_matrix(q_inv) @ self.translation))

    def apply(self, points):
        points = np.asarray(points, dtype=np.float64)
        return points @ self.matrix.T + self.translation


@dataclass
class PointCloud:
    """Ordered 3D points with optional per-point RGB colors in [0, 1]."""

    points: np.ndarray
    colors: np.ndarray | None = field(default=None)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pts)):
            raise ContractError("point cloud contains non-finite coordinates")
        self.points = pts
        if self.colors is not None:
            colors = np.asarray(self.colors, dtype=np.float64).reshape(-1, 3)
            if len(colors) != len(pts):
                raise ContractError(
                    f"colors length {len(colors)} does not match points length {len(pts)}"
                )
            self.colors = colors

    def __len__(self):
        return len(self.points)

    @staticmethod
    def empty():
        return PointCloud(np.zeros((0, 3)))


def quat_to_matrix(q):
    """Rotation matrix of a unit quaternion (w, x, y, z)."""
    w, x, y, z = normalize_quaternion(q, tol=1e-3)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conjugate(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def random_quaternion(rng):
    """Uniform random rotation (Shoemake's subgroup method)."""
    u1, u2, u3 = rng.random(3)
    a, b = np.sqrt(1.0 - u1), np.sqrt(u1)
    return np.array(
        [
            a * np.sin(2 * np.pi * u2),
            a * np.cos(2 * np.pi * u2),
            b * np.sin(2 * np.pi * u3),
            b * np.cos(2 * np.pi * u3),
        ]
    )


def transform_cloud(pose: Pose, cloud: PointCloud) -> PointCloud:
    """Map every point through the pose; colors pass through unchanged."""
    return PointCloud(pose.apply(cloud.points), None if cloud.colors is None else cloud.colors.copy())


def pointwise_pose_loss(est: Pose, gt: Pose, model: PointCloud) -> float:
    """Mean distance between the model transformed by the two poses (meters)."""
    if len(model) == 0:
        raise ContractError("pointwise_pose_loss requires a non-empty model cloud")
    diff = est.apply(model.points) - gt.apply(model.points)
    return float(np.mean(np.linalg.norm(diff, axis=1)))


def angular_error(q_est, q_gt) -> float:
    """Angle between two unit quaternions, in [0, pi] radians.

    Invariant under sign flips of either argument (double cover); the inner
    product is clamped to [-1, 1] to absorb floating-point drift.
    """
    qa = normalize_quaternion(q_est, tol=1e-3)
    qb = normalize_quaternion(q_gt, tol=1e-3)
    inner = float(np.dot(qa, qb))
    arg = np.clip(2.0 * inner * inner - 1.0, -1.0, 1.0)
    return float(np.arccos(arg))


def position_error(t_est, t_gt) -> float:
    """Euclidean distance between two positions (meters)."""
    t_est = np.asarray(t_est, dtype=np.float64)
    t_gt = np.asarray(t_gt, dtype=np.float64)
    return float(np.linalg.norm(t_est - t_gt))


def nearest_neighbor_distances(query, reference, chunk=2048):
    """Distance from each query point to its nearest reference point (brute force)."""
    query = np.asarray(query, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if len(reference) == 0:
        return np.full(len(query), np.inf)
    out = np.empty(len(query))
    for lo in range(0, len(query), chunk):
        block = query[lo : lo + chunk]
        d2 = ((block[:, None, :] - reference[None, :, :]) ** 2).sum(axis=2)
        out[lo : lo + chunk] = np.sqrt(d2.min(axis=1))
    return out


def knn_visibility(model_in_camera: PointCloud, observed: PointCloud, epsilon: float) -> float:
    """Fraction of model points with no observed point within ``epsilon``.

    0.0 when every model point is matched, 1.0 when ``observed`` is empty.
    Monotonically non-increasing in epsilon.
    """
    if len(model_in_camera) == 0:
        raise ContractError("knn_visibility requires a non-empty model cloud")
    if epsilon <= 0.0:
        raise ContractError(f"epsilon must be positive, got {epsilon}")
    if len(observed) == 0:
        return 1.0
    dists = nearest_neighbor_distances(model_in_camera.points, observed.points)
    return float(np.mean(dists > epsilon))


def nearest_neighbor_indices(query, reference, chunk=2048):
    """Index of the nearest reference point for each query point."""
    query = np.asarray(query, dtype=np.float64)
    reference = np.asarray(reference, dtype=np.float64)
    if len(reference) == 0:
        raise ContractError("nearest_neighbor_indices requires a non-empty reference")
    out = np.empty(len(query), dtype=np.intp)
    for lo in range(0, len(query), chunk):
        block = query[lo : lo + chunk]
        d2 = ((block[:, None, :] - reference[None, :, :]) ** 2).sum(axis=2)
        out[lo : lo + chunk] = d2.argmin(axis=1)
    return out


def sample_indices(count, n, rng):
    """n indices into range(count): without replacement when possible."""
    if count < 1:
        raise ContractError("cannot sample from an empty cloud")
    if n < 1:
        raise ContractError(f"sample size must be >= 1, got {n}")
    if count >= n:
        return rng.choice(count, size=n, replace=False)
    return rng.choice(count, size=n, replace=True)


def sample_points(cloud: PointCloud, n: int, seed) -> PointCloud:
    """Draw exactly n points, without replacement when the cloud is big enough.

    ``seed`` may be an int or a numpy Generator; results are deterministic
    per seed.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    idx = sample_indices(len(cloud), n, rng)
    return PointCloud(
        cloud.points[idx],
        None if cloud.colors is None else cloud.colors[idx],
    )
