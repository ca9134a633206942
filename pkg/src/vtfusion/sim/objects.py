"""Procedural object catalog: 11 graspable desk-scale shapes.

Each class is a union of at most four analytic solids plus a procedural
texture evaluated in the object's local frame (so color patterns rotate
with the object). Geometry and texture parameters are fixed per class,
drawn once from a class-keyed RNG, so the catalog is deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..exceptions import ContractError
from ..geometry import PointCloud, Pose
from .primitives import Box, Capsule, Cylinder, Sphere, union_sample_surface

OBJECT_CLASS_COUNT = 11
DEFAULT_MODEL_POINTS = 500


@dataclass
class SceneObject:
    object_id: int
    name: str
    primitives: list
    texture: Callable[[np.ndarray], np.ndarray]
    model_cloud: PointCloud

    def bounding_radius(self):
        return float(np.linalg.norm(self.model_cloud.points, axis=1).max())


def uniform_texture(color):
    color = np.asarray(color, dtype=np.float64)

    def paint(points):
        return np.tile(color, (len(points), 1))

    return paint


def striped_texture(axis, period, phase, color_a, color_b):
    axis = np.asarray(axis, dtype=np.float64)
    axis = axis / np.linalg.norm(axis)
    ca, cb = np.asarray(color_a, float), np.asarray(color_b, float)

    def paint(points):
        band = np.floor((points @ axis + phase) / period).astype(np.int64) % 2
        return np.where(band[:, None] == 0, ca, cb)

    return paint


def checker_texture(scale, color_a, color_b):
    ca, cb = np.asarray(color_a, float), np.asarray(color_b, float)

    def paint(points):
        cell = np.floor(points / scale).astype(np.int64).sum(axis=1) % 2
        return np.where(cell[:, None] == 0, ca, cb)

    return paint


def _rot(axis, angle, translation=(0, 0, 0)):
    return Pose.from_axis_angle(axis, angle, translation)


def _shift(translation):
    return Pose(np.array([1.0, 0.0, 0.0, 0.0]), np.asarray(translation, dtype=np.float64))


def _build_geometry(object_id):
    """Primitive union for one class. Sizes chosen for a ~9 cm hand span."""
    if object_id == 1:  # large cuboid carton
        return [Box((0.035, 0.045, 0.014))]
    if object_id == 2:  # slim cuboid packet
        return [Box((0.022, 0.038, 0.010))]
    if object_id == 3:  # food can
        return [Cylinder(0.026, 0.034)]
    if object_id == 4:  # squeeze bottle: body + neck
        return [
            Cylinder(0.024, 0.032),
            Capsule(0.012, 0.010, frame=_shift((0.0, 0.0, 0.042))),
        ]
    if object_id == 5:  # squat tin
        return [Box((0.030, 0.022, 0.016))]
    if object_id == 6:  # curved fruit: two tilted capsules
        return [
            Capsule(0.013, 0.028, frame=_rot((1, 0, 0), 0.35, (0.0, -0.024, 0.0))),
            Capsule(0.013, 0.028, frame=_rot((1, 0, 0), -0.35, (0.0, 0.024, 0.0))),
        ]
    if object_id == 7:  # shallow bowl
        return [Cylinder(0.042, 0.014)]
    if object_id == 8:  # mug: body + side handle
        return [
            Cylinder(0.028, 0.030),
            Capsule(0.006, 0.016, frame=_shift((0.037, 0.0, 0.0))),
        ]
    if object_id == 9:  # drill: block body + barrel
        return [
            Box((0.020, 0.015, 0.028)),
            Cylinder(0.011, 0.026, frame=_rot((1, 0, 0), np.pi / 2, (0.0, 0.028, 0.012))),
        ]
    if object_id == 10:  # scissors: two crossed thin blades with ring ends
        return [
            Capsule(0.0045, 0.042, frame=_rot((0, 0, 1), np.pi / 2 + 0.21)),
            Capsule(0.0045, 0.042, frame=_rot((0, 0, 1), np.pi / 2 - 0.21)),
            Sphere(0.009, frame=_shift((-0.040, -0.010, 0.0))),
            Sphere(0.009, frame=_shift((-0.040, 0.010, 0.0))),
        ]
    if object_id == 11:  # thin wrench: shaft + jaw block, untextured
        return [
            Box((0.007, 0.050, 0.0035)),
            Box((0.016, 0.011, 0.0045), frame=_shift((0.0, 0.058, 0.0))),
        ]
    raise ContractError(f"object_id must be in 1..{OBJECT_CLASS_COUNT}, got {object_id}")


def _build_texture(object_id, rng):
    base = rng.uniform(0.25, 0.9, size=3)
    alt = rng.uniform(0.1, 0.9, size=3)
    # keep the two pattern colors visually separable
    while np.abs(base - alt).max() < 0.25:
        alt = rng.uniform(0.1, 0.9, size=3)
    style = {
        1: "checker",
        2: "striped",
        3: "striped",
        4: "checker",
        5: "striped",
        6: "uniform",
        7: "checker",
        8: "striped",
        9: "checker",
        10: "uniform",
        11: "uniform",
    }[object_id]
    if style == "uniform":
        return uniform_texture(base)
    if style == "striped":
        axis = np.array([0.0, 0.0, 1.0]) if object_id in (3, 8) else np.array([0.0, 1.0, 0.0])
        period = rng.uniform(0.008, 0.016)
        phase = rng.uniform(0.0, period)
        return striped_texture(axis, period, phase, base, alt)
    scale = rng.uniform(0.010, 0.018)
    return checker_texture(scale, base, alt)


def build_object(object_id, model_points=DEFAULT_MODEL_POINTS):
    """Construct one catalog object with its canonical surface sample."""
    primitives = _build_geometry(object_id)
    texture = _build_texture(object_id, np.random.default_rng(1000 + object_id))
    cloud = union_sample_surface(primitives, model_points, np.random.default_rng(2000 + object_id))
    names = {
        1: "carton",
        2: "packet",
        3: "can",
        4: "bottle",
        5: "tin",
        6: "fruit",
        7: "bowl",
        8: "mug",
        9: "drill",
        10: "scissors",
        11: "wrench",
    }
    return SceneObject(object_id, names[object_id], primitives, texture, PointCloud(cloud))


def object_catalog(model_points=DEFAULT_MODEL_POINTS):
    return [build_object(i, model_points) for i in range(1, OBJECT_CLASS_COUNT + 1)]
