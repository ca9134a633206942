"""Procedural scene simulator: analytic solids, kinematic hand, ray-cast rendering."""

from .primitives import Box, Capsule, Cylinder, Sphere, union_ray_cast, union_signed_distance
from .objects import SceneObject, build_object, object_catalog
from .camera import CameraModel
from .render import RenderOutput, raycast_render
from .hand import Gripper, grasp, tactile_capture
from .scene import Scene, SimConfig, randomize_domain
from .collect import run_collection

__all__ = [
    "Box",
    "Capsule",
    "Cylinder",
    "Sphere",
    "union_ray_cast",
    "union_signed_distance",
    "SceneObject",
    "build_object",
    "object_catalog",
    "CameraModel",
    "RenderOutput",
    "raycast_render",
    "Gripper",
    "grasp",
    "tactile_capture",
    "Scene",
    "SimConfig",
    "randomize_domain",
    "run_collection",
]
