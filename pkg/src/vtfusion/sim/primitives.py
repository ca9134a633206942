"""Analytic solid primitives with exact ray intersections and signed distances.

Every primitive carries a rigid frame (parent-from-local). Rays and query
points arrive in the parent frame and are mapped into the local frame where
the solid is axis-aligned. Cylinders and capsules extend along local z.

Exactness matters: the generator's test oracles assert that rendered depth
points and tactile contacts sit on these surfaces to ~1e-6 m.
"""

from __future__ import annotations

import numpy as np

from ..geometry import Pose

_TMIN = 1e-9


def orthonormal_basis(z):
    """Right-handed basis whose third column is the given direction."""
    z = np.asarray(z, dtype=np.float64)
    z = z / np.linalg.norm(z)
    helper = np.array([0.0, 0.0, 1.0]) if abs(z[2]) < 0.9 else np.array([1.0, 0.0, 0.0])
    x = np.cross(helper, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


class Primitive:
    """Base solid: subclasses implement the local-frame geometry kernels."""

    def __init__(self, frame: Pose | None = None):
        self.frame = frame if frame is not None else Pose.identity()
        self._rot = self.frame.matrix
        self._origin = self.frame.translation

    def with_frame(self, frame: Pose):
        out = self.__class__(**self._params())
        out.frame = frame
        out._rot = frame.matrix
        out._origin = frame.translation
        return out

    def _params(self):
        raise NotImplementedError

    def _to_local_points(self, points):
        return (np.asarray(points, dtype=np.float64) - self._origin) @ self._rot

    def _to_parent_points(self, points):
        return points @ self._rot.T + self._origin

    def ray_intersect(self, origins, dirs):
        """Smallest positive hit parameter per ray; inf where the ray misses."""
        o = self._to_local_points(origins)
        d = np.asarray(dirs, dtype=np.float64) @ self._rot
        return self._ray_local(o, d)

    def signed_distance(self, points):
        return self._sdf_local(self._to_local_points(points))

    def surface_normal(self, points):
        """Outward unit normals for points on (or near) the surface."""
        local = self._to_local_points(points)
        return self._normal_local(local) @ self._rot.T

    def sample_surface(self, n, rng):
        return self._to_parent_points(self._sample_local(n, rng))

    def area(self):
        raise NotImplementedError


def _pick_near_far(t_near, t_far, valid):
    hit = valid & (t_far > _TMIN)
    t = np.where(t_near > _TMIN, t_near, t_far)
    return np.where(hit, t, np.inf)


class Sphere(Primitive):
    def __init__(self, radius, frame=None):
        super().__init__(frame)
        self.radius = float(radius)

    def _params(self):
        return {"radius": self.radius}

    def _ray_local(self, o, d):
        b = np.einsum("ij,ij->i", o, d)
        c = np.einsum("ij,ij->i", o, o) - self.radius**2
        disc = b * b - c
        valid = disc >= 0.0
        root = np.sqrt(np.maximum(disc, 0.0))
        return _pick_near_far(-b - root, -b + root, valid)

    def _sdf_local(self, p):
        return np.linalg.norm(p, axis=-1) - self.radius

    def _normal_local(self, p):
        n = np.linalg.norm(p, axis=-1, keepdims=True)
        return p / np.maximum(n, 1e-300)

    def _sample_local(self, n, rng):
        v = rng.normal(size=(n, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        return v * self.radius

    def area(self):
        return 4.0 * np.pi * self.radius**2


class Box(Primitive):
    def __init__(self, half_extents, frame=None):
        super().__init__(frame)
        self.half_extents = np.asarray(half_extents, dtype=np.float64)

    def _params(self):
        return {"half_extents": self.half_extents}

    def _ray_local(self, o, d):
        h = self.half_extents
        d_safe = np.where(np.abs(d) < 1e-300, 1e-300, d)
        t1 = (-h - o) / d_safe
        t2 = (h - o) / d_safe
        t_near = np.minimum(t1, t2).max(axis=1)
        t_far = np.maximum(t1, t2).min(axis=1)
        # rays parallel to a slab and outside it never hit
        parallel_miss = ((np.abs(d) < 1e-300) & (np.abs(o) > h)).any(axis=1)
        valid = (t_near <= t_far) & ~parallel_miss
        return _pick_near_far(t_near, t_far, valid)

    def _sdf_local(self, p):
        q = np.abs(p) - self.half_extents
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=-1)
        inside = np.minimum(q.max(axis=-1), 0.0)
        return outside + inside

    def _normal_local(self, p):
        rel = np.abs(p) / self.half_extents
        axis = rel.argmax(axis=-1)
        n = np.zeros_like(p)
        rows = np.arange(len(p))
        n[rows, axis] = np.sign(p[rows, axis])
        return n

    def _sample_local(self, n, rng):
        hx, hy, hz = self.half_extents
        face_areas = np.array([hy * hz, hy * hz, hx * hz, hx * hz, hx * hy, hx * hy]) * 4.0
        faces = rng.choice(6, size=n, p=face_areas / face_areas.sum())
        u = rng.uniform(-1.0, 1.0, size=(n, 2))
        pts = np.empty((n, 3))
        for f in range(6):
            m = faces == f
            if not m.any():
                continue
            axis, sign = divmod(f, 2)
            sign = 1.0 if sign == 0 else -1.0
            others = [i for i in range(3) if i != axis]
            pts[m, axis] = sign * self.half_extents[axis]
            pts[m, others[0]] = u[m, 0] * self.half_extents[others[0]]
            pts[m, others[1]] = u[m, 1] * self.half_extents[others[1]]
        return pts

    def area(self):
        hx, hy, hz = self.half_extents
        return 8.0 * (hx * hy + hy * hz + hx * hz)


class Cylinder(Primitive):
    """Capped cylinder along local z with half-height ``half_height``."""

    def __init__(self, radius, half_height, frame=None):
        super().__init__(frame)
        self.radius = float(radius)
        self.half_height = float(half_height)

    def _params(self):
        return {"radius": self.radius, "half_height": self.half_height}

    def _ray_local(self, o, d):
        r, hh = self.radius, self.half_height
        candidates = []

        a = d[:, 0] ** 2 + d[:, 1] ** 2
        b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
        c = o[:, 0] ** 2 + o[:, 1] ** 2 - r * r
        disc = b * b - a * c
        a_safe = np.where(a < 1e-300, 1e-300, a)
        root = np.sqrt(np.maximum(disc, 0.0))
        for sign in (-1.0, 1.0):
            t = (-b + sign * root) / a_safe
            z = o[:, 2] + t * d[:, 2]
            ok = (disc >= 0.0) & (a > 1e-300) & (t > _TMIN) & (np.abs(z) <= hh)
            candidates.append(np.where(ok, t, np.inf))

        dz_safe = np.where(np.abs(d[:, 2]) < 1e-300, 1e-300, d[:, 2])
        for zcap in (hh, -hh):
            t = (zcap - o[:, 2]) / dz_safe
            x = o[:, 0] + t * d[:, 0]
            y = o[:, 1] + t * d[:, 1]
            ok = (np.abs(d[:, 2]) > 1e-300) & (t > _TMIN) & (x * x + y * y <= r * r)
            candidates.append(np.where(ok, t, np.inf))

        return np.min(candidates, axis=0)

    def _sdf_local(self, p):
        radial = np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2) - self.radius
        axial = np.abs(p[:, 2]) - self.half_height
        q = np.stack([radial, axial], axis=1)
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(q.max(axis=1), 0.0)
        return outside + inside

    def _normal_local(self, p):
        radial = np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2)
        d_side = np.abs(radial - self.radius)
        d_cap = np.abs(np.abs(p[:, 2]) - self.half_height)
        n = np.zeros_like(p)
        side = d_side <= d_cap
        safe = np.maximum(radial, 1e-300)
        n[side, 0] = p[side, 0] / safe[side]
        n[side, 1] = p[side, 1] / safe[side]
        n[~side, 2] = np.sign(p[~side, 2])
        return n

    def _sample_local(self, n, rng):
        r, hh = self.radius, self.half_height
        side_area = 2.0 * np.pi * r * 2.0 * hh
        cap_area = np.pi * r * r
        which = rng.choice(3, size=n, p=np.array([side_area, cap_area, cap_area]) / (side_area + 2 * cap_area))
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        pts = np.empty((n, 3))
        side = which == 0
        pts[side, 0] = r * np.cos(theta[side])
        pts[side, 1] = r * np.sin(theta[side])
        pts[side, 2] = rng.uniform(-hh, hh, size=side.sum())
        for w, zsign in ((1, 1.0), (2, -1.0)):
            m = which == w
            rad = r * np.sqrt(rng.random(m.sum()))
            pts[m, 0] = rad * np.cos(theta[m])
            pts[m, 1] = rad * np.sin(theta[m])
            pts[m, 2] = zsign * hh
        return pts

    def area(self):
        return 2.0 * np.pi * self.radius * (2.0 * self.half_height + self.radius)


class Capsule(Primitive):
    """Cylinder along local z with hemispherical caps at z = +-half_height."""

    def __init__(self, radius, half_height, frame=None):
        super().__init__(frame)
        self.radius = float(radius)
        self.half_height = float(half_height)

    def _params(self):
        return {"radius": self.radius, "half_height": self.half_height}

    def _ray_local(self, o, d):
        r, hh = self.radius, self.half_height
        candidates = []

        a = d[:, 0] ** 2 + d[:, 1] ** 2
        b = o[:, 0] * d[:, 0] + o[:, 1] * d[:, 1]
        c = o[:, 0] ** 2 + o[:, 1] ** 2 - r * r
        disc = b * b - a * c
        a_safe = np.where(a < 1e-300, 1e-300, a)
        root = np.sqrt(np.maximum(disc, 0.0))
        for sign in (-1.0, 1.0):
            t = (-b + sign * root) / a_safe
            z = o[:, 2] + t * d[:, 2]
            ok = (disc >= 0.0) & (a > 1e-300) & (t > _TMIN) & (np.abs(z) <= hh)
            candidates.append(np.where(ok, t, np.inf))

        for zc in (hh, -hh):
            center = np.array([0.0, 0.0, zc])
            oc = o - center
            b2 = np.einsum("ij,ij->i", oc, d)
            c2 = np.einsum("ij,ij->i", oc, oc) - r * r
            disc2 = b2 * b2 - c2
            root2 = np.sqrt(np.maximum(disc2, 0.0))
            for sign in (-1.0, 1.0):
                t = -b2 + sign * root2
                z = o[:, 2] + t * d[:, 2]
                on_cap = (z - zc) * np.sign(zc) >= 0.0
                ok = (disc2 >= 0.0) & (t > _TMIN) & on_cap
                candidates.append(np.where(ok, t, np.inf))

        return np.min(candidates, axis=0)

    def _sdf_local(self, p):
        q = p.copy()
        q[:, 2] -= np.clip(q[:, 2], -self.half_height, self.half_height)
        return np.linalg.norm(q, axis=1) - self.radius

    def _normal_local(self, p):
        q = p.copy()
        q[:, 2] -= np.clip(q[:, 2], -self.half_height, self.half_height)
        n = np.linalg.norm(q, axis=1, keepdims=True)
        return q / np.maximum(n, 1e-300)

    def _sample_local(self, n, rng):
        r, hh = self.radius, self.half_height
        side_area = 2.0 * np.pi * r * 2.0 * hh
        sphere_area = 4.0 * np.pi * r * r
        on_side = rng.random(n) < side_area / (side_area + sphere_area)
        pts = np.empty((n, 3))
        theta = rng.uniform(0.0, 2.0 * np.pi, size=n)
        pts[on_side, 0] = r * np.cos(theta[on_side])
        pts[on_side, 1] = r * np.sin(theta[on_side])
        pts[on_side, 2] = rng.uniform(-hh, hh, size=on_side.sum())
        m = ~on_side
        v = rng.normal(size=(m.sum(), 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        caps = v * r
        caps[:, 2] += np.where(caps[:, 2] >= 0.0, hh, -hh)
        pts[m] = caps
        return pts

    def area(self):
        return 2.0 * np.pi * self.radius * (2.0 * self.half_height + 2.0 * self.radius)


# -- unions ----------------------------------------------------------------

def union_signed_distance(primitives, points):
    """Signed distance of the union: min over member solids."""
    dists = np.stack([prim.signed_distance(points) for prim in primitives])
    return dists.min(axis=0)


def union_ray_cast(primitives, origins, dirs):
    """Nearest hit over the union, returning (t, primitive index); misses are inf/-1."""
    ts = np.stack([prim.ray_intersect(origins, dirs) for prim in primitives])
    idx = ts.argmin(axis=0)
    t = ts[idx, np.arange(ts.shape[1])]
    return t, np.where(np.isfinite(t), idx, -1)


def union_sample_surface(primitives, n, rng, reject_tol=1e-7):
    """n points on the boundary of the union, area-weighted across members.

    Points landing strictly inside another member (deeper than
    ``reject_tol``) are rejected and redrawn.
    """
    areas = np.array([prim.area() for prim in primitives])
    weights = areas / areas.sum()
    collected = []
    need = n
    while need > 0:
        batch = max(need * 2, 16)
        counts = rng.multinomial(batch, weights)
        for prim, count in zip(primitives, counts):
            if count == 0:
                continue
            pts = prim.sample_surface(count, rng)
            others = [q for q in primitives if q is not prim]
            if others:
                keep = union_signed_distance(others, pts) > -reject_tol
                pts = pts[keep]
            collected.append(pts)
        need = n - sum(len(p) for p in collected)
    out = np.concatenate(collected, axis=0)
    return out[:n]
