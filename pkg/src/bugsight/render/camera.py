"""Pinhole camera with yaw-only orientation (the agent never pitches)."""
import math
from dataclasses import dataclass, replace

import numpy as np

from ..scene import Pose

SUBPIXEL = 16  # fixed-point steps per pixel used by the rasteriser


@dataclass(frozen=True)
class Camera:
    pose: Pose
    vertical_fov: float = math.radians(60.0)
    near_plane: float = 0.1
    far_plane: float = 50.0
    width: int = 84
    height: int = 84

    def __post_init__(self):
        if not 0.0 < self.near_plane < self.far_plane:
            raise ValueError(f"need 0 < near ({self.near_plane}) < far ({self.far_plane})")
        if not 0.0 < self.vertical_fov < math.pi:
            raise ValueError("vertical_fov must lie in (0, pi)")
        if self.width < 1 or self.height < 1:
            raise ValueError("image size must be positive")

    @property
    def focal(self) -> float:
        """Focal length in pixels."""
        return (self.height / 2.0) / math.tan(self.vertical_fov / 2.0)

    @property
    def eye(self):
        return np.asarray(self.pose.position, dtype=np.float64)

    def basis(self):
        """``(right, up, forward)`` unit vectors in world space."""
        c, s = math.cos(self.pose.yaw), math.sin(self.pose.yaw)
        forward = np.array([c, 0.0, -s])
        up = np.array([0.0, 1.0, 0.0])
        right = np.array([s, 0.0, c])
        return right, up, forward

    def to_view(self, points: np.ndarray) -> np.ndarray:
        """World points ``(N, 3)`` to view space: x right, y up, z = depth along the view axis."""
        right, up, forward = self.basis()
        d = np.asarray(points, dtype=np.float64) - self.eye
        return np.stack([d @ right, d @ up, d @ forward], axis=-1)

    def with_near(self, near: float) -> "Camera":
        return replace(self, near_plane=float(near))

    def pixel_rays(self) -> np.ndarray:
        """View-space directions ``(H, W, 3)`` through pixel centres, scaled to unit depth."""
        f = self.focal
        xs = (np.arange(self.width) + 0.5 - self.width / 2.0) / f
        ys = (self.height / 2.0 - (np.arange(self.height) + 0.5)) / f
        gx, gy = np.meshgrid(xs, ys)
        return np.stack([gx, gy, np.ones_like(gx)], axis=-1)


def project_vertex(camera: Camera, point):
    """Screen ``(x, y, depth)`` of a world point, or ``None`` when it lies in front of the near plane.

    Screen x grows to the right and y downwards; pixel ``(i, j)`` has its
    centre at ``(j + 0.5, i + 0.5)``.
    """
    x, y, z = camera.to_view(np.asarray(point, dtype=np.float64).reshape(1, 3))[0]
    if z < camera.near_plane:
        return None
    f = camera.focal
    return (camera.width / 2.0 + f * x / z, camera.height / 2.0 - f * y / z, float(z))


def agent_camera(pose: Pose, eye_height: float, **kwargs) -> Camera:
    """Camera at ``eye_height`` above the agent's feet, looking along its heading."""
    x, y, z = pose.position
    return Camera(Pose((x, y + eye_height, z), pose.yaw), **kwargs)
