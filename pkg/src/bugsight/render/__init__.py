from .camera import Camera, agent_camera, project_vertex
from .pipeline import (
    FrameHistory,
    labels_to_mask,
    render_depth,
    render_label_image,
    render_mask,
    render_observation,
)

__all__ = [
    "Camera",
    "FrameHistory",
    "agent_camera",
    "labels_to_mask",
    "project_vertex",
    "render_depth",
    "render_label_image",
    "render_mask",
    "render_observation",
]
