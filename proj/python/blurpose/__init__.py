"""Motion-blurred body pose recovery by differentiable rendering."""

import json

from . import _core
from ._core import (
    DataError,
    NumericalError,
    blur_rate,
    bucket_label,
    build_id,
    check_gradients,
    compose,
    mask_iou,
    mpjpe,
    pa_mpjpe,
)

__all__ = [
    "DataError",
    "NumericalError",
    "blur_rate",
    "bucket_label",
    "build_id",
    "check_gradients",
    "compose",
    "generate_scene",
    "load_scene",
    "mask_iou",
    "mpjpe",
    "pa_mpjpe",
    "render_motion",
    "reverse_motion",
    "save_generated_scene",
    "solve_scene",
]


def _decode(scene):
    scene["motion"] = json.loads(scene["motion"])
    return scene


def generate_scene(seed=0, band=(0.2, 0.3), config=None):
    """Random synthetic scene as a dict of numpy arrays and metadata."""
    return _decode(_core.generate_scene(seed, band[0], band[1], json.dumps(config or {})))


def load_scene(path):
    return _decode(_core.load_scene(str(path)))


def save_generated_scene(path, seed=0, band=(0.2, 0.3)):
    _core.save_generated_scene(str(path), seed, band[0], band[1])


def reverse_motion(motion):
    return json.loads(_core.reverse_motion(json.dumps(motion)))


def render_motion(motion, beta, camera, background, subframes=8):
    """Blurry composite and per-sub-frame soft silhouettes."""
    return _core.render_motion(json.dumps(motion), list(beta), json.dumps(camera), background, subframes)


def solve_scene(path, config=None):
    """Solve one scene directory; returns losses, parameters and scores."""
    return json.loads(_core.solve_scene(str(path), json.dumps(config or {})))
