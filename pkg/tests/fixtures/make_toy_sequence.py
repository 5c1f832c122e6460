"""Regenerate the checked-in toy sequence (3 tiny frames of a textured
plane with a slowly translating camera).  Run from the repository root:

    python tests/fixtures/make_toy_sequence.py
"""

import sys
from pathlib import Path

import numpy as np

sys.path.insert(0, str(Path(__file__).resolve().parents[1]))

from meshmap import CameraModel, ExpansionParams, PipelineConfig, Pose, SamplingParams
from scenes import render_plane_frame, write_sequence


def main():
    cam = CameraModel(fx=60.0, fy=60.0, cx=31.5, cy=23.5, width=64, height=48)
    sampling = SamplingParams(max_points=200, quality_level=0.01,
                              min_distance=4.0, block_size=3, border_margin=2)
    expansion = ExpansionParams(window_size=25, min_pixel_distance=4.0,
                                d_min=0.05)
    config = PipelineConfig(camera=cam, sampling=sampling,
                            expansion=expansion, depth_scale=1.0 / 5000.0)
    frames = []
    # translations are deliberately non-collinear so the trajectory is a
    # valid ATE alignment target
    offsets = [(0.0, 0.0, 0.0), (0.02, 0.004, 0.002), (0.04, 0.0, 0.004)]
    for i, offset in enumerate(offsets):
        pose = Pose(np.eye(3), list(offset))
        frames.append(render_plane_frame(cam, pose, plane_z=2.0,
                                         period=0.25, timestamp=0.1 * i,
                                         index=i))
    out = Path(__file__).parent / "toy_sequence"
    write_sequence(out, frames, cam, depth_scale=1.0 / 5000.0, config=config)
    print(f"wrote {len(frames)} frames to {out}")


if __name__ == "__main__":
    main()
