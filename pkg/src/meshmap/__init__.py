"""Incremental RGB-D mesh mapping.

Feature sampling, Delaunay triangulation, 2D/3D outlier rejection and
sliding-window map expansion, with a synthetic underwater harness and
trajectory/map evaluation tools.
"""

from .config import PipelineConfig, config_from_dict, dump_config, load_config
from .dataset import (SequenceManifest, export_mesh, import_ply,
                      load_sequence, load_trajectory)
from .delaunay import (Triangulation2D, dedup_points, in_circumcircle,
                       locate, locate_batch, triangulate)
from .evaluation import (AteReport, MapStats, TimingReport, Trajectory,
                         associate, ate, map_stats, timing_report,
                         umeyama_align)
from .expansion import (ExpansionParams, ExpansionStats, MeshMap,
                        ProjectedMesh, SampleDecision, classify_sample,
                        expand, point_plane_distance, project_window)
from .features import (SamplingParams, corner_score_map, detect_features,
                       rgb_to_gray)
from .geometry import CameraModel, Pose, project, project_visible, unproject
from .meshing import (Frame, FrameMesh, RejectionThresholds, build_frame_mesh,
                      lift_vertices, reject_2d, reject_3d_edges,
                      reject_3d_grazing, sample_depth_bilinear)
from .underwater import WaterParams, degrade, enhance_baseline

__version__ = "0.1.0"

__all__ = [
    "AteReport", "CameraModel", "ExpansionParams", "ExpansionStats", "Frame",
    "FrameMesh", "MapStats", "MeshMap", "PipelineConfig", "Pose",
    "ProjectedMesh", "RejectionThresholds", "SampleDecision",
    "SamplingParams", "SequenceManifest", "TimingReport", "Trajectory",
    "Triangulation2D", "WaterParams", "associate", "ate", "build_frame_mesh",
    "classify_sample", "config_from_dict", "corner_score_map", "dedup_points",
    "degrade", "detect_features", "dump_config", "enhance_baseline",
    "expand", "export_mesh", "import_ply", "in_circumcircle", "lift_vertices",
    "load_config", "load_sequence", "load_trajectory", "locate",
    "locate_batch", "map_stats", "point_plane_distance", "project",
    "project_visible", "project_window", "reject_2d", "reject_3d_edges",
    "reject_3d_grazing", "rgb_to_gray", "sample_depth_bilinear",
    "timing_report", "triangulate", "umeyama_align", "unproject",
]
