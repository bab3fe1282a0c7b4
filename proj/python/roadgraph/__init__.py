"""Python access to the road-graph core: file formats, NMS, metrics and synthetic scenes."""

from ._core import (
    ConfigError,
    FormatError,
    IoError,
    canonical_config,
    evaluate,
    format_graph,
    load_graph,
    load_raster,
    make_scene,
    nms,
    save_graph,
    save_raster,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "IoError",
    "canonical_config",
    "evaluate",
    "format_graph",
    "load_graph",
    "load_raster",
    "make_scene",
    "nms",
    "save_graph",
    "save_raster",
]
