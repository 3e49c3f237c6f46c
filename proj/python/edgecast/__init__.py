"""Python bindings for the edgecast core.

The heavy lifting lives in the compiled ``_edgecast`` module; this package
just re-exports its public surface.
"""

from _edgecast import (  # noqa: F401
    DetectionTable,
    DropStrategy,
    FrameClass,
    TsPacket,
    bandwidth_full,
    bandwidth_saved,
    classify_stream,
    compare_strategies,
    decode_quality_notify,
    detection_lookup,
    effective_quality,
    encode_quality_notify,
    generate_synthetic,
    max_tolerable_loss,
    parse_ts_packet,
    scan_datagram,
    solve_min_bandwidth,
)

__all__ = [
    "DetectionTable",
    "DropStrategy",
    "FrameClass",
    "TsPacket",
    "bandwidth_full",
    "bandwidth_saved",
    "classify_stream",
    "compare_strategies",
    "decode_quality_notify",
    "detection_lookup",
    "effective_quality",
    "encode_quality_notify",
    "generate_synthetic",
    "max_tolerable_loss",
    "parse_ts_packet",
    "scan_datagram",
    "solve_min_bandwidth",
]
