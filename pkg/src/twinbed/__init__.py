"""twinbed: a software twin of a sand-table multi-vehicle testbed.

The package emulates the physical side (miniature vehicles, overhead-vision
localization, an 8 Hz workstation loop), a cloud hub that routes timestamped
messages with measured per-stage latency, a cyber space of mapping and cloud
vehicles, and a platoon experiment harness with string-stability analysis.
"""

__version__ = "0.1.0"

from twinbed.vehicle import ControlInput, VehicleParams, VehicleState, sandbox_clamp, step_bicycle

__all__ = [
    "ControlInput",
    "VehicleParams",
    "VehicleState",
    "sandbox_clamp",
    "step_bicycle",
    "__version__",
]
