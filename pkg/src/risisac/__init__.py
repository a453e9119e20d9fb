"""RIS-assisted ISAC link simulator and estimation library.

Simulates the wideband OFDM pilot/echo observations of a BS-RIS-UT-targets
scene, separates RIS beam-training echoes from moving-target echoes in the
angle-delay and Doppler-delay domains, positions the RIS/UT/targets from the
training results, and evaluates geometry-based beam alignment against an
exhaustive beam-sweep baseline.
"""

from . import arraymath, geometry, channels, airlink, estimator, positioning, alignment

__all__ = [
    "arraymath",
    "geometry",
    "channels",
    "airlink",
    "estimator",
    "positioning",
    "alignment",
]

__version__ = "0.1.0"
