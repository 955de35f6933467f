"""scoutsim: a self-contained 2D active-exploration simulator.

A frontier-based exploration stack with three "activeness" levels
(plan-time heading optimization, on-arrival heading refinement, and
continuous feature-aware heading blending), an NMPC path follower, a
drifting-odometry pose-graph SLAM stand-in with loop closures and map
rectification, and a deterministic benchmark harness comparing twelve
method variants.
"""

__version__ = "1.0.0"

from scoutsim.kernels import BACKEND

__all__ = ["BACKEND", "__version__"]
