"""Desk-scale sun tracking on a simulated 6-DoF arm.

Subpackages cover the full loop: solar ephemeris (ground truth), arm
kinematics (panel pointing), a learned sun-point tracker over synthetic sky
frames, a DQN controller, the episodic energy environment, and the CLI
harness that ties them together reproducibly.
"""

from .backend import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
