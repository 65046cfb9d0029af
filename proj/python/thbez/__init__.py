"""Truncated hierarchical B-splines with multi-level Bezier extraction."""

from ._thbez import *  # noqa: F401,F403
from ._thbez import __doc__  # noqa: F401
