"""Turntable texture baking: orbit rendering, UV back-projection, confidence
fusion, base-rotation selection and image metrics.

Arrays are numpy: images are (H, W, 3) floats in [0, 1], masks (H, W) bools.
Errors raise ``tapestry.Error`` with ``code`` (e.g. ``"invalid-argument"``) and
``validation`` (True for bad input, False for runtime/provider failures).
"""

from ._tapestry import *  # noqa: F401,F403
from ._tapestry import Error, __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
