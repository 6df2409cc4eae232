"""Cardiac ultrasound segmentation, phantoms and chamber measurements.

Thin numpy-facing wrapper over the C++ core: synthetic cine phantoms with
truth labels, weak labeling plus self-learning refinement, method-of-disks
measurements and the agreement statistics used in the reports.
"""

try:
    from ._echoseg import *  # noqa: F401,F403
    from ._echoseg import __version__  # noqa: F401
except ImportError:
    # Build-tree layout: the extension sits next to the package on sys.path.
    from _echoseg import *  # noqa: F401,F403
    from _echoseg import __version__  # noqa: F401
