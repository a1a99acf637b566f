"""Continuous QoE prediction with causal convolutional networks."""

try:
    from ._cnnqoe import *  # noqa: F401,F403
    from ._cnnqoe import __doc__ as _core_doc  # noqa: F401
except ImportError:  # built in-tree without an installed package
    from _cnnqoe import *  # noqa: F401,F403
