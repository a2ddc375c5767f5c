"""Typed message-passing processes: protocol checking and execution.

The heavy lifting lives in the compiled extension; this package re-exports
its surface.
"""

try:
    from ._chansel import *  # noqa: F401,F403  (installed layout)
except ImportError:  # in-tree builds put the extension on PYTHONPATH
    from _chansel import *  # noqa: F401,F403

from ._version import __version__  # noqa: F401
