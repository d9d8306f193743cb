"""Federated-learning backdoor durability simulator (C++ core)."""

from ._fedsim import *  # noqa: F401,F403
from ._fedsim import __doc__  # noqa: F401
