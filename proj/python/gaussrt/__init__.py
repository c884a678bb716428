"""Linear-transmittance Gaussian primitive renderer."""

from ._gaussrt import *  # noqa: F401,F403
from ._gaussrt import __doc__  # noqa: F401
