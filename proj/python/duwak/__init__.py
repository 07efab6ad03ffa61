from ._duwak import *  # noqa: F401,F403
from ._duwak import DuwakError, __doc__  # noqa: F401
