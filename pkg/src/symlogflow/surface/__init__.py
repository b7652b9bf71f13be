"""Translation surfaces: exact geodesics, saddle connections, cylinders and counting."""

from .model import *  # noqa: F401,F403
from .trace import *  # noqa: F401,F403
from .saddles import *  # noqa: F401,F403
from .cylinders import *  # noqa: F401,F403
from .counting import *  # noqa: F401,F403
