from ._tagcorr import *  # noqa: F401,F403
from ._tagcorr import __version__  # noqa: F401
