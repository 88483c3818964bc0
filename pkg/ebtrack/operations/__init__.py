from . import time
from . import utils
