# All functions are made available from the package level
from .nums import *
from .strings import *
