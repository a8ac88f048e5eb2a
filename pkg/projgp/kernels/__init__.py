from .additive import *
from .stationary import *
