from .exact import *
from .interpolation import *
from .ski import *
