from .optimizer import *
from .validation import *
