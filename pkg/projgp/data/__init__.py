from .dataset import *
from .synthetic import *
