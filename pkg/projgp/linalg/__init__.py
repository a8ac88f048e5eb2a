from .dense import *
from .krylov import *
from .operators import *
from .structured import *
