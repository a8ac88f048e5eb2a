from .commands import *
from .app import *
from .report import *
