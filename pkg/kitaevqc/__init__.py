from kitaevqc.core import KitaevRunner
from kitaevqc.models import *
from kitaevqc.qsim import Circuit, Gate, PauliString, PauliSum, StateVector
from kitaevqc.storage import *
from kitaevqc import __version__
