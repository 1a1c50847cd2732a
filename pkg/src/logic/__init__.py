from .controllers import HopController, ZeroTorqueController
from .nlp import create_backend
from .point_mass import PointMassSimulator
from .simulator import HybridSimulator


__all__ = [
    "HopController",
    "HybridSimulator",
    "PointMassSimulator",
    "ZeroTorqueController",
    "create_backend",
]
