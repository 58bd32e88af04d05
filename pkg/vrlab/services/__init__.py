from .scene_service import SceneService
from .coefficient_service import CoefficientService
from .representation_service import RepresentationService
from .skorohod_service import SkorohodService
from .vrbdsde_service import VrbdsdeService
from .analysis_service import AnalysisService

__all__ = [
    "SceneService", "CoefficientService", "RepresentationService",
    "SkorohodService", "VrbdsdeService", "AnalysisService",
]
