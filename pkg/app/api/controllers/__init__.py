"""
Controllers - Command logic between the click surface and the services
"""
from app.api.controllers.frontend_controller import FrontendController, frontend_controller
from app.api.controllers.alignment_controller import AlignmentController, alignment_controller
from app.api.controllers.training_controller import TrainingController, training_controller
from app.api.controllers.evaluation_controller import EvaluationController, evaluation_controller
from app.api.controllers.profiler_controller import ProfilerController, profiler_controller

__all__ = [
    'FrontendController',
    'AlignmentController',
    'TrainingController',
    'EvaluationController',
    'ProfilerController',
    'frontend_controller',
    'alignment_controller',
    'training_controller',
    'evaluation_controller',
    'profiler_controller',
]
