"""
Core Queueing Components
Major-road process, service transforms, queue chains, delays, approximation and simulation
"""

from .phase_process import PhaseProcess
from .gap_service import BehaviorKind, BehaviorModel, ServiceTransform
from .queue_core import BatchDistribution, QueueSolution
from .delay import DelayAnalysis, analyze_delay
from .simulator import SimConfig

__all__ = ['PhaseProcess', 'BehaviorKind', 'BehaviorModel', 'ServiceTransform',
           'BatchDistribution', 'QueueSolution', 'DelayAnalysis', 'analyze_delay', 'SimConfig']
