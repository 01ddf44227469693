"""
Gap-Acceptance Queue Toolkit - Source Code
M^X/SM2/1 queue analysis and simulation for minor-road delays
"""

__version__ = "1.0.0"
__author__ = "Gap Acceptance Team"
__email__ = "contact@gapqueue.org"
