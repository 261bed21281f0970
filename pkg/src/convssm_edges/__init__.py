"""
convssm-edges - Training-free edge detection with a convolutional state-space scanner
"""

__version__ = "0.1.0"
