"""
dbdsim - Double Bragg Mach-Zehnder interferometer simulator
"""

__version__ = "0.3.0"
