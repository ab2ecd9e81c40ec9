"""Simulation and analysis toolkit for robotic transrectal ultrasound sweeps."""
__version__ = "0.1.0"
