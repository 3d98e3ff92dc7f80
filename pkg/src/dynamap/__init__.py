"""Headless simulator, tracker, planner and benchmark harness for active
mapping of a moving rigid object."""

__version__ = "0.1.0"
