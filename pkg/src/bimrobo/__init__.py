"""From a 4D BIM project and a robot knowledge base to a simulated frame-installation run."""

__version__ = "0.1.0"
