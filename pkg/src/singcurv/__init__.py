"""singcurv: distributional scalar curvature and Dirac operators for singular metrics."""

__version__ = "0.1.0"
