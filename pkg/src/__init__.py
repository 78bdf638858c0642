# src/__init__.py
"""stretchlat - lattice points in optimally stretched convex bodies of finite type"""

__version__ = "1.0.0"
__author__ = "stretchlat developers"
