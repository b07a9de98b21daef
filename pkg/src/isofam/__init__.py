"""Numerical analysis of isotropic surfaces in spheres and Euclidean space.

Higher fundamental forms and curvature ellipses, isotropy certificates,
the associated family of isometric minimal immersions, polar surfaces,
period monodromies and moduli of closing angles, and congruence tests.
"""

__version__ = "0.1.0"
