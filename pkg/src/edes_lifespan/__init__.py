"""Numerical toolkit for blow-up and lifespan of semilinear waves
``u_tt - t^{-2k} Lap u = t^{1-p}|u|^p`` on generalized Einstein--de Sitter
backgrounds."""

__version__ = "0.1.0"
