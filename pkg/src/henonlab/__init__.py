"""Numerical laboratory for holomorphic families of Hénon compositions.

Modules
-------
core
    Compositions, families, evaluation, derivatives and inverses.
green
    Escape-rate (Green) functions and K± membership.
periodic
    Newton census of periodic orbits, multipliers and types.
continuation
    Tracking orbits in the parameter, crossings, collisions, distortion.
manifolds
    Stable/unstable parameterizations, size certificates, Koebe audits, areas.
regularity
    Intersections, exposure, regular-point certificates and audits.
cli
    Command-line front end.
"""
__version__ = "0.1.0"
