"""Rotation-symmetric bosonic states from coherent photon subtraction.

Two independent paths compute the same physics: a dense four-mode Fock
simulator (:mod:`rotsym.dense`) and closed-form expressions
(:mod:`rotsym.analytic`).
"""

__version__ = "0.1.0"

from .params import OutcomePattern, SqueezeParam, db_to_r, r_to_db, theta_from_reflectivity  # noqa: E402

__all__ = ["OutcomePattern", "SqueezeParam", "db_to_r", "r_to_db", "theta_from_reflectivity", "__version__"]
