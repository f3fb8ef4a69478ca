"""Renormalized asymptotic solutions of Burgers and KdV with weak
discontinuities and large initial gradients, with exact and numerical
oracles for checking them."""

from . import burgers, kdv, profiles, quadrature, specfun, verify
from .burgers import (AsymptoticParams, cole_hopf_reference, large_gradient_burgers, psi,
                      renorm_weak_burgers, u0_weak)
from .kdv import (PhiField, gp_dsw_Z, gp_renormalized, renorm_weak_kdv, sigma_of_y,
                  solve_faminskii)
from .profiles import InitialProfile, make_profile, verify_hypotheses
from .verify import ResidualReport, compare_fields, pde_residual, residual_sweep

__version__ = "0.1.0"

__all__ = [
    "AsymptoticParams", "InitialProfile", "PhiField", "ResidualReport", "burgers",
    "cole_hopf_reference", "compare_fields", "gp_dsw_Z", "gp_renormalized", "kdv",
    "large_gradient_burgers", "make_profile", "pde_residual", "profiles", "psi", "quadrature",
    "renorm_weak_burgers", "renorm_weak_kdv", "residual_sweep", "sigma_of_y", "solve_faminskii",
    "specfun", "u0_weak", "verify", "verify_hypotheses",
]
