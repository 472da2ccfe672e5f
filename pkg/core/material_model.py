"""
Pointwise material laws of the phase-field model.

All functions broadcast over leading axes: phase vectors have shape (..., N) and
strains (..., 2, 2).
"""

import numpy as np

from core.exceptions import InvalidInputError
from models.materials import CutoffParams, MaterialSet


def cutoff(s, p: CutoffParams):
    """
    σ_δ: identity on [0, 1], clamped to [-δ, 1+δ], with quadratic C¹ blends of
    half-width w = δ/2 centred on the two clamp points. Monotone and 1-Lipschitz.
    """
    s = np.asarray(s, dtype=float)
    d, w = p.delta, p.blend_width
    lo_a, lo_b = -d - w, -d + w
    hi_a, hi_b = 1.0 + d - w, 1.0 + d + w
    return np.select(
        [s <= lo_a, s < lo_b, s <= hi_a, s < hi_b],
        [-d, -d + (s - lo_a) ** 2 / (4.0 * w), s, 1.0 + d - (hi_b - s) ** 2 / (4.0 * w)],
        default=1.0 + d,
    )


def cutoff_deriv(s, p: CutoffParams):
    s = np.asarray(s, dtype=float)
    d, w = p.delta, p.blend_width
    lo_a, lo_b = -d - w, -d + w
    hi_a, hi_b = 1.0 + d - w, 1.0 + d + w
    return np.select(
        [s <= lo_a, s < lo_b, s <= hi_a, s < hi_b],
        [0.0, (s - lo_a) / (2.0 * w), 1.0, (hi_b - s) / (2.0 * w)],
        default=0.0,
    )


def density(phi, mats: MaterialSet, p: CutoffParams):
    """ρ(φ) = Σ_{i<N} ϱ_i σ_δ(φ_i) + ε²ϱ̃_N σ_δ(φ_N)."""
    return cutoff(phi, p) @ mats.scaled_densities


def density_deriv(phi, h, mats: MaterialSet, p: CutoffParams):
    """ρ′(φ)h."""
    return (cutoff_deriv(phi, p) * np.asarray(h, dtype=float)) @ mats.scaled_densities


def effective_lame(phi, mats: MaterialSet, p: CutoffParams) -> tuple[np.ndarray, np.ndarray]:
    """Lamé pair of C(φ) = Σ σ_δ(φ_i) C_i; C is linear in (λ, μ)."""
    lm = cutoff(phi, p) @ mats.lame
    return lm[..., 0], lm[..., 1]


def effective_lame_deriv(phi, h, mats: MaterialSet, p: CutoffParams) -> tuple[np.ndarray, np.ndarray]:
    """Lamé pair of C′(φ)h = Σ σ′_δ(φ_i) h_i C_i."""
    lm = (cutoff_deriv(phi, p) * np.asarray(h, dtype=float)) @ mats.lame
    return lm[..., 0], lm[..., 1]


def _isotropic_apply(lam, mu, strain):
    strain = np.asarray(strain, dtype=float)
    if strain.shape[-2:] != (2, 2):
        raise InvalidInputError(f"strain must be 2x2, got shape {strain.shape}")
    if not np.allclose(strain, np.swapaxes(strain, -1, -2), rtol=0.0,
                       atol=1e-12 * max(1.0, np.abs(strain).max())):
        raise InvalidInputError("strain must be symmetric")
    trace = strain[..., 0, 0] + strain[..., 1, 1]
    lam = np.asarray(lam)[..., None, None]
    mu = np.asarray(mu)[..., None, None]
    return 2.0 * mu * strain + lam * trace[..., None, None] * np.eye(2)


def elasticity_apply(phi, strain, mats: MaterialSet, p: CutoffParams):
    """C(φ)A = Σ σ_δ(φ_i)(2μ_i A + λ_i tr(A) I)."""
    lam, mu = effective_lame(phi, mats, p)
    return _isotropic_apply(lam, mu, strain)


def elasticity_deriv_apply(phi, h, strain, mats: MaterialSet, p: CutoffParams):
    """(C′(φ)h)A."""
    lam, mu = effective_lame_deriv(phi, h, mats, p)
    return _isotropic_apply(lam, mu, strain)


def bulk_potential(phi):
    """ψ0(φ) = ½(1 − |φ|²); the indicator of the Gibbs simplex is enforced by projection."""
    phi = np.asarray(phi, dtype=float)
    return 0.5 * (1.0 - np.sum(phi * phi, axis=-1))


def bulk_potential_deriv(phi):
    return -np.asarray(phi, dtype=float)
