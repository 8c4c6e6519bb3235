"""J2 elastoplasticity with isotropic hardening: radial return and tangents.

Voigt convention throughout: component order (xx, yy, zz, xy, yz, zx), stress
plain, strain with engineering shear (gamma = 2*eps). Equivalent stress is
von Mises, q = sqrt(3/2 s:s), and the yield function is
f = q - sigma_y - R(p) with R the hardening function of the equivalent
plastic strain p. The discrete update is a backward-Euler radial return with
the algorithmically consistent tangent.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import NumericError

__all__ = [
    "LinearHardening",
    "PowerHardening",
    "Material",
    "PlasticState",
    "von_mises",
    "return_mapping",
    "return_map_batch",
]

# dev() acting on an engineering-strain Voigt vector, giving tensor components
_DEV_ENG = np.array([
    [2 / 3, -1 / 3, -1 / 3, 0, 0, 0],
    [-1 / 3, 2 / 3, -1 / 3, 0, 0, 0],
    [-1 / 3, -1 / 3, 2 / 3, 0, 0, 0],
    [0, 0, 0, 0.5, 0, 0],
    [0, 0, 0, 0, 0.5, 0],
    [0, 0, 0, 0, 0, 0.5],
])

_NEWTON_MAX_ITERS = 50
_NEWTON_RTOL = 1e-14


@dataclass(frozen=True)
class LinearHardening:
    """R(p) = H p."""

    H: float

    def R(self, p):
        return self.H * p

    def dR(self, p):
        return self.H * np.ones_like(p)


@dataclass(frozen=True)
class PowerHardening:
    """R(p) = H p**n with 0 < n <= 1."""

    H: float
    n: float

    def __post_init__(self):
        if not 0.0 < self.n <= 1.0:
            raise ValueError(f"power-hardening exponent must be in (0, 1], got {self.n}")

    def R(self, p):
        return self.H * np.power(p, self.n)

    def dR(self, p):
        return self.H * self.n * np.power(p, self.n - 1.0)


@dataclass(frozen=True)
class Material:
    """Isotropic elasticity plus J2 yield surface."""

    youngs_modulus: float  # Pa
    poisson: float
    sigma_y: float  # Pa
    hardening: LinearHardening | PowerHardening

    def __post_init__(self):
        if self.youngs_modulus <= 0.0:
            raise ValueError("Young's modulus must be positive")
        if not 0.0 < self.poisson < 0.5:
            raise ValueError("Poisson ratio must lie in (0, 0.5)")
        if self.sigma_y <= 0.0:
            raise ValueError("initial yield stress must be positive")
        if self.hardening.H < 0.0:
            raise ValueError("hardening modulus must be nonnegative")

    @property
    def shear_modulus(self) -> float:
        return self.youngs_modulus / (2.0 * (1.0 + self.poisson))

    @property
    def lame_lambda(self) -> float:
        e, nu = self.youngs_modulus, self.poisson
        return e * nu / ((1.0 + nu) * (1.0 - 2.0 * nu))

    def elasticity_matrix(self) -> np.ndarray:
        """6x6 Voigt elasticity matrix (engineering shear strains)."""
        lam, g = self.lame_lambda, self.shear_modulus
        d = np.zeros((6, 6))
        d[:3, :3] = lam
        d[np.diag_indices(3)] += 2.0 * g
        d[3:, 3:] = np.eye(3) * g
        return d

    def with_params(self, sigma_y: float | None = None, H: float | None = None) -> "Material":
        """Copy with selected parameters replaced (used by grid bindings)."""
        hard = self.hardening if H is None else replace(self.hardening, H=H)
        return replace(self, sigma_y=self.sigma_y if sigma_y is None else sigma_y,
                       hardening=hard)


@dataclass
class PlasticState:
    """Per-Gauss-point history: plastic strain (Voigt) and equivalent plastic strain."""

    eps_p: np.ndarray  # (n_points, 6), engineering shear components
    p_eq: np.ndarray  # (n_points,)

    @classmethod
    def zeros(cls, n_points: int) -> "PlasticState":
        return cls(np.zeros((n_points, 6)), np.zeros(n_points))

    def copy(self) -> "PlasticState":
        return PlasticState(self.eps_p.copy(), self.p_eq.copy())


def von_mises(stress: np.ndarray) -> np.ndarray:
    """Von Mises equivalent stress of Voigt stresses (..., 6)."""
    s = np.asarray(stress, dtype=np.float64)
    sxx, syy, szz = s[..., 0], s[..., 1], s[..., 2]
    sxy, syz, szx = s[..., 3], s[..., 4], s[..., 5]
    return np.sqrt(0.5 * ((sxx - syy) ** 2 + (syy - szz) ** 2 + (szz - sxx) ** 2)
                   + 3.0 * (sxy ** 2 + syz ** 2 + szx ** 2))


def _solve_consistency(material: Material, q_tr: np.ndarray, p_n: np.ndarray) -> np.ndarray:
    """Solve q_tr - 3G dp - sigma_y - R(p_n + dp) = 0 for dp > 0.

    Closed form for linear hardening; safeguarded Newton (bisection bracket)
    for power hardening, whose derivative blows up at p = 0.
    """
    g3 = 3.0 * material.shear_modulus
    f_tr = q_tr - material.sigma_y - material.hardening.R(p_n)
    if isinstance(material.hardening, LinearHardening):
        return f_tr / (g3 + material.hardening.H)

    lo = np.zeros_like(f_tr)
    hi = f_tr / g3  # root of the hardening-free equation, always an upper bound
    dp = 0.5 * hi
    for _ in range(_NEWTON_MAX_ITERS):
        p = p_n + dp
        phi = q_tr - g3 * dp - material.sigma_y - material.hardening.R(p)
        if np.all(np.abs(phi) <= _NEWTON_RTOL * np.maximum(q_tr, material.sigma_y)):
            return dp
        lo = np.where(phi > 0.0, dp, lo)
        hi = np.where(phi < 0.0, dp, hi)
        dphi = -g3 - material.hardening.dR(np.maximum(p, 1e-300))
        step = dp - phi / dphi
        inside = (step > lo) & (step < hi)
        dp = np.where(inside, step, 0.5 * (lo + hi))
    raise NumericError(
        "radial-return consistency equation did not converge in "
        f"{_NEWTON_MAX_ITERS} iterations (q_tr={np.max(q_tr):.6e}, "
        f"p_n={np.max(p_n):.6e}, material={material})"
    )


def return_map_batch(
    material: Material,
    eps_elastic_trial: np.ndarray,
    p_n: np.ndarray,
    want_tangent: bool = True,
):
    """Vectorized radial return over a batch of points.

    Parameters
    ----------
    eps_elastic_trial : (n, 6) trial elastic strain, i.e. the total strain at
        the end of the increment minus the plastic strain carried in from the
        previous step (engineering shear components).
    p_n : (n,) equivalent plastic strain at the start of the increment.

    Returns
    -------
    stress : (n, 6); delta_eps_p : (n, 6); p_new : (n,);
    tangent : (n, 6, 6) or None; yielded : (n,) bool mask.
    """
    eps = np.atleast_2d(np.asarray(eps_elastic_trial, dtype=np.float64))
    p_n = np.asarray(p_n, dtype=np.float64).reshape(-1)
    n = eps.shape[0]
    d_el = material.elasticity_matrix()
    g = material.shear_modulus

    stress = eps @ d_el.T
    s_dev = stress.copy()
    mean = stress[:, :3].mean(axis=1)
    s_dev[:, :3] -= mean[:, None]
    q_tr = von_mises(stress)
    f_tr = q_tr - material.sigma_y - material.hardening.R(p_n)
    yielded = f_tr > 0.0

    delta_eps_p = np.zeros_like(eps)
    p_new = p_n.copy()
    tangent = np.broadcast_to(d_el, (n, 6, 6)).copy() if want_tangent else None
    if not yielded.any():
        return stress, delta_eps_p, p_new, tangent, yielded

    idx = np.where(yielded)[0]
    q = q_tr[idx]
    dp = _solve_consistency(material, q, p_n[idx])
    nhat = s_dev[idx] / q[:, None]  # s_tr / q_tr, Voigt stress-like
    # Flow: delta_eps_p = dp * (3/2) s/q; engineering shear doubles off-diagonals.
    flow = 1.5 * nhat
    flow[:, 3:] *= 2.0
    delta_eps_p[idx] = dp[:, None] * flow
    stress[idx] -= (3.0 * g * dp / q)[:, None] * s_dev[idx]
    p_new[idx] = p_n[idx] + dp

    if want_tangent:
        h_prime = material.hardening.dR(np.maximum(p_new[idx], 1e-300))
        beta = 3.0 * g * dp / q  # in [0, 1)
        gamma = 3.0 * g / (3.0 * g + h_prime)
        nn = np.einsum("ki,kj->kij", nhat, nhat)
        tangent[idx] -= (2.0 * g * beta)[:, None, None] * _DEV_ENG
        tangent[idx] -= (3.0 * g * (gamma - beta))[:, None, None] * nn
    return stress, delta_eps_p, p_new, tangent, yielded


def return_mapping(material: Material, strain_total: np.ndarray, state: PlasticState,
                   point: int = 0):
    """Radial return at a single point.

    ``strain_total`` is the total strain at the end of the increment; the
    trial elastic strain is formed against the plastic strain stored in
    ``state`` at ``point``. Returns (stress, delta_eps_p, new_p_eq, tangent).
    """
    eps_tr = np.asarray(strain_total, dtype=np.float64) - state.eps_p[point]
    stress, deps_p, p_new, tangent, _ = return_map_batch(
        material, eps_tr[None, :], state.p_eq[point:point + 1])
    return stress[0], deps_p[0], float(p_new[0]), tangent[0]
