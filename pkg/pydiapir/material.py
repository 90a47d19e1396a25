# pyDiapir Module - Constitutive Kernels
# -*- coding: utf-8 -*-
"""
 Mooney-Rivlin type viscoelastic solid, linearized about the present state.

 Constitutive equation (relative to the preferred configuration)
    T = -p I + s1 B + s2 B^-1 + lambda (tr D) I + 2 mu1 D + mu2 (DB + BD) + mu3 (DB^-1 + B^-1 D)
    B = F F^T,  D = sym(Fdot F^-1),  p(tau) = p(t) - beta tr H

 Small-on-large tensors at (F, 0)
    L(F)[H]       = beta (tr H) I + s1 (HB + BH^T) - s2 (B^-1 H + H^T B^-1)
    M(F)[Hdot]    = lambda (tr Hdot) I + M0 (Hdot + Hdot^T) + (Hdot + Hdot^T) M0
    M0            = (mu1 I + mu2 B + mu3 B^-1) / 2
    K(F, Te)[H]   = (tr H) Te - Te H^T + L(F)[H]

 Units: m, Pa, kg/m^3, Ma. Viscosities are in Pa Ma so M[Hdot] with Hdot in
 1/Ma lands in Pa.

 Every function broadcasts over leading axes. MaterialParams fields may be
 floats or arrays matching the leading axes of the tensors.
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Union

import numpy as np

from pydiapir import tensor_core as tc
from pydiapir.exceptions import ElementInverted, ValidationError

log = logging.getLogger(__name__)

TE_INCREMENT = "increment"
TE_RECOMPUTE = "recompute"
TE_MODES = (TE_INCREMENT, TE_RECOMPUTE)

# beta must exceed the elastic moduli by this factor when nearly incompressible
INCOMPRESSIBILITY_RATIO = 100.0

Scalar = Union[float, np.ndarray]


@dataclass(frozen=True)
class MaterialParams:
    rho0: Scalar
    s1: Scalar
    s2: Scalar
    lam: Scalar
    mu1: Scalar
    mu2: Scalar
    mu3: Scalar
    beta: Scalar
    nearly_incompressible: bool = True

    def validate(self):
        if not np.all(np.asarray(self.rho0) > 0):
            raise ValidationError("rho0 must be positive")
        if not np.all(np.asarray(self.beta) > 0):
            raise ValidationError("beta must be positive")
        for name in ("s1", "s2", "lam", "mu1", "mu2", "mu3"):
            if not np.all(np.isfinite(getattr(self, name))):
                raise ValidationError(f"{name} must be finite")
        if self.nearly_incompressible:
            stiffest = np.maximum(np.abs(self.s1), np.abs(self.s2))
            if not np.all(np.asarray(self.beta) >= INCOMPRESSIBILITY_RATIO * stiffest):
                raise ValidationError("beta must be much greater than |s1|, |s2| for a nearly "
                                      "incompressible material")
        return self

    def viscous(self):
        return any(np.any(np.asarray(getattr(self, k)) != 0) for k in ("lam", "mu1", "mu2", "mu3"))

    def without_viscosity(self):
        return dataclasses.replace(self, lam=0.0, mu1=0.0, mu2=0.0, mu3=0.0)

    def expand(self, axis=-1):
        """Insert a broadcast axis into every array field"""
        values = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            if f.name != "nearly_incompressible" and isinstance(v, np.ndarray):
                v = np.expand_dims(v, axis)
            values[f.name] = v
        return MaterialParams(**values)


@dataclass(frozen=True)
class PointState:
    """
    SLA state at quadrature points (one per element, leading axis = element)

    Args:
        F       = deformation gradient w.r.t. the initial configuration
        Te      = elastic Cauchy stress (Pa)
        p       = pressure (Pa)
        rho     = mass density (kg/m^3)
        H_prev  = previous step's relative displacement gradient
    """
    F: np.ndarray
    Te: np.ndarray
    p: np.ndarray
    rho: np.ndarray
    H_prev: np.ndarray

    def __len__(self):
        return int(np.shape(self.p)[0]) if np.ndim(self.p) else 1


def _s(x):
    # scalar or per-point array -> broadcastable against (..., 2, 2)
    return np.asarray(x, dtype=np.float64)[..., None, None]


def stack_params(params_by_region, region):
    """
    Per-element MaterialParams with array fields

    Args:
        params_by_region = {region tag: MaterialParams}
        region           = per-element region tags
    """
    region = np.asarray(region)
    values = {}
    for f in dataclasses.fields(MaterialParams):
        if f.name == "nearly_incompressible":
            continue
        column = np.zeros(region.shape, dtype=np.float64)
        for tag, m in params_by_region.items():
            column[region == int(tag)] = getattr(m, f.name)
        values[f.name] = column
    return MaterialParams(**values, nearly_incompressible=False)


def left_cauchy_green(F):
    F = np.asarray(F, dtype=np.float64)
    return F @ tc.transpose(F)


def elastic_stress(p, B, m):
    return -_s(p) * tc.IDENTITY + _s(m.s1) * B + _s(m.s2) * tc.inverse(B)


def elasticity_apply(F, H, m):
    B = left_cauchy_green(F)
    Binv = tc.inverse(B)
    Ht = tc.transpose(H)
    return (_s(m.beta) * _s(tc.trace(H)) * tc.IDENTITY
            + _s(m.s1) * (H @ B + B @ Ht)
            - _s(m.s2) * (Binv @ H + Ht @ Binv))


def viscosity_apply(F, Hdot, m):
    B = left_cauchy_green(F)
    Binv = tc.inverse(B)
    S = Hdot + tc.transpose(Hdot)
    M0 = 0.5 * (_s(m.mu1) * tc.IDENTITY + _s(m.mu2) * B + _s(m.mu3) * Binv)
    return _s(m.lam) * _s(tc.trace(Hdot)) * tc.IDENTITY + M0 @ S + S @ M0


def piola_elasticity_apply(F, Te, H, m):
    return _s(tc.trace(H)) * Te - Te @ tc.transpose(H) + elasticity_apply(F, H, m)


def linearized_piola_stress(st, H, Hdot, m):
    return st.Te + piola_elasticity_apply(st.F, st.Te, H, m) + viscosity_apply(st.F, Hdot, m)


def pressure_update(p, H, beta):
    return p - beta * tc.trace(H)


def density_update(rho, H):
    J = tc.det(tc.IDENTITY + np.asarray(H, dtype=np.float64))
    bad = np.flatnonzero(np.atleast_1d(J) <= 0)
    if bad.size:
        element = int(bad[0]) if np.ndim(J) else None
        raise ElementInverted(f"det(I+H) <= 0 at element {element}", element=element)
    return rho / J


def update_point_state(st, H, dt, m, mode=TE_INCREMENT):
    """
    Advance the point state by one relative displacement gradient H

    Args:
        st   = PointState at t_n
        H    = grad u in current coordinates
        dt   = time increment (Ma)
        m    = MaterialParams (scalar or per-point)
        mode = "increment" (Te + L(F)[H]) or "recompute" (Te from p' and B')
    """
    if dt <= 0:
        raise ValidationError("dt must be positive")
    H = np.asarray(H, dtype=np.float64)
    rho = density_update(st.rho, H)
    F = (tc.IDENTITY + H) @ st.F
    p = pressure_update(st.p, H, m.beta)
    if mode == TE_INCREMENT:
        Te = st.Te + elasticity_apply(st.F, H, m)
    elif mode == TE_RECOMPUTE:
        Te = elastic_stress(p, left_cauchy_green(F), m)
    else:
        raise ValidationError(f"unknown Te update mode '{mode}'")
    return PointState(F=F, Te=tc.sym(Te), p=p, rho=rho, H_prev=H.copy())


def constitutive_elastic(F, m):
    """
    T(F, 0); the pressure law p = -beta ln(det F) is the one whose
    rho dp/drho equals beta
    """
    B = left_cauchy_green(F)
    return _s(m.beta) * _s(np.log(tc.det(F))) * tc.IDENTITY + _s(m.s1) * B + _s(m.s2) * tc.inverse(B)


def constitutive_viscous(F, Fdot, m):
    B = left_cauchy_green(F)
    Binv = tc.inverse(B)
    D = tc.sym(Fdot @ tc.inverse(F))
    return (_s(m.lam) * _s(tc.trace(D)) * tc.IDENTITY
            + 2.0 * _s(m.mu1) * D
            + _s(m.mu2) * (D @ B + B @ D)
            + _s(m.mu3) * (D @ Binv + Binv @ D))


def constitutive_stress(F, Fdot, m):
    """Full nonlinear map T(F, Fdot)"""
    return constitutive_elastic(F, m) + constitutive_viscous(F, Fdot, m)


def fd_oracle(F, direction, m, h=1e-6, kind="elastic"):
    """
    Central-difference derivative of constitutive_stress at (F, 0)

    Args:
        F         = deformation gradient
        direction = H (kind="elastic", increment HF) or Hdot (kind="viscous", Fdot = Hdot F)
        h         = step size
    """
    if h <= 0:
        raise ValidationError("finite-difference step must be positive")
    F = np.asarray(F, dtype=np.float64)
    step = np.asarray(direction, dtype=np.float64) @ F
    zero = np.zeros_like(F)
    if kind == "elastic":
        plus = constitutive_stress(F + h * step, zero, m)
        minus = constitutive_stress(F - h * step, zero, m)
    elif kind == "viscous":
        # the elastic part does not depend on Fdot and cancels exactly
        plus = constitutive_viscous(F, h * step, m)
        minus = constitutive_viscous(F, -h * step, m)
    else:
        raise ValidationError(f"unknown oracle kind '{kind}'")
    return (plus - minus) / (2.0 * h)


def _relative_error(approx, exact):
    scale = max(np.linalg.norm(exact), 1e-300)
    return float(np.linalg.norm(approx - exact) / scale)


def random_deformation(rng, radius=0.5):
    """F = I + E with ||E||_F <= radius"""
    E = rng.standard_normal((2, 2))
    E *= radius * rng.uniform(0.0, 1.0) / np.linalg.norm(E)
    return tc.IDENTITY + E


def oracle_suite(samples=100, seed=0, params=None, h=1e-6):
    """
    Compare L and M against fd_oracle over random states

    Returns {'elasticity': max relative error, 'viscosity': max relative error, 'samples': n}
    """
    rng = np.random.default_rng(seed)
    if params is None:
        params = [
            MaterialParams(rho0=2.2e3, s1=0.0, s2=-0.2e3, lam=-10.0e3, mu1=15.0e3, mu2=0.0, mu3=0.0, beta=1e9),
            MaterialParams(rho0=3.0e3, s1=2.5e3, s2=-7.5e3, lam=0.0, mu1=0.0, mu2=0.0, mu3=0.0, beta=1e9),
            MaterialParams(rho0=1.0e3, s1=1.3, s2=-0.7, lam=0.4, mu1=2.0, mu2=0.6, mu3=-0.3, beta=5.0,
                           nearly_incompressible=False),
        ]
    worst = {"elasticity": 0.0, "viscosity": 0.0}
    for k in range(samples):
        m = params[k % len(params)]
        F = random_deformation(rng)
        H = rng.standard_normal((2, 2))
        Hdot = rng.standard_normal((2, 2))
        worst["elasticity"] = max(worst["elasticity"],
                                  _relative_error(elasticity_apply(F, H, m), fd_oracle(F, H, m, h, "elastic")))
        if m.viscous():
            worst["viscosity"] = max(worst["viscosity"],
                                     _relative_error(viscosity_apply(F, Hdot, m),
                                                     fd_oracle(F, Hdot, m, h, "viscous")))
    log.debug(f"oracle suite: {samples} samples, max errors {worst}")
    return dict(worst, samples=samples)
