"""Willmore Euler-Lagrange residuals, first variation, holomorphic residuals.

The Euler-Lagrange operator is evaluated in three displays:

* local: 2 psi_1b1b + (Ric(e,e)/4 + Hbar psibar + H phibar) psi
         + K(eb,nb,eb,nb) psibar / 4 + 2 phibar_11
         + (Ric(eb,eb)/4 + H psi + Hbar phi) phibar + K(e,nb,e,nb) phi / 4,
* global: Re[((nabla-perp)^2 B + Ric (x) B / 2)(e,e,eb,eb) + 2 A-ring(Hvec)
         + W(e, B(eb,eb), e)-perp], whose n-component equals twice the local
         display (the factor on the A-ring term is fixed by that equivalence),
* minimal: the curvature-only display valid for minimal surfaces in locally
  symmetric ambients.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .ambient import AmbientModel, contract4
from .errors import ConfigError, PreconditionError
from .surface import (Differentiator, FrameField, InvariantField, SurfaceJet,
                      build_frame, interior_mask, invariant_fields,
                      surface_from_grid)

Array = np.ndarray

MINIMALITY_TOL = 1e-8


# ---------------------------------------------------------------------------
# Euler-Lagrange residuals
# ---------------------------------------------------------------------------

@dataclass
class ELReport:
    residual_local: Array
    residual_global_n: Array          # <global residual vector, n>
    residual_minimal: Optional[Array]
    sup_norms: dict

    def as_dict(self) -> dict:
        return {"sup_norms": {k: float(v) for k, v in self.sup_norms.items()}}


def _frame_tensors(inv: InvariantField, ambient: AmbientModel):
    fr = inv.frame
    k = ambient.riemann(fr.jet.x)
    ric = ambient.ricci(fr.jet.x)
    w = ambient.weyl(fr.jet.x)
    return k, ric, w


def el_local(inv: InvariantField, ambient: AmbientModel) -> Array:
    k, ric, _ = _frame_tensors(inv, ambient)
    e, n = inv.frame.e, inv.frame.n
    eb, nb = np.conj(e), np.conj(n)
    ric_ee = np.einsum("...ij,...i,...j->...", ric, e, e)
    ric_ebeb = np.conj(ric_ee)
    h, phi, psi = inv.H, inv.phi, inv.psi
    hb, phib, psib = np.conj(h), np.conj(phi), np.conj(psi)
    phib11 = np.conj(inv.phi1b1b)
    return (2 * inv.psi1b1b + (0.25 * ric_ee + hb * psib + h * phib) * psi
            + 0.25 * contract4(k, eb, nb, eb, nb) * psib
            + 2 * phib11 + (0.25 * ric_ebeb + h * psi + hb * phi) * phib
            + 0.25 * contract4(k, e, nb, e, nb) * phi)


def a_ring(inv: InvariantField, a: Array):
    """n- and nbar-coefficients of A-ring(xi) for xi = (a nbar + abar n)/2."""
    phi, psi = inv.phi, inv.psi
    phib, psib = np.conj(phi), np.conj(psi)
    ab = np.conj(a)
    c_n = (ab * psib + a * phib) * psi + (a * psi + ab * phi) * phib
    c_nb = (ab * psib + a * phib) * phi + (a * psi + ab * phi) * psib
    return c_n, c_nb


def el_global_n(inv: InvariantField, ambient: AmbientModel) -> Array:
    """<Re[T], n> for the globally invariant display; equals 2 * el_local."""
    k, ric, w = _frame_tensors(inv, ambient)
    e, n = inv.frame.e, inv.frame.n
    eb, nb = np.conj(e), np.conj(n)
    h, phi, psi = inv.H, inv.phi, inv.psi
    ric_ee = np.einsum("...ij,...i,...j->...", ric, e, e)

    # (nabla-perp)^2 B(e,e,eb,eb) = 8 (conj(psi_1b1b) nbar + conj(phi_1b1b) n)
    t_n = 8 * np.conj(inv.phi1b1b)
    t_nb = 8 * np.conj(inv.psi1b1b)
    # Ric (x) B / 2 with Ric(e,e) pairing the derivative slots
    t_n = t_n + ric_ee * psi
    t_nb = t_nb + ric_ee * phi
    # 2 A-ring(Hvec); the coefficient 2 makes the display match el_local
    hn, hnb = a_ring(inv, h)
    t_n = t_n + 2 * hn
    t_nb = t_nb + 2 * hnb
    # W(e, B(eb,eb), e)-perp with B(eb,eb) = 2 psi n + 2 phi nbar
    t_n = t_n + psi * contract4(w, e, n, e, nb) + phi * contract4(w, e, nb, e, nb)
    t_nb = t_nb + psi * contract4(w, e, n, e, n) + phi * contract4(w, e, nb, e, n)
    # n-coefficient of Re[T]
    return 0.5 * (t_n + np.conj(t_nb))


def el_minimal(inv: InvariantField, ambient: AmbientModel) -> Array:
    """Minimal-surface display K-terms; phi/psi-scaled, chart-frame based."""
    k, _, _ = _frame_tensors(inv, ambient)
    fr = inv.frame
    xz, xzb = fr.jet.x_z, fr.jet.x_zbar
    n = fr.n
    nb = np.conj(n)
    e2s = np.exp(2 * fr.sigma) if fr.sigma is not None else None
    if e2s is None:
        raise PreconditionError("minimal-form residual needs an isothermal chart")
    PHI, PSI = inv.phi * e2s, inv.psi * e2s
    return (contract4(k, xzb, nb, xzb, n) * PSI
            + contract4(k, xz, n, xz, nb) * np.conj(PHI)
            + contract4(k, xz, nb, xz, nb) * np.conj(PSI)
            + contract4(k, xzb, nb, xzb, nb) * PHI)


def el_residuals(inv: InvariantField, ambient: AmbientModel,
                 frame: Optional[FrameField] = None) -> ELReport:
    frame = frame or inv.frame
    local = el_local(inv, ambient)
    global_n = el_global_n(inv, ambient)
    minimal = None
    max_h = float(np.max(np.abs(inv.H)))
    if max_h < MINIMALITY_TOL and frame.mode == "isothermal":
        minimal = el_minimal(inv, ambient)
    mask = interior_mask(inv.jet.domain, inv.jet.shape)
    sup = {
        "local": float(np.max(np.abs(local))),
        "global": float(np.max(np.abs(global_n))),
        "local_interior": float(np.max(np.abs(local)[mask])),
        "cross_disagreement": float(np.max(np.abs(global_n - 2 * local))),
    }
    if minimal is not None:
        sup["minimal"] = float(np.max(np.abs(minimal)))
        sup["minimal_interior"] = float(np.max(np.abs(minimal)[mask]))
    return ELReport(residual_local=local, residual_global_n=global_n,
                    residual_minimal=minimal, sup_norms=sup)


# ---------------------------------------------------------------------------
# first variation
# ---------------------------------------------------------------------------

def first_variation(inv: InvariantField, ambient: AmbientModel, v: Array) -> float:
    """dW/dt for the normal variation V = (vbar n + v nbar)/2."""
    integrand = v * el_local(inv, ambient)
    return float(2.0 * np.real(inv.integrate(integrand)))


def flow_surface(jet: SurfaceJet, ambient: AmbientModel, frame: FrameField,
                 v: Array, t: float, nsteps: int = 48) -> SurfaceJet:
    """Rebuild the surface displaced along ambient geodesics by t V."""
    vvec = np.real(np.conj(v)[..., None] * frame.n)   # V = (vbar n + v nbar)/2
    if getattr(ambient, "name", "") == "flat-r4":
        x_new = jet.x + t * vvec
    else:
        x_new = ambient.geodesic_step(jet.x, vvec, t, nsteps=nsteps)
    return surface_from_grid(jet.domain, jet.shape, x_new,
                             name=f"{jet.name}+flow", linear_part=jet.linear_part,
                             chi_topology=jet.chi_topology)


def willmore_of(jet: SurfaceJet, ambient: AmbientModel) -> float:
    """W by direct quadrature of |B-ring|^2 (Gram-Schmidt pointwise route)."""
    frame = build_frame(jet, ambient, mode="gram-schmidt")
    inv = invariant_fields(jet, ambient, frame)
    return float(np.real(inv.integrate(inv.trace_free_sq)))


def first_variation_fd(jet: SurfaceJet, ambient: AmbientModel, frame: FrameField,
                       v: Array, steps=(1e-3, 5e-4)) -> float:
    """Geodesic finite-difference oracle for dW/dt with Richardson."""
    if jet.domain.kind != "torus":
        raise PreconditionError("finite-difference Willmore flow needs a closed grid")

    def central(h):
        wp = willmore_of(flow_surface(jet, ambient, frame, v, +h), ambient)
        wm = willmore_of(flow_surface(jet, ambient, frame, v, -h), ambient)
        return (wp - wm) / (2 * h)

    d1, d2 = central(steps[0]), central(steps[1])
    r = steps[0] / steps[1]
    return float((r ** 2 * d2 - d1) / (r ** 2 - 1.0))


def second_variation_fd(jet: SurfaceJet, ambient: AmbientModel, frame: FrameField,
                        v: Array, steps=(1e-2, 5e-3)) -> float:
    """Geodesic finite-difference oracle for d^2 W/dt^2 with Richardson."""
    w0 = willmore_of(jet, ambient)

    def central(h):
        wp = willmore_of(flow_surface(jet, ambient, frame, v, +h), ambient)
        wm = willmore_of(flow_surface(jet, ambient, frame, v, -h), ambient)
        return (wp - 2 * w0 + wm) / h ** 2

    d1, d2 = central(steps[0]), central(steps[1])
    r = steps[0] / steps[1]
    return float((r ** 2 * d2 - d1) / (r ** 2 - 1.0))


# ---------------------------------------------------------------------------
# holomorphic differentials for locally symmetric ambients
# ---------------------------------------------------------------------------

@dataclass
class HoloDiffReport:
    d2_residual: float
    d4_residual: float
    d2_coefficient_sup: float
    sphere_vanishing: dict

    def as_dict(self) -> dict:
        return {"d2_residual": self.d2_residual, "d4_residual": self.d4_residual,
                "d2_coefficient_sup": self.d2_coefficient_sup,
                "sphere_vanishing": dict(self.sphere_vanishing)}


def holomorphic_differential_residuals(inv: InvariantField, ambient: AmbientModel,
                                       require_minimal: bool = True) -> HoloDiffReport:
    """dbar-residuals of the quadratic and quartic differentials.

    The quadratic coefficient is K(x_z, n, x_z, nbar) + (Hbar PHI + H PSI);
    the quartic one is K(x_z, nbar, x_z, nbar) * K(x_z, n, x_z, n).  In a
    locally symmetric ambient these are holomorphic for parallel mean
    curvature (quadratic) and minimal surfaces (both), so holomorphicity is
    tested as a plain Cauchy-Riemann condition on the coefficients.
    """
    if not ambient.symmetry_flag:
        raise PreconditionError("holomorphic differentials need a locally "
                                "symmetric ambient (symmetry_flag)")
    fr = inv.frame
    if fr.mode != "isothermal":
        raise PreconditionError("holomorphic differentials need an isothermal chart")
    max_h = float(np.max(np.abs(inv.H)))
    if require_minimal and max_h >= MINIMALITY_TOL:
        raise PreconditionError(f"surface is not minimal (max |H| = {max_h:.2e}); "
                                "the quartic differential requires minimality")
    k = ambient.riemann(fr.jet.x)
    xz = fr.jet.x_z
    n, nb = fr.n, np.conj(fr.n)
    e2s = np.exp(2 * fr.sigma)
    f2 = (contract4(k, xz, n, xz, nb)
          + np.conj(inv.H) * inv.phi * e2s + inv.H * inv.psi * e2s)
    f4 = contract4(k, xz, nb, xz, nb) * contract4(k, xz, n, xz, n)
    diff = Differentiator(fr.jet.domain, fr.jet.shape)
    mask = interior_mask(fr.jet.domain, fr.jet.shape)
    d2 = float(np.max(np.abs(diff.d_zbar(f2))[mask]))
    d4 = float(np.max(np.abs(diff.d_zbar(f4))[mask]))
    coeff_sup = float(np.max(np.abs(f2)[mask]))
    scale = max(float(np.max(np.abs(f2))), 1.0)
    flags = {
        "quadratic_below_threshold": bool(coeff_sup < 1e-7),
        "quartic_below_threshold": bool(np.max(np.abs(f4)[mask]) < 1e-7),
    }
    return HoloDiffReport(d2_residual=d2, d4_residual=d4,
                          d2_coefficient_sup=coeff_sup, sphere_vanishing=flags)


# ---------------------------------------------------------------------------
# consistency identities used by the property suite
# ---------------------------------------------------------------------------

def codazzi_derivative_residuals(inv: InvariantField, ambient: AmbientModel):
    """Residuals of the differentiated Codazzi identities.

    8(2 phi_1b1b - H_11b) and 8(2 psi_1b1b - Hbar_11b) are matched against
    their curvature expansions; in a flat ambient both sides reduce to the
    plain derivative of the Codazzi equations.
    """
    fr = inv.frame
    diff = Differentiator(fr.jet.domain, fr.jet.shape)
    from .surface import covariant_derivatives
    _, h11b = covariant_derivatives(inv.H1, 1, -1, fr, diff)
    _, hb11b = covariant_derivatives(inv.Hb1, 1, 1, fr, diff)
    k = ambient.riemann(fr.jet.x)
    x = fr.jet.x
    e, n = fr.e, fr.n
    eb, nb = np.conj(e), np.conj(n)
    h, hb = inv.H, np.conj(inv.H)
    phib, psib = np.conj(inv.phi), np.conj(inv.psi)
    if ambient.symmetry_flag:
        nk_phi = np.zeros(fr.jet.shape, dtype=complex)
        nk_psi = np.zeros(fr.jet.shape, dtype=complex)
    else:
        gradk = np.stack([ambient.nabla_riemann(x, np.eye(4)[d]) for d in range(4)],
                         axis=-1)
        nk = np.einsum("...ijkld,...d->...ijkl", gradk, e)
        nk_phi = contract4(nk, eb, n, eb, e)
        nk_psi = contract4(nk, eb, nb, eb, e)
    rhs_phi = (nk_phi
               + h * (contract4(k, eb, e, nb, n) + contract4(k, eb, n, nb, e)
                      - contract4(k, eb, e, eb, e))
               + hb * contract4(k, eb, n, n, e)
               + 2 * (contract4(k, eb, n, eb, nb) * psib
                      + contract4(k, eb, n, eb, n) * phib))
    rhs_psi = (nk_psi
               + hb * (contract4(k, eb, e, n, nb) + contract4(k, eb, nb, n, e)
                       - contract4(k, eb, e, eb, e))
               + h * contract4(k, eb, nb, nb, e)
               + 2 * (contract4(k, eb, nb, eb, nb) * psib
                      + contract4(k, eb, nb, eb, n) * phib))
    res_phi = 8 * (2 * inv.phi1b1b - h11b) - rhs_phi
    res_psi = 8 * (2 * inv.psi1b1b - hb11b) - rhs_psi
    return res_phi, res_psi


def normal_laplacian_consistency(inv: InvariantField) -> float:
    """Compare the H_11b route to the normal Laplacian with a direct route.

    The direct route differentiates the ambient-valued mean curvature vector
    with chart derivatives, subtracts tangential projections, and never uses
    the weighted-derivative machinery.  The display under test reads
    lap-perp Hvec = 2(H_11b nbar + Hbar_1b1 n) + R1234 Hvec / 2, whose
    pairing with n is 4 H_11b + R1234 H / 2.
    """
    fr = inv.frame
    diff = Differentiator(fr.jet.domain, fr.jet.shape)
    from .surface import covariant_derivatives
    _, h11b = covariant_derivatives(inv.H1, 1, -1, fr, diff)
    lap_display_n = 4 * h11b + 0.5 * inv.R1234 * inv.H

    hvec = np.real(np.conj(inv.H)[..., None] * fr.n)
    g = fr.metric
    xu, xv = fr.jet.partial(1, 0), fr.jet.partial(0, 1)
    g2 = np.stack([
        np.stack([np.einsum("...ij,...i,...j->...", g, xu, xu),
                  np.einsum("...ij,...i,...j->...", g, xu, xv)], -1),
        np.stack([np.einsum("...ij,...i,...j->...", g, xv, xu),
                  np.einsum("...ij,...i,...j->...", g, xv, xv)], -1)], -2)
    ginv2 = np.linalg.inv(g2)

    def tangential_coeffs(vec):
        coef = np.stack([np.einsum("...ij,...i,...j->...", g, vec, b)
                         for b in (xu, xv)], -1)
        return np.einsum("...ab,...b->...a", ginv2, coef)

    def normal_part(vec):
        coef = tangential_coeffs(vec)
        return vec - coef[..., 0, None] * xu - coef[..., 1, None] * xv

    cov = {0: lambda w: fr.nabla_u(w, diff), 1: lambda w: fr.nabla_v(w, diff)}
    dperp = {a: normal_part(cov[a](hvec)) for a in (0, 1)}
    # tangential surface connection coefficients c_{ab}^e from nabla_a x_b
    basis = {0: xu, 1: xv}
    surf_gamma = {(a, b): tangential_coeffs(cov[a](basis[b]))
                  for a in (0, 1) for b in (0, 1)}
    he = {}
    for a in (0, 1):
        for b in (0, 1):
            c = surf_gamma[(a, b)]
            he[(a, b)] = (normal_part(cov[a](dperp[b]))
                          - c[..., 0, None] * dperp[0] - c[..., 1, None] * dperp[1])
    lap_direct = sum(ginv2[..., a, b, None] * he[(a, b)]
                     for a in (0, 1) for b in (0, 1))
    direct_n = np.einsum("...i,...ij,...j->...", lap_direct, g, fr.n)
    return float(np.max(np.abs(direct_n - lap_display_n)))
