"""Second variation of the Willmore functional and Hessian spectra.

Two independent evaluators of the second variation are provided: the
pre-simplification form, which references only frame-level scalars, and the
geometric form written through the normal Laplacian, the trace-free shape
section, and the Weyl tensor.  Both displays list each non-self-conjugate
term group once for the group plus its conjugate, so the evaluators apply
2 Re(...) to those groups and keep the manifestly real groups as written;
with that reading both reduce exactly to the flat-torus quadratic form, and
the six-parameter family generated by the ambient isometries is null.

Hessian spectra on the Clifford torus use real Fourier modes over the dual
lattice, assembled by polarization from the audited quadratic evaluator.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .ambient import AmbientModel, contract4
from .catalog import CLIFFORD_LATTICE
from .errors import ConfigError, NumericError, PreconditionError
from .surface import (Differentiator, FrameField, InvariantField, SurfaceJet,
                      covariant_derivatives, quadrature_weights)
from .willmore import el_local

Array = np.ndarray


# ---------------------------------------------------------------------------
# variation fields
# ---------------------------------------------------------------------------

@dataclass
class VariationField:
    """Normal variation scalar v with covariant derivatives.

    The vector field is V = (vbar n + v nbar)/2; v carries the weights
    (p, q) = (0, -1) so that D v = dv + i theta_34 v.
    """

    v: Array
    v1: Array
    v1b: Array
    v11: Array
    v11b: Array
    v1b1: Array
    v1b1b: Array

    @staticmethod
    def build(v: Array, frame: FrameField) -> "VariationField":
        diff = Differentiator(frame.jet.domain, frame.jet.shape)
        v = np.asarray(v, dtype=complex)
        v1, v1b = covariant_derivatives(v, 0, -1, frame, diff)
        v11, v11b = covariant_derivatives(v1, 1, -1, frame, diff)
        v1b1, v1b1b = covariant_derivatives(v1b, -1, -1, frame, diff)
        return VariationField(v, v1, v1b, v11, v11b, v1b1, v1b1b)

    def ricci_identity_residual(self, inv: InvariantField) -> Array:
        return self.v11b - self.v1b1 + 0.5 * inv.R1234 * self.v


# ---------------------------------------------------------------------------
# the general (pre-simplification) second-variation form
# ---------------------------------------------------------------------------

def second_variation_general(inv: InvariantField, ambient: AmbientModel,
                             vf: VariationField, check_willmore: bool = True):
    """Both second-variation evaluations: (general form, geometric form)."""
    fr = inv.frame
    if check_willmore:
        el_sup = float(np.max(np.abs(el_local(inv, ambient))))
        if el_sup >= 1e-6:
            raise PreconditionError(
                f"surface is not Willmore (EL residual {el_sup:.2e}); the second "
                "variation formula is only valid at critical points")
    general = _second_variation_scalar_form(inv, ambient, vf)
    geometric = _second_variation_geometric_form(inv, ambient, vf)
    return general, geometric


def _second_variation_scalar_form(inv: InvariantField, ambient: AmbientModel,
                                  vf: VariationField) -> float:
    fr = inv.frame
    k = ambient.riemann(fr.jet.x)
    ric = ambient.ricci(fr.jet.x)
    e, n = fr.e, fr.n
    eb, nb = np.conj(e), np.conj(n)

    def K(*args):
        return contract4(k, *args)

    def Ric(a, b):
        return np.einsum("...ij,...i,...j->...", ric, a, b)

    h, phi, psi = inv.H, inv.phi, inv.psi
    hb, phib, psib = np.conj(h), np.conj(phi), np.conj(psi)
    phi1b, psi1b = inv.phi1b, inv.psi1b
    phib1, psib1 = np.conj(phi1b), np.conj(psi1b)
    v, vb = vf.v, np.conj(vf.v)
    v1, v1b = vf.v1, vf.v1b
    v11, v11b, v1b1, v1b1b = vf.v11, vf.v11b, vf.v1b1, vf.v1b1b
    aphi2 = np.abs(phi) ** 2
    apsi2 = np.abs(psi) ** 2

    c = np.zeros(fr.jet.shape, dtype=complex)
    # second-derivative groups
    c += v11 * (0.25 * (vb * K(e, nb, e, n) + v * K(e, nb, e, nb))
                + hb * (v * phib + vb * psib) + 0.5 * vb * (h * phib + hb * psib))
    c += v1b1b * (0.25 * (vb * K(eb, nb, eb, n) + v * K(eb, nb, eb, nb))
                  + hb * (v * psi + vb * phi) + 0.5 * vb * (hb * phi + h * psi))
    c += v11b * (0.5 * vb * (apsi2 + 3 * aphi2) + 2 * v * psi * phib)
    c += v1b1 * (0.5 * vb * (aphi2 + 3 * apsi2) + 2 * v * psi * phib)
    # first-derivative groups
    c += v1 * ((0.5 * v * phib + 0.25 * vb * psib) * Ric(eb, nb)
               + (3.0 / 8.0) * vb * phib * (K(e, eb, eb, n) - K(n, nb, eb, n))
               - 2 * psi1b * (v * phib + vb * psib)
               + vb * (phib * phi1b + psib * psi1b)
               - phib1 * h * vb + v1 * hb * phib)
    c += v1b * ((0.5 * v * psi + 0.25 * vb * phi) * Ric(e, nb)
                - (3.0 / 8.0) * vb * psi * (K(e, eb, e, n) + K(n, nb, e, n))
                - 2 * phib1 * (phi * vb + v * psi)
                + vb * (phi * phib1 + psi * psib1)
                - psi1b * h * vb + v1b * hb * psi)
    # v^2 group
    c += (v ** 2 / 32.0) * (
        4 * psi * phib * (K(e, n, eb, nb) + K(e, nb, eb, n))
        + (4 * Ric(nb, nb) + 64 * psi * phib + 8 * hb ** 2) * (apsi2 + aphi2)
        - 2 * hb * (psib * K(eb, nb, eb, nb) + phi * K(e, nb, e, nb))
        + 6 * h * (psi * K(e, nb, e, nb) + phib * K(eb, nb, eb, nb))
        + Ric(eb, eb) * K(e, nb, e, nb) + Ric(e, e) * K(eb, nb, eb, nb)
        + 48 * psi * phib * np.abs(h) ** 2 + 64 * phib1 * psi1b
        + 4 * phib1 * (K(e, eb, eb, nb) + K(n, nb, eb, nb))
        + 4 * psi1b * (K(n, nb, e, nb) - K(e, eb, e, nb)))
    # nabla K group (zero for locally symmetric ambients)
    if not ambient.symmetry_flag:
        x = fr.jet.x
        grad = np.stack([ambient.nabla_riemann(x, np.eye(4)[d]) for d in range(4)],
                        axis=-1)
        nk_n = np.einsum("...ijkld,...d->...ijkl", grad, n)
        nk_nb = np.conj(nk_n)

        def nabla_v_k(*args):
            return 0.5 * (vb * contract4(nk_n, *args) + v * contract4(nk_nb, *args))

        c += (v / 4.0) * (nabla_v_k(e, n, e, nb) * psi
                          + nabla_v_k(eb, nb, eb, nb) * psib
                          + nabla_v_k(eb, nb, eb, n) * phib
                          + nabla_v_k(e, nb, e, nb) * phi)

    # manifestly real (self-conjugate) groups
    r = np.zeros(fr.jet.shape)
    av2 = np.abs(v) ** 2
    r += (av2 / 32.0) * np.real(
        8 * (psi * phib * Ric(n, n) + phi * psib * Ric(nb, nb))
        + 4 * (K(e, n, eb, nb) + K(e, nb, eb, n)) * (apsi2 + aphi2)
        + 4 * h * (psib * K(eb, nb, eb, nb) + phi * K(e, nb, e, nb)
                   + 2 * phib * Ric(eb, eb) + 2 * psi * Ric(e, e))
        + 4 * hb * (psi * K(e, n, e, n) + phib * K(eb, n, eb, n)
                    + 2 * phi * Ric(e, e) + 2 * psib * Ric(eb, eb))
        + 48 * (h ** 2 * psi * phib + hb ** 2 * phi * psib)
        + 80 * np.abs(h) ** 2 * (apsi2 + aphi2)
        + 192 * apsi2 * aphi2 + 32 * (apsi2 ** 2 + aphi2 ** 2)
        + np.abs(K(e, nb, e, nb)) ** 2 + np.abs(K(e, n, e, n)) ** 2
        + 2 * np.abs(Ric(e, e)) ** 2
        - 64 * (np.abs(psi1b) ** 2 + np.abs(phi1b) ** 2)
        + 4 * psi1b * (K(e, eb, e, n) + K(n, nb, e, n))
        - 4 * psib1 * (K(e, eb, eb, nb) + K(n, nb, eb, nb))
        + 4 * phi1b * (K(e, eb, e, nb) - K(n, nb, e, nb))
        - 4 * phib1 * (K(e, eb, eb, n) - K(n, nb, eb, n)))
    r += 2 * (np.abs(v11) ** 2 + np.abs(v1b1b) ** 2) \
        - 4 * (np.abs(v1b) ** 2 * apsi2 + np.abs(v1) ** 2 * aphi2)

    integrand = r + 2 * np.real(c)
    return float(4.0 * np.real(inv.integrate(integrand)))


# ---------------------------------------------------------------------------
# the geometric second-variation form
# ---------------------------------------------------------------------------

def _second_variation_geometric_form(inv: InvariantField, ambient: AmbientModel,
                                     vf: VariationField) -> float:
    fr = inv.frame
    if not ambient.symmetry_flag:
        raise PreconditionError("geometric second variation implemented for "
                                "locally symmetric ambients only")
    k = ambient.riemann(fr.jet.x)
    ric = ambient.ricci(fr.jet.x)
    w = ambient.weyl(fr.jet.x)
    e, n = fr.e, fr.n
    eb, nb = np.conj(e), np.conj(n)
    e1 = (e + eb) / 2
    e2 = (e - eb) / 2j
    e3 = (n + nb) / 2
    e4 = (n - nb) / 2j

    def K(*args):
        return contract4(k, *args)

    def W(*args):
        return contract4(w, *args)

    def Ric(a, b):
        return np.einsum("...ij,...i,...j->...", ric, a, b)

    h, phi, psi = inv.H, inv.phi, inv.psi
    hb, phib, psib = np.conj(h), np.conj(phi), np.conj(psi)
    v, vb = vf.v, np.conj(vf.v)
    v1, v1b = vf.v1, vf.v1b
    v1_b = np.conj(v1b)    # (vbar)_1
    vb_1b = np.conj(v1)    # (vbar)_1bar
    v11, v1b1b = vf.v11, vf.v1b1b
    vb11 = np.conj(v1b1b)  # (vbar)_11

    k1212 = np.real(K(e1, e2, e1, e2))
    k1234 = np.real(K(e1, e2, e3, e4))

    # normal vectors as (n, nbar) coefficient pairs
    def pair_inner(a, b):
        """<xi, eta> for xi = a_n n + a_nb nbar (complex-bilinear)."""
        return 2 * (a[0] * b[1] + a[1] * b[0])

    # normal vectors stored as (n-coefficient, nbar-coefficient) pairs
    Vp = (vb / 2, v / 2)
    Hp = (hb / 2, h / 2)
    Bee = (2 * phib, 2 * psib)
    Bebeb = (2 * psi, 2 * phi)
    nev = (v1_b, v1)                                      # nabla_eb-perp V
    nB = (4 * np.conj(inv.phi1b), 4 * np.conj(inv.psi1b))  # nabla_eb-perp B(e,e)
    neB = (4 * inv.psi1b, 4 * inv.phi1b)                   # nabla_e-perp B(eb,eb)
    heV = (2 * vb11, 2 * v11)     # He V(ebar, ebar)
    ricperp_eb = (0.5 * Ric(eb, nb), 0.5 * Ric(eb, n))
    wperp = (0.5 * W(e, eb, eb, nb), 0.5 * W(e, eb, eb, n))

    a_delta = 2 * (vf.v11b + vf.v1b1)
    a_aring = 2 * ((vb * psib + v * phib) * phi + (v * psi + vb * phi) * psib)
    a_ric = 0.5 * (0.5 * (vb * K(e, n, eb, n) + v * K(e, nb, eb, n))
                   + 0.5 * (vb * K(eb, n, e, n) + v * K(eb, nb, e, n)))

    real_block = np.zeros(fr.jet.shape)
    real_block += np.abs(a_delta) ** 2
    real_block += -2 * k1212 * 2 * (np.abs(v1) ** 2 + np.abs(v1b) ** 2)
    real_block += 2 * np.real(a_delta * np.conj(a_aring))
    real_block += np.real(W(e, eb, nb, n) * v1 * vb_1b + W(e, eb, nb, nb) * v1 * v1b
                          + W(e, eb, n, n) * v1_b * vb_1b + W(e, eb, n, nb) * v1_b * v1b)
    wbb = 4 * np.real(psib * psi * W(e, eb, nb, n) + psib * phi * W(e, eb, nb, nb)
                      + phib * psi * W(e, eb, n, n) + phib * phi * W(e, eb, n, nb))
    real_block += -(np.abs(v) ** 2 / 8.0) * wbb
    real_block += np.real(a_ric * np.conj(a_aring))
    real_block += np.abs(a_aring) ** 2
    real_block += k1234 ** 2 * np.abs(v) ** 2

    cplx = np.zeros(fr.jet.shape, dtype=complex)
    heV_dot_V = pair_inner(heV, Vp)
    bee_dot_h = pair_inner(Bee, Hp)
    bee_dot_v = pair_inner(Bee, Vp)
    bebeb_dot_v = pair_inner(Bebeb, Vp)
    bebeb_dot_h = pair_inner(Bebeb, Hp)
    cplx += 0.5 * heV_dot_V * bee_dot_h
    cplx += pair_inner(heV, Hp) * bee_dot_v
    zn = heV[0] + 0.25 * Ric(eb, eb) * vb + 2 * hb * 0.5 * bebeb_dot_v \
        - 0.25 * vb * bebeb_dot_h
    znb = heV[1] + 0.25 * Ric(eb, eb) * v + 2 * (h / 2) * bebeb_dot_v \
        - 0.25 * v * bebeb_dot_h
    cplx += ((vb / 2) * zn * W(e, n, e, n) + (vb / 2) * znb * W(e, n, e, nb)
             + (v / 2) * zn * W(e, nb, e, n) + (v / 2) * znb * W(e, nb, e, nb))
    cplx += 0.5 * heV_dot_V * Ric(e, e)
    cplx += 0.125 * np.abs(Ric(e, e)) ** 2 * np.abs(v) ** 2
    # plain-tensor tail: <nabla_eb V (x) B(e,e), ...>
    cplx += (pair_inner(nev, ricperp_eb) * 0.5 * pair_inner(Bee, Vp)
             - 0.5 * pair_inner(nev, neB) * pair_inner(Bee, Vp)
             + 0.25 * pair_inner(nev, Vp) * pair_inner(Bee, neB))

    def twisted(a1, b1, a2, b2):
        return (pair_inner(a1, a2) * pair_inner(b1, b2)
                + pair_inner(a1, b1) * pair_inner(a2, b2)
                - pair_inner(a1, b2) * pair_inner(a2, b1))

    cplx += twisted(nev, Bee, tuple(0.25 * t for t in ricperp_eb), Vp)
    cplx += twisted(nev, Bee, Vp, tuple(0.75 * t for t in wperp))
    cplx += twisted(nev, Bee, tuple(0.5 * t for t in Hp), nev)
    cplx += -0.5 * twisted(nB, nev, Hp, Vp)

    def wedge_inner(a1, b1, a2, b2):
        return pair_inner(a1, a2) * pair_inner(b1, b2) \
            - pair_inner(a1, b2) * pair_inner(b1, a2)

    cplx += 0.5 * wedge_inner(wperp, Vp, Vp, nB)
    w_eb_h_eb_bee = (hb / 2) * (2 * phib * W(eb, n, eb, n) + 2 * psib * W(eb, n, eb, nb)) \
        + (h / 2) * (2 * phib * W(eb, nb, eb, n) + 2 * psib * W(eb, nb, eb, nb))
    cplx += 0.5 * np.abs(v) ** 2 * (Ric(e, e) * bebeb_dot_h - w_eb_h_eb_bee)
    nB_conj = (np.conj(nB[1]), np.conj(nB[0]))
    cplx += -0.25 * (pair_inner(Vp, Vp) * pair_inner(nB, nB_conj)
                     - pair_inner(Vp, nB_conj) * pair_inner(nB, Vp))
    w_env = 0.5 * (vb * W(e, nb, e, n) + v * W(e, nb, e, nb))
    w_env = 0.5 * (vb * W(e, n, e, n) + v * W(e, n, e, nb))
    cplx += 0.25 * np.abs(w_env) ** 2 + 0.25 * np.abs(w_env) ** 2
    b_sq = 8 * (np.abs(psi) ** 2 + np.abs(phi) ** 2)
    h_dot_v = np.real(h * vb)
    cplx += 0.5 * b_sq * (np.abs(h) ** 2 * np.abs(v) ** 2 - h_dot_v ** 2)
    cplx += 3 * h_dot_v * np.real(a_aring * np.conj(h))

    integrand = real_block + 2 * np.real(cplx)
    return float(np.real(inv.integrate(integrand)))


# ---------------------------------------------------------------------------
# Clifford-torus reduced forms
# ---------------------------------------------------------------------------

def _require_clifford(jet: SurfaceJet):
    if jet.domain.kind != "torus" or not np.allclose(jet.domain.lattice,
                                                     CLIFFORD_LATTICE):
        raise PreconditionError("this reduced form is specific to the flat "
                                "Clifford-torus lattice")


def clifford_second_variation(vf: VariationField, inv: InvariantField) -> float:
    """Reduced Willmore second variation on the Clifford torus.

    4 int (4 |v_11b|^2 + 6 |v|^2 - 3 v_1b^2 - 3 vbar_1^2 - 4 |v_1|^2) dA,
    the squares being squares of complex scalars with the real part of the
    whole integrand taken.
    """
    _require_clifford(inv.jet)
    integrand = (4 * np.abs(vf.v11b) ** 2 + 6 * np.abs(vf.v) ** 2
                 - 3 * np.real(vf.v1b ** 2 + np.conj(vf.v1) ** 2)
                 - 4 * np.abs(vf.v1) ** 2)
    return float(4.0 * np.real(inv.integrate(integrand)))


def wminus_second_variation(vf: VariationField, inv: InvariantField) -> float:
    """Reduced second variation of W- on the Clifford torus:
    int (16 |v_11b|^2 + 12 |v|^2 - 32 |v_1|^2) dA."""
    _require_clifford(inv.jet)
    integrand = (16 * np.abs(vf.v11b) ** 2 + 12 * np.abs(vf.v) ** 2
                 - 32 * np.abs(vf.v1) ** 2)
    return float(np.real(inv.integrate(integrand)))


def quadratic_form_Q(alpha: Array, beta: Array, inv: InvariantField) -> float:
    """Q(alpha, beta) = int (lap a lap b + 24 a b - 10 <grad a, grad b>) dA."""
    _require_clifford(inv.jet)
    fr = inv.frame
    diff = Differentiator(fr.jet.domain, fr.jet.shape)
    e2s = np.exp(2 * fr.sigma)
    lap_a = (diff.deriv(alpha, 2, 0) + diff.deriv(alpha, 0, 2)) / e2s
    lap_b = (diff.deriv(beta, 2, 0) + diff.deriv(beta, 0, 2)) / e2s
    grad = (diff.d_u(alpha) * diff.d_u(beta) + diff.d_v(alpha) * diff.d_v(beta)) / e2s
    integrand = lap_a * lap_b + 24 * alpha * beta - 10 * grad
    return float(np.real(inv.integrate(integrand)))


# ---------------------------------------------------------------------------
# flat-torus Laplace spectrum
# ---------------------------------------------------------------------------

def dual_lattice(lattice: Array) -> Array:
    return 2 * np.pi * np.linalg.inv(np.asarray(lattice, float)).T


def flat_torus_spectrum(n_max: int, lattice: Array = CLIFFORD_LATTICE,
                        numeric_check: bool = True):
    """Laplace-Beltrami eigenvalues 6(m^2 + mn + n^2) with multiplicities.

    Enumerates dual-lattice points k = m mu1 + n mu2 with |m|, |n| <= n_max
    and groups |k|^2 / 2 (the metric is twice the parameter metric).  When
    requested, the result is cross-checked against dense diagonalization of
    the grid Laplacian.
    """
    if n_max < 2:
        raise ConfigError("flat_torus_spectrum requires n_max >= 2")
    mu = dual_lattice(lattice)
    box = n_max + 6     # enumerate wider, report only certainly complete shells
    eig = {}
    for m in range(-box, box + 1):
        for nn in range(-box, box + 1):
            kvec = m * mu[0] + nn * mu[1]
            lam = 0.5 * float(kvec @ kvec)
            key = round(lam, 9)
            eig[key] = eig.get(key, 0) + 1
    pairs = sorted(eig.items())
    # |k| >= smallest-singular-value * max(|m|, |n|), so shells below the cut
    # contain no lattice points outside the enumeration box
    smin = np.linalg.svd(mu, compute_uv=False)[-1]
    cut = 0.5 * (smin * box) ** 2
    out = [(lam, mult) for lam, mult in pairs if lam < cut]
    if numeric_check:
        numeric = _grid_laplacian_eigenvalues(lattice, 16, count=20)
        analytic = np.concatenate([[lam] * mult for lam, mult in out])[:20]
        rel = np.abs(numeric[:len(analytic)] - analytic) / np.maximum(analytic, 1.0)
        if np.max(rel) > 1e-8:
            raise NumericError(f"grid Laplacian disagrees with the lattice "
                               f"enumeration (rel {np.max(rel):.2e})")
    return out


def _grid_laplacian_eigenvalues(lattice: Array, n: int, count: int) -> Array:
    from .surface import torus_domain
    domain = torus_domain(lattice)
    diff = Differentiator(domain, (n, n))
    basis = np.eye(n * n).reshape(n * n, n, n)
    ops = np.stack([-0.5 * (diff.deriv(b, 2, 0) + diff.deriv(b, 0, 2)).real
                    for b in basis])
    mat = ops.reshape(n * n, n * n)
    vals = np.linalg.eigvalsh(0.5 * (mat + mat.T))
    vals[np.abs(vals) < 1e-9] = 0.0
    return vals[:count]


# ---------------------------------------------------------------------------
# Hessian spectra on Fourier bases
# ---------------------------------------------------------------------------

@dataclass
class SpectralReport:
    basis: list
    eigenvalues: Array
    nullity: int
    smallest_positive: float
    null_tol: float
    eigenmodes: Array              # columns: null + lowest positive modes
    extras: dict

    def as_dict(self) -> dict:
        return {"basis_size": len(self.basis),
                "eigenvalues": [float(x) for x in self.eigenvalues],
                "nullity": int(self.nullity),
                "smallest_positive": float(self.smallest_positive),
                "null_tol": float(self.null_tol),
                "extras": {key: (float(val) if np.isscalar(val) else val)
                           for key, val in self.extras.items()}}


def fourier_mode_table(n_max: int, lattice: Array = CLIFFORD_LATTICE):
    """Half-lattice mode list [(m, n, kvec)] with one representative per +-k."""
    mu = dual_lattice(lattice)
    modes = []
    for m in range(-n_max, n_max + 1):
        for nn in range(-n_max, n_max + 1):
            if (m, nn) == (0, 0) or (m < 0 or (m == 0 and nn < 0)):
                continue
            modes.append((m, nn, m * mu[0] + nn * mu[1]))
    return modes


def _clifford_variation_basis(jet: SurfaceJet, n_max: int):
    """Real L2-orthonormal basis of complex variations from Fourier modes."""
    u, v = jet.u, jet.v
    area = 2.0 * abs(np.linalg.det(jet.domain.lattice))
    fields, labels = [], []
    const = np.ones(jet.shape) / np.sqrt(area)
    fields.append(const)
    labels.append(("const", "cos"))
    for m, nn, kvec in fourier_mode_table(n_max, jet.domain.lattice):
        phase = kvec[0] * u + kvec[1] * v
        norm = np.sqrt(area / 2.0)
        fields.append(np.cos(phase) / norm)
        labels.append(((m, nn), "cos"))
        fields.append(np.sin(phase) / norm)
        labels.append(((m, nn), "sin"))
    basis, basis_labels = [], []
    for f, lab in zip(fields, labels):
        basis.append(f.astype(complex))
        basis_labels.append(lab + ("re",))
        basis.append(1j * f)
        basis_labels.append(lab + ("im",))
    return basis, basis_labels


def _derivative_tuple(field: Array, frame: FrameField,
                      diff: Differentiator):
    v1, v1b = covariant_derivatives(field, 0, -1, frame, diff)
    _, v11b = covariant_derivatives(v1, 1, -1, frame, diff)
    return field, v1, v1b, v11b


def _quadratic_W(tup, weights) -> float:
    v, v1, v1b, v11b = tup
    integrand = (4 * np.abs(v11b) ** 2 + 6 * np.abs(v) ** 2
                 - 3 * np.real(v1b ** 2 + np.conj(v1) ** 2)
                 - 4 * np.abs(v1) ** 2)
    return 4.0 * float(np.sum(integrand * weights))


def _quadratic_Wminus(tup, weights) -> float:
    v, v1, v1b, v11b = tup
    integrand = (16 * np.abs(v11b) ** 2 + 12 * np.abs(v) ** 2
                 - 32 * np.abs(v1) ** 2)
    return float(np.sum(integrand * weights))


def analytic_null_family(jet: SurfaceJet) -> list[Array]:
    """The six-parameter null family of W on the Clifford torus."""
    t, s = jet.u, jet.v
    wp = -np.sqrt(3.0) * t + 3 * s
    wm = -np.sqrt(3.0) * t - 3 * s
    fam = []
    for a, b in [(np.cos(wp), np.sqrt(3.0) * np.cos(wp)),
                 (np.cos(wm), -np.sqrt(3.0) * np.cos(wm)),
                 (np.sin(wp), np.sqrt(3.0) * np.sin(wp)),
                 (np.sin(wm), -np.sqrt(3.0) * np.sin(wm)),
                 (np.cos(2 * np.sqrt(3.0) * t), 0.0 * t),
                 (np.sin(2 * np.sqrt(3.0) * t), 0.0 * t)]:
        fam.append(a + 1j * b)
    return fam


def hessian_spectrum(inv: InvariantField, form: str = "W", n_max: int = 6,
                     null_tol: float | None = None) -> SpectralReport:
    """Spectrum of the Willmore (or W-) Hessian on the truncated Fourier basis.

    The Hessian is assembled by polarization H(u, w) = (S(u+w) - S(u-w)) / 4
    from the audited quadratic evaluator of the chosen functional.
    """
    if form not in ("W", "W-"):
        raise ConfigError("form must be 'W' or 'W-'")
    if n_max < 4:
        raise ConfigError("hessian_spectrum requires n_max >= 4")
    jet = inv.jet
    _require_clifford(jet)
    frame = inv.frame
    diff = Differentiator(jet.domain, jet.shape)
    weights = quadrature_weights(jet.domain, jet.shape) * frame.area_density
    quad = _quadratic_W if form == "W" else _quadratic_Wminus

    basis, labels = _clifford_variation_basis(jet, n_max)
    tuples = [_derivative_tuple(b, frame, diff) for b in basis]
    nb = len(basis)
    hess = np.zeros((nb, nb))
    svals = np.array([quad(t, weights) for t in tuples])
    for i in range(nb):
        ti = tuples[i]
        hess[i, i] = svals[i]
        for j in range(i + 1, nb):
            tj = tuples[j]
            plus = tuple(a + b for a, b in zip(ti, tj))
            minus = tuple(a - b for a, b in zip(ti, tj))
            hess[i, j] = hess[j, i] = 0.25 * (quad(plus, weights)
                                              - quad(minus, weights))
    sym_err = np.max(np.abs(hess - hess.T)) / max(np.max(np.abs(hess)), 1e-300)
    vals, vecs = np.linalg.eigh(0.5 * (hess + hess.T))
    scale = float(np.max(np.abs(vals)))
    tol = (1e-8 * scale) if null_tol is None else float(null_tol)
    nullity = int(np.sum(np.abs(vals) < tol))
    positive = vals[vals >= tol]
    smallest_positive = float(positive[0]) if positive.size else float("nan")

    extras = {"form": form, "n_max": n_max, "symmetry_residual": float(sym_err),
              "min_eigenvalue": float(vals[0]), "scale": scale}
    null_vecs = vecs[:, np.abs(vals) < tol]
    if form == "W":
        fam = analytic_null_family(jet)
        fam_coeff = np.stack([
            np.array([np.sum(np.real(f * np.conj(b)) * weights) for b in basis])
            for f in fam], axis=1)
        q_fam, _ = np.linalg.qr(fam_coeff)
        if null_vecs.shape[1]:
            proj = np.linalg.norm(q_fam.T @ null_vecs, axis=0)
            extras["null_family_projection_min"] = float(np.min(proj))
        extras["analytic_family_dim"] = fam_coeff.shape[1]
    report_modes = vecs[:, :max(nullity + 3, 3)]
    return SpectralReport(basis=labels, eigenvalues=vals, nullity=nullity,
                          smallest_positive=smallest_positive, null_tol=tol,
                          eigenmodes=report_modes, extras=extras)


# ---------------------------------------------------------------------------
# Jacobi operator of complex curves
# ---------------------------------------------------------------------------

def jacobi_operator_spectrum(inv: InvariantField, n_max: int = 8,
                             radial_degree: int | None = None) -> SpectralReport:
    """Spectrum of the area Jacobi operator of a complex curve.

    The operator is minus (normal Laplacian + 2(1 + |c|^2)) with c the
    nonvanishing second-fundamental-form component, discretized by
    Rayleigh-Ritz on Chebyshev-in-s times Fourier-in-omega trial sections
    over the cap-truncated cylinder chart.  Eigenvalues are nonnegative for
    an area minimizer; the first one above the kernel is reported together
    with a cap-truncation error estimate.
    """
    fr = inv.frame
    jet = fr.jet
    if jet.domain.kind != "rectangle" or not jet.domain.periodic[1]:
        raise PreconditionError("Jacobi spectrum expects a cylinder chart "
                                "(rectangle periodic in the angle)")
    max_phi = float(np.max(np.abs(inv.phi)))
    max_psi = float(np.max(np.abs(inv.psi)))
    if min(max_phi, max_psi) > 1e-6 * max(max_phi, max_psi):
        raise PreconditionError("surface is not a complex curve: neither "
                                "second-fundamental-form component vanishes")
    carrier = np.abs(inv.phi if max_phi >= max_psi else inv.psi) ** 2
    if float(np.max(np.abs(inv.H))) > 1e-6:
        raise PreconditionError("surface is not minimal")

    diff = Differentiator(jet.domain, jet.shape)
    weights = quadrature_weights(jet.domain, jet.shape) * fr.area_density
    (u0, u1), _ = jet.domain.bounds
    shat = (2 * jet.u - (u0 + u1)) / (u1 - u0)
    jdeg = radial_degree if radial_degree is not None else n_max + 2

    fields, labels = [], []
    for j in range(jdeg):
        tj = np.polynomial.chebyshev.Chebyshev.basis(j)(shat)
        fields.append(tj)
        labels.append((j, 0, "cos"))
        for m in range(1, n_max + 1):
            fields.append(tj * np.cos(m * jet.v))
            labels.append((j, m, "cos"))
            fields.append(tj * np.sin(m * jet.v))
            labels.append((j, m, "sin"))
    basis, basis_labels = [], []
    for f, lab in zip(fields, labels):
        basis.append(f.astype(complex))
        basis_labels.append(lab + ("re",))
        basis.append(1j * f)
        basis_labels.append(lab + ("im",))

    nb = len(basis)
    f0 = np.stack(basis).reshape(nb, -1)
    d1 = np.empty_like(f0)
    d1b = np.empty_like(f0)
    for i, b in enumerate(basis):
        b1, b1b = covariant_derivatives(b, 0, -1, fr, diff)
        d1[i] = b1.ravel()
        d1b[i] = b1b.ravel()
    wflat = weights.ravel()
    pot = (2.0 * (1.0 + carrier)).ravel()
    a_mat = (2 * np.real(d1 * wflat @ np.conj(d1).T)
             + 2 * np.real(d1b * wflat @ np.conj(d1b).T)
             - np.real(f0 * (pot * wflat) @ np.conj(f0).T))
    m_mat = np.real(f0 * wflat @ np.conj(f0).T)
    try:
        vals, vecs = scipy.linalg.eigh(0.5 * (a_mat + a_mat.T),
                                       0.5 * (m_mat + m_mat.T))
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"Jacobi eigensolver failed: {exc}") from None

    null_tol = 1.0
    nullity = int(np.sum(np.abs(vals) < null_tol))
    positive = vals[vals >= null_tol]
    lam1 = float(positive[0]) if positive.size else float("nan")
    area = float(np.sum(weights))
    # Gauss-Bonnet closed-area estimate for the cap fraction
    mean_curv = float(np.real(inv.integrate(inv.R1212))) / area
    area_closed = 4 * np.pi / mean_curv if mean_curv > 0 else area
    cap_fraction = max(0.0, 1.0 - area / area_closed)
    extras = {
        "lambda_1": lam1,
        "cap_area_fraction": cap_fraction,
        "cap_error_estimate": abs(lam1) * cap_fraction * 4.0,
        "min_eigenvalue": float(vals[0]),
        "carrier_sq_mean": float(np.mean(carrier)),
    }
    # W+ second variation of the lowest mode above the kernel:
    # int (|L V|^2 + 12 <L V, V>) dA with L V = -(Jacobi eigenvalue) V
    if positive.size:
        idx = int(np.searchsorted(vals, positive[0]))
        coef = vecs[:, idx]
        vfield = np.tensordot(coef, f0, axes=(0, 0))
        lv = -lam1 * vfield
        wplus = np.sum((np.abs(lv) ** 2 + 12 * np.real(lv * np.conj(vfield))) * wflat)
        extras["wplus_second_variation_lowest_mode"] = float(np.real(wplus))
    return SpectralReport(basis=basis_labels, eigenvalues=vals, nullity=nullity,
                          smallest_positive=lam1, null_tol=null_tol,
                          eigenmodes=vecs[:, :nullity + 2], extras=extras)
