"""Global conformal invariants: Willmore energies, Moebius metric, indices.

The Willmore functional is W = int |B-ring|^2 dA = 4 int (|phi|^2 + |psi|^2) dA,
split as W+ = 4 int |psi|^2 dA + 2 pi (chi + chi_perp) and
W- = 4 int |phi|^2 dA + 2 pi (chi - chi_perp).  Euler characteristics come
from Gauss-Bonnet quadrature of R1212 and R1234 on closed (torus) grids and
from the catalog's declared topology for single-chart closed surfaces.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .ambient import AmbientModel, LambdaJet, conformal_rescale, contract4
from .errors import (ConfigError, DegeneracyError, NumericError,
                     PreconditionError, ResolutionError)
from .surface import (Differentiator, FrameField, InvariantField, SurfaceJet,
                      build_frame, invariant_fields, quadrature_weights)

Array = np.ndarray

INTEGRALITY_TOL = 1e-3


@dataclass
class EnergyReport:
    W: float
    W_plus: float
    W_minus: float
    area: float
    euler_char: float
    euler_char_normal: float
    integrals: dict

    def as_dict(self) -> dict:
        return {"W": self.W, "W_plus": self.W_plus, "W_minus": self.W_minus,
                "area": self.area, "chi": self.euler_char,
                "chi_perp": self.euler_char_normal, "integrals": dict(self.integrals)}


def _round_integer(x: float, what: str) -> float:
    r = round(x)
    if abs(x - r) > INTEGRALITY_TOL:
        raise NumericError(f"{what} quadrature {x:.6f} is not within "
                           f"{INTEGRALITY_TOL} of an integer")
    return float(r)


def willmore_energies(inv: InvariantField) -> EnergyReport:
    """Energies by periodic trapezoidal quadrature; chi by Gauss-Bonnet."""
    jet = inv.jet
    if jet.domain.kind != "torus":
        raise PreconditionError("willmore_energies requires a closed torus-domain grid")
    area = float(np.real(inv.integrate(np.ones(jet.shape))))
    int_phi2 = float(np.real(inv.integrate(np.abs(inv.phi) ** 2)))
    int_psi2 = float(np.real(inv.integrate(np.abs(inv.psi) ** 2)))
    int_h2 = float(np.real(inv.integrate(np.abs(inv.H) ** 2)))
    chi = _round_integer(float(np.real(inv.integrate(inv.R1212))) / (2 * np.pi),
                         "Euler characteristic")
    chi_perp = _round_integer(float(np.real(inv.integrate(inv.R1234))) / (2 * np.pi),
                              "normal Euler characteristic")
    w = 4.0 * (int_phi2 + int_psi2)
    w_plus = 4.0 * int_psi2 + 2 * np.pi * (chi + chi_perp)
    w_minus = 4.0 * int_phi2 + 2 * np.pi * (chi - chi_perp)
    return EnergyReport(W=w, W_plus=w_plus, W_minus=w_minus, area=area,
                        euler_char=chi, euler_char_normal=chi_perp,
                        integrals={"int_phi2_dA": int_phi2,
                                   "int_psi2_dA": int_psi2,
                                   "int_H2_dA": int_h2})


def moebius_metric(inv: InvariantField):
    """Conformal factor of the Moebius metric relative to the induced one.

    Returns (factor field, total Moebius area); the latter equals W / 4.
    """
    factor = np.abs(inv.phi) ** 2 + np.abs(inv.psi) ** 2
    floor = 1e-12 * max(float(np.max(factor)), 1e-300)
    if np.min(factor) <= floor:
        ij = np.unravel_index(int(np.argmin(factor)), factor.shape)
        raise DegeneracyError(f"umbilic point on the grid at index {ij}: "
                              "the Moebius metric degenerates there")
    g_area = float(np.real(inv.integrate(factor)))
    return factor, g_area


def superconformal_flags(inv: InvariantField, threshold: float = 1e-8) -> dict:
    prod = np.abs(inv.phi * inv.psi)
    scale = max(float(np.max(np.abs(inv.phi)) * np.max(np.abs(inv.psi))), 1e-300)
    return {
        "superconformal": bool(np.max(prod) < threshold * max(scale, 1.0)),
        "max_abs_phi_psi": float(np.max(prod)),
        "positive_spin": bool(np.max(np.abs(inv.psi)) < threshold),
        "negative_spin": bool(np.max(np.abs(inv.phi)) < threshold),
    }


# ---------------------------------------------------------------------------
# isotropic / anti-isotropic point indices
# ---------------------------------------------------------------------------

@dataclass
class IndexReport:
    points: list                   # (grid index, winding, loop radius in cells)
    index_sum: int
    expected: Optional[int]

    def as_dict(self) -> dict:
        return {"points": [{"grid_index": list(map(int, p[0])),
                            "index": int(p[1]), "loop_radius_cells": int(p[2])}
                           for p in self.points],
                "index_sum": int(self.index_sum),
                "expected": None if self.expected is None else int(self.expected)}


def _zero_clusters(mask: Array, periodic: tuple) -> list:
    """Connected components of the below-threshold mask (4-neighbour)."""
    n, m = mask.shape
    seen = np.zeros_like(mask, dtype=bool)
    clusters = []
    for i0, j0 in zip(*np.nonzero(mask)):
        if seen[i0, j0]:
            continue
        stack, cells = [(i0, j0)], []
        seen[i0, j0] = True
        while stack:
            i, j = stack.pop()
            cells.append((i, j))
            for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
                ii, jj = i + di, j + dj
                if periodic[0]:
                    ii %= n
                if periodic[1]:
                    jj %= m
                if 0 <= ii < n and 0 <= jj < m and mask[ii, jj] and not seen[ii, jj]:
                    seen[ii, jj] = True
                    stack.append((ii, jj))
        clusters.append(cells)
    return clusters


def _square_loop(ci: int, cj: int, radius: int, shape, periodic):
    n, m = shape
    path = []
    for dj in range(-radius, radius + 1):
        path.append((ci - radius, cj + dj))
    for di in range(-radius + 1, radius + 1):
        path.append((ci + di, cj + radius))
    for dj in range(radius - 1, -radius - 1, -1):
        path.append((ci + radius, cj + dj))
    for di in range(radius - 1, -radius, -1):
        path.append((ci + di, cj - radius))
    out = []
    for i, j in path:
        if periodic[0]:
            i %= n
        if periodic[1]:
            j %= m
        if not (0 <= i < n and 0 <= j < m):
            raise ResolutionError("winding loop leaves the chart; refine the grid "
                                  "or enlarge the domain")
        out.append((i, j))
    return out


def _winding(values: Array) -> float:
    args = np.angle(values)
    d = np.diff(np.concatenate([args, args[:1]]))
    d = (d + np.pi) % (2 * np.pi) - np.pi
    return float(np.sum(d) / (2 * np.pi))


def isotropic_indices(inv: InvariantField, which: str = "phi",
                      loop_radius: int = 4,
                      detection_factor: float = 1e-6) -> IndexReport:
    """Winding indices of the zeros of phi (isotropic) or psi (anti-isotropic)."""
    if which not in ("phi", "psi"):
        raise ConfigError("which must be 'phi' or 'psi'")
    field = inv.phi if which == "phi" else inv.psi
    jet = inv.jet
    periodic = (True, True) if jet.domain.kind == "torus" else jet.domain.periodic
    scale = float(np.max(np.abs(field)))
    if scale == 0.0:
        raise DegeneracyError(f"{which} vanishes identically; indices are undefined")
    threshold = detection_factor * scale
    mask = np.abs(field) < threshold
    clusters = _zero_clusters(mask, periodic)
    points, total = [], 0
    taken = []
    for cells in clusters:
        ci = int(round(np.mean([c[0] for c in cells])))
        cj = int(round(np.mean([c[1] for c in cells])))
        for (pi, pj) in taken:
            if abs(pi - ci) <= 2 * loop_radius and abs(pj - cj) <= 2 * loop_radius:
                raise ResolutionError("two zeros too close together: winding loops "
                                      "overlap; refine the grid")
        taken.append((ci, cj))
        loop = _square_loop(ci, cj, loop_radius, jet.shape, periodic)
        vals = np.array([field[i, j] for i, j in loop])
        if np.min(np.abs(vals)) <= 10 * threshold:
            raise ResolutionError("winding loop passes too close to a zero; "
                                  "refine the grid")
        w = _winding(vals)
        wi = int(round(w))
        if abs(w - wi) > 1e-6:
            raise ResolutionError(f"non-integer winding {w:.6f}; refine the grid")
        points.append(((ci, cj), wi, loop_radius))
        total += wi
    expected = None
    if jet.chi_topology is not None:
        chi, chi_perp = jet.chi_topology
        expected = -2 * chi + chi_perp if which == "phi" else -2 * chi - chi_perp
    return IndexReport(points=points, index_sum=total, expected=expected)


# ---------------------------------------------------------------------------
# conformal covariance suite
# ---------------------------------------------------------------------------

def _frame_curvature_scalars(inv: InvariantField, ambient: AmbientModel) -> dict:
    """The five locally defined conformal curvature scalars on the frame."""
    fr = inv.frame
    k = ambient.riemann(fr.jet.x)
    e, n = fr.e, fr.n
    eb, nb = np.conj(e), np.conj(n)
    return {
        "K(eb,n,eb,n)": contract4(k, eb, n, eb, n),
        "K(eb,nb,eb,nb)": contract4(k, eb, nb, eb, nb),
        "K(eb,e,n,nb)": contract4(k, eb, e, n, nb),
        "K(e,n,nb,n)+K(eb,e,e,n)": contract4(k, e, n, nb, n) + contract4(k, eb, e, e, n),
        "K(e,nb,n,nb)+K(eb,e,e,nb)": contract4(k, e, nb, n, nb) + contract4(k, eb, e, e, nb),
    }


def second_order_invariants(inv: InvariantField, ambient: AmbientModel):
    """The two conformally invariant combinations built from phi11b1b / psi."""
    fr = inv.frame
    k = ambient.riemann(fr.jet.x)
    ric = ambient.ricci(fr.jet.x)
    e = fr.e
    ric_ee = np.einsum("...ij,...i,...j->...", ric, e, e)
    coeff = 0.25 * ric_ee + np.conj(inv.H) * np.conj(inv.psi) + inv.H * np.conj(inv.phi)
    c_phi = 2 * inv.phi1b1b + coeff * inv.phi
    c_psi = 2 * inv.psi1b1b + coeff * inv.psi
    return c_phi, c_psi


def conformal_covariance_suite(jet: SurfaceJet, ambient: AmbientModel,
                               lam: LambdaJet, mode: str = "auto") -> dict:
    """Recompute every invariant under e^{2 lambda} h and report drifts.

    Weighted comparisons: e^lam phi-tilde = phi, e^lam psi-tilde = psi,
    e^lam H-tilde = H - n(lambda); the frame curvature scalars carry weight
    e^{2 lam} and the second-order combinations weight e^{3 lam}.
    """
    frame = build_frame(jet, ambient, mode=mode)
    inv = invariant_fields(jet, ambient, frame)
    rescaled = conformal_rescale(ambient, lam)
    frame_t = build_frame(jet, rescaled, mode=mode)
    inv_t = invariant_fields(jet, rescaled, frame_t)

    lam_s = lam.value(jet.x)
    dlam = lam.gradient(jet.x)
    el = np.exp(lam_s)
    n_lam = np.einsum("...i,...i->...", dlam, frame.n)

    drifts = {
        "phi": float(np.max(np.abs(el * inv_t.phi - inv.phi))),
        "psi": float(np.max(np.abs(el * inv_t.psi - inv.psi))),
        "H": float(np.max(np.abs(el * inv_t.H - (inv.H - n_lam)))),
        "quartic": float(np.max(np.abs(el ** 2 * inv_t.phi * inv_t.psi
                                       - inv.phi * inv.psi))),
    }

    scal = _frame_curvature_scalars(inv, ambient)
    scal_t = _frame_curvature_scalars(inv_t, rescaled)
    for key in scal:
        drifts[f"scalar {key}"] = float(np.max(np.abs(el ** 2 * scal_t[key] - scal[key])))

    c_phi, c_psi = second_order_invariants(inv, ambient)
    ct_phi, ct_psi = second_order_invariants(inv_t, rescaled)
    drifts["second-order phi combination"] = float(
        np.max(np.abs(el ** 3 * ct_phi - c_phi)))
    drifts["second-order psi combination"] = float(
        np.max(np.abs(el ** 3 * ct_psi - c_psi)))

    if jet.domain.kind == "torus":
        en = willmore_energies(inv)
        en_t = willmore_energies(inv_t)
        drifts["W"] = abs(en_t.W - en.W)
        drifts["W_plus"] = abs(en_t.W_plus - en.W_plus)
        drifts["W_minus"] = abs(en_t.W_minus - en.W_minus)
    return drifts
