"""Immersed surfaces: parametrization jets, adapted frames, invariant fields.

A surface is sampled on a structured grid over a torus (two lattice vectors)
or a rectangle (optionally periodic along an axis, for cylinder charts of
spheres).  The adapted complex frame follows the convention ``e = e1 + i e2``
tangent, ``n = e3 + i e4`` normal, with ``<e, e-bar> = <n, n-bar> = 2`` under
the complex-bilinear extension of the ambient metric.

Derivative fields of the invariants use discrete Fourier differentiation on
torus grids and 8th-order finite-difference stencils on rectangle grids, as
do the connection coefficients; the conformal factor chain is evaluated
analytically from the parametrization jets when the ambient is flat.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache
from typing import Callable, Optional

import numpy as np

from .ambient import AmbientModel, contract2, contract4
from .errors import ConfigError, GeometryError, NumericError, PreconditionError
from .expressions import compile_expression
from .jets import JET_ORDER, Jet

Array = np.ndarray

ISOTHERMAL_TOL = 1e-8
IMMERSION_TOL = 1e-8


# ---------------------------------------------------------------------------
# domains and differentiation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Domain:
    kind: str                                  # "torus" | "rectangle"
    lattice: Optional[np.ndarray] = None       # (2, 2), rows are lattice vectors
    bounds: Optional[tuple] = None             # ((u0, u1), (v0, v1))
    periodic: tuple = (True, True)

    def cell_measure(self, shape) -> float:
        n, m = shape
        if self.kind == "torus":
            return abs(np.linalg.det(self.lattice)) / (n * m)
        (u0, u1), (v0, v1) = self.bounds
        return (u1 - u0) * (v1 - v0) / ((n - (0 if self.periodic[0] else 1))
                                        * (m - (0 if self.periodic[1] else 1)))


def torus_domain(lattice) -> Domain:
    lattice = np.asarray(lattice, dtype=float)
    if lattice.shape != (2, 2) or abs(np.linalg.det(lattice)) < 1e-12:
        raise ConfigError("torus lattice must be two independent 2-vectors")
    return Domain("torus", lattice=lattice, periodic=(True, True))


def rectangle_domain(bounds, periodic=(False, False)) -> Domain:
    (u0, u1), (v0, v1) = bounds
    if not (u1 > u0 and v1 > v0):
        raise ConfigError("rectangle bounds must be increasing")
    return Domain("rectangle", bounds=((float(u0), float(u1)), (float(v0), float(v1))),
                  periodic=tuple(bool(p) for p in periodic))


def grid_points(domain: Domain, shape) -> tuple[Array, Array]:
    n, m = shape
    if n < 16 or m < 16:
        raise ConfigError("grid sizes must be at least 16")
    if domain.kind == "torus":
        i = np.arange(n)[:, None] / n
        j = np.arange(m)[None, :] / m
        lat = domain.lattice
        u = i * lat[0, 0] + j * lat[1, 0]
        v = i * lat[0, 1] + j * lat[1, 1]
        return u + 0 * v, v + 0 * u
    (u0, u1), (v0, v1) = domain.bounds
    us = u0 + (u1 - u0) * np.arange(n) / n if domain.periodic[0] else np.linspace(u0, u1, n)
    vs = v0 + (v1 - v0) * np.arange(m) / m if domain.periodic[1] else np.linspace(v0, v1, m)
    return np.meshgrid(us, vs, indexing="ij")


def fornberg_weights(x: Array, x0: float, order: int) -> Array:
    """Finite-difference weights for d^order/dx^order at x0 on nodes x."""
    n = len(x)
    c = np.zeros((n, order + 1))
    c[0, 0] = 1.0
    c1, c4 = 1.0, x[0] - x0
    for i in range(1, n):
        mn = min(i, order)
        c2, c5, c4 = 1.0, c4, x[i] - x0
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            for k in range(mn, 0, -1):
                c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
            c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c[:, order]


@lru_cache(maxsize=32)
def _stencil_matrix(n: int, h: float, order: int, width: int = 9) -> Array:
    """Dense differentiation matrix with centered interior stencils."""
    x = np.arange(n) * h
    d = np.zeros((n, n))
    half = width // 2
    for i in range(n):
        lo = min(max(i - half, 0), n - width)
        nodes = x[lo:lo + width]
        d[i, lo:lo + width] = fornberg_weights(nodes, x[i], order)
    return d


class Differentiator:
    """Per-grid partial derivatives: spectral where periodic, stencils else."""

    def __init__(self, domain: Domain, shape):
        self.domain = domain
        self.shape = tuple(shape)
        n, m = self.shape
        if domain.kind == "torus":
            mu = 2 * np.pi * np.linalg.inv(domain.lattice).T  # rows are dual vectors
            fi = np.fft.fftfreq(n, d=1.0 / n)[:, None]
            fj = np.fft.fftfreq(m, d=1.0 / m)[None, :]
            self._ku = fi * mu[0, 0] + fj * mu[1, 0]
            self._kv = fi * mu[0, 1] + fj * mu[1, 1]
            self._mode = ("spectral", "spectral")
        else:
            (u0, u1), (v0, v1) = domain.bounds
            self._mode = tuple("spectral" if p else "stencil" for p in domain.periodic)
            if domain.periodic[0]:
                self._ku = 2 * np.pi * np.fft.fftfreq(n, d=(u1 - u0) / n)[:, None]
            else:
                hu = (u1 - u0) / (n - 1)
                self._d1u = _stencil_matrix(n, hu, 1)
                self._d2u = _stencil_matrix(n, hu, 2)
            if domain.periodic[1]:
                self._kv = 2 * np.pi * np.fft.fftfreq(m, d=(v1 - v0) / m)[None, :]
            else:
                hv = (v1 - v0) / (m - 1)
                self._d1v = _stencil_matrix(m, hv, 1)
                self._d2v = _stencil_matrix(m, hv, 2)

    def _apply_u(self, f: Array, order: int) -> Array:
        if self.domain.kind == "torus":
            fk = np.fft.fft2(f)
            out = np.fft.ifft2((1j * self._ku) ** order * fk)
        elif self._mode[0] == "spectral":
            fk = np.fft.fft(f, axis=0)
            out = np.fft.ifft((1j * self._ku) ** order * fk, axis=0)
        else:
            mat = self._d1u if order == 1 else self._d2u
            return np.einsum("ij,j...->i...", mat, f)
        return out if np.iscomplexobj(f) else out.real

    def _apply_v(self, f: Array, order: int) -> Array:
        if self.domain.kind == "torus":
            fk = np.fft.fft2(f)
            out = np.fft.ifft2((1j * self._kv) ** order * fk)
        elif self._mode[1] == "spectral":
            fk = np.fft.fft(f, axis=1)
            out = np.fft.ifft((1j * self._kv) ** order * fk, axis=1)
        else:
            mat = self._d1v if order == 1 else self._d2v
            return np.einsum("ij,...j->...i", mat, f)
        return out if np.iscomplexobj(f) else out.real

    def d_u(self, f: Array) -> Array:
        return self._apply_u(f, 1)

    def d_v(self, f: Array) -> Array:
        return self._apply_v(f, 1)

    def deriv(self, f: Array, a: int, b: int) -> Array:
        """Mixed partial d^{a+b} f / du^a dv^b, a, b <= 2."""
        if self.domain.kind == "torus":
            fk = np.fft.fft2(f)
            out = np.fft.ifft2((1j * self._ku) ** a * (1j * self._kv) ** b * fk)
            return out if np.iscomplexobj(f) else out.real
        out = f
        if a:
            out = self._apply_u(out, a)
        if b:
            out = self._apply_v(out, b)
        return out

    def d_z(self, f: Array) -> Array:
        return 0.5 * (self.d_u(f) - 1j * self.d_v(f))

    def d_zbar(self, f: Array) -> Array:
        return 0.5 * (self.d_u(f) + 1j * self.d_v(f))


def quadrature_weights(domain: Domain, shape) -> Array:
    """Parameter-space weights: sum(f * area_density * w) integrates f dA."""
    n, m = shape

    def axis_weights(npts, length, periodic):
        if periodic:
            return np.full(npts, length / npts)
        h = length / (npts - 1)
        w = np.full(npts, h)
        w[0] = w[-1] = h / 2
        if npts >= 8:   # Gregory end-corrected trapezoid, O(h^4)
            for end in (slice(0, 3), slice(-1, -4, -1)):
                w[end] = h * np.array([3.0 / 8, 7.0 / 6, 23.0 / 24])
        return w

    if domain.kind == "torus":
        return np.full((n, m), abs(np.linalg.det(domain.lattice)) / (n * m))
    (u0, u1), (v0, v1) = domain.bounds
    wu = axis_weights(n, u1 - u0, domain.periodic[0])
    wv = axis_weights(m, v1 - v0, domain.periodic[1])
    return np.outer(wu, wv)


def interior_mask(domain: Domain, shape, layers: int = 6) -> Array:
    """True away from non-periodic boundaries, where stencils are centered."""
    n, m = shape
    mask = np.ones((n, m), dtype=bool)
    if domain.kind == "rectangle":
        if not domain.periodic[0]:
            mask[:layers, :] = False
            mask[-layers:, :] = False
        if not domain.periodic[1]:
            mask[:, :layers] = False
            mask[:, -layers:] = False
    return mask


# ---------------------------------------------------------------------------
# surface jets
# ---------------------------------------------------------------------------

@dataclass
class NormalFrameHint:
    """Analytic normal frame supplied by a catalog entry."""

    eps3: Array
    eps4: Array
    deps3_u: Optional[Array] = None
    deps3_v: Optional[Array] = None
    deps4_u: Optional[Array] = None
    deps4_v: Optional[Array] = None


@dataclass
class SurfaceJet:
    """Immersion samples with parameter partials up to total order 4."""

    domain: Domain
    shape: tuple
    u: Array
    v: Array
    x: Array                      # (N, M, 4)
    jets: dict                    # (a, b) -> (N, M, 4), 1 <= a+b <= JET_ORDER
    jet_source: str
    linear_part: Optional[Array] = None      # (2, 4): x - u*L0 - v*L1 periodic
    name: str = "custom"
    chi_topology: Optional[tuple] = None     # declared (chi, chi_perp) for charts
    normal_hint_fn: Optional[Callable] = None

    def partial(self, a: int, b: int) -> Array:
        if a == b == 0:
            return self.x
        return self.jets[(a, b)]

    @property
    def x_z(self) -> Array:
        return 0.5 * (self.partial(1, 0) - 1j * self.partial(0, 1))

    @property
    def x_zbar(self) -> Array:
        return 0.5 * (self.partial(1, 0) + 1j * self.partial(0, 1))

    def second_z(self, kind: str) -> Array:
        xuu, xuv, xvv = self.partial(2, 0), self.partial(1, 1), self.partial(0, 2)
        if kind == "zz":
            return 0.25 * (xuu - 2j * xuv - xvv)
        if kind == "zzbar":
            return 0.25 * (xuu + xvv)
        if kind == "zbzb":
            return 0.25 * (xuu + 2j * xuv - xvv)
        raise ValueError(kind)

    def third_z(self, nz: int, nzb: int) -> Array:
        """Third parameter derivative with nz z-slots and nzb zbar-slots."""
        assert nz + nzb == 3
        out = 0.0
        from math import comb
        for k in range(nz + 1):
            for l in range(nzb + 1):
                a = (nz - k) + (nzb - l)
                b = k + l
                coef = comb(nz, k) * comb(nzb, l) * (-1j) ** k * (1j) ** l / 2 ** 3
                out = out + coef * self.partial(a, b)
        return out


def immersion_min_singular_value(jet: SurfaceJet) -> Array:
    jac = np.stack([jet.partial(1, 0), jet.partial(0, 1)], axis=-2)
    return np.linalg.svd(jac, compute_uv=False)[..., -1]


def surface_from_jets(domain: Domain, shape, components: list[Jet], *,
                      name: str, jet_source: str = "analytic",
                      linear_part=None, chi_topology=None,
                      normal_hint_fn=None) -> SurfaceJet:
    u, v = grid_points(domain, shape)
    x = np.stack([c.value.real if np.iscomplexobj(c.value) else c.value
                  for c in components], axis=-1)
    jets = {}
    for a in range(JET_ORDER + 1):
        for b in range(JET_ORDER + 1 - a):
            if a == b == 0:
                continue
            jets[(a, b)] = np.stack([np.real(c.partial(a, b)) + 0.0
                                     for c in components], axis=-1)
    jet = SurfaceJet(domain, tuple(shape), u, v, x, jets, jet_source,
                     linear_part=None if linear_part is None else np.asarray(linear_part, float),
                     name=name, chi_topology=chi_topology, normal_hint_fn=normal_hint_fn)
    smin = immersion_min_singular_value(jet)
    if np.min(smin) <= IMMERSION_TOL:
        raise GeometryError(f"{name}: immersion check failed, min singular value "
                            f"{np.min(smin):.3e}")
    return jet


def surface_from_grid(domain: Domain, shape, x: Array, *, name: str,
                      linear_part=None, chi_topology=None) -> SurfaceJet:
    """Jets by grid differentiation of sampled positions (flow rebuilds)."""
    diff = Differentiator(domain, shape)
    u, v = grid_points(domain, shape)
    lp = None if linear_part is None else np.asarray(linear_part, dtype=float)
    xp = x if lp is None else x - u[..., None] * lp[0] - v[..., None] * lp[1]
    jets = {}
    for a in range(JET_ORDER + 1):
        for b in range(JET_ORDER + 1 - a):
            if a == b == 0:
                continue
            d = np.stack([diff.deriv(xp[..., k], min(a, 2), min(b, 2))
                          for k in range(4)], axis=-1) if a <= 2 and b <= 2 else None
            if d is None:
                # higher orders via repeated first derivatives
                d = xp
                for _ in range(a):
                    d = np.stack([diff.d_u(d[..., k]) for k in range(4)], axis=-1)
                for _ in range(b):
                    d = np.stack([diff.d_v(d[..., k]) for k in range(4)], axis=-1)
            jets[(a, b)] = d
    if lp is not None:
        jets[(1, 0)] = jets[(1, 0)] + lp[0]
        jets[(0, 1)] = jets[(0, 1)] + lp[1]
    jet = SurfaceJet(domain, tuple(shape), u, v, x, jets, "finite-difference",
                     linear_part=lp, name=name, chi_topology=chi_topology)
    smin = immersion_min_singular_value(jet)
    if np.min(smin) <= IMMERSION_TOL:
        raise GeometryError(f"{name}: immersion check failed")
    return jet


# ---------------------------------------------------------------------------
# frame field
# ---------------------------------------------------------------------------

@dataclass
class FrameField:
    """Adapted frame with conformal factor and connection coefficients."""

    jet: SurfaceJet
    ambient: AmbientModel
    mode: str                     # "isothermal" | "gram-schmidt"
    e1: Array
    e2: Array
    eps3: Array
    eps4: Array
    sigma: Optional[Array]
    sigma_z: Optional[Array]
    sigma_zzbar: Optional[Array]
    rho: Optional[Array]
    theta_u: Array                # theta(d_u), complex
    theta_v: Array
    w12_u: Array
    w12_v: Array
    w34_u: Array
    w34_v: Array
    area_density: Array
    metric: Array                 # ambient metric along the surface
    gamma: Array                  # ambient Christoffels along the surface
    gauge_alpha: Array            # applied normal rotation angle field

    @property
    def e(self) -> Array:
        return self.e1 + 1j * self.e2

    @property
    def n(self) -> Array:
        return self.eps3 + 1j * self.eps4

    def inner(self, a: Array, b: Array) -> Array:
        return contract2(self.metric, a, b)

    def nabla_u(self, field_vec: Array, diff: Differentiator) -> Array:
        """Ambient covariant u-derivative of a vector field along x."""
        d = np.stack([diff.d_u(field_vec[..., k]) for k in range(4)], axis=-1)
        return d + np.einsum("...kij,...i,...j->...k", self.gamma,
                             self.jet.partial(1, 0), field_vec)

    def nabla_v(self, field_vec: Array, diff: Differentiator) -> Array:
        d = np.stack([diff.d_v(field_vec[..., k]) for k in range(4)], axis=-1)
        return d + np.einsum("...kij,...i,...j->...k", self.gamma,
                             self.jet.partial(0, 1), field_vec)


def _project_out(g: Array, vec: Array, basis: list[Array]) -> Array:
    out = vec
    for b in basis:
        out = out - (contract2(g, out, b) / contract2(g, b, b))[..., None] * b
    return out


def _normalize(g: Array, vec: Array) -> Array:
    norm = np.sqrt(contract2(g, vec, vec))
    return vec / norm[..., None]


def _gs_normal_pair(g, seeds, tangent_basis):
    """Gram-Schmidt a pair of normal vectors from candidate seed fields."""
    chosen = []
    for seed in seeds:
        cand = _project_out(g, seed, tangent_basis + chosen)
        norms = np.sqrt(np.abs(contract2(g, cand, cand)))
        if np.min(norms) < 1e-6:
            continue
        chosen.append(cand / norms[..., None])
        if len(chosen) == 2:
            return chosen
    raise GeometryError("could not build a smooth normal frame from seed vectors; "
                        "the normal bundle is degenerate for every candidate seed")


def build_frame(jet: SurfaceJet, ambient: AmbientModel, mode: str = "auto",
                gauge_alpha: Optional[Array] = None) -> FrameField:
    """Construct the adapted complex frame (e, n) along the surface."""
    x = jet.x
    g = ambient.metric(x)
    gamma = ambient.christoffels(x)
    xu, xv = jet.partial(1, 0), jet.partial(0, 1)
    g11 = contract2(g, xu, xu)
    g22 = contract2(g, xv, xv)
    g12 = contract2(g, xu, xv)
    scale = np.max(g11)
    isothermal = (np.max(np.abs(g11 - g22)) <= ISOTHERMAL_TOL * scale
                  and np.max(np.abs(g12)) <= ISOTHERMAL_TOL * scale)
    if mode == "auto":
        mode = "isothermal" if isothermal else "gram-schmidt"
    if mode == "isothermal" and not isothermal:
        raise PreconditionError(
            "parametrization is not isothermal to tolerance; "
            "request Gram-Schmidt mode for non-conformal grids")

    det2 = g11 * g22 - g12 ** 2
    if np.min(det2) <= 0:
        raise GeometryError("induced metric is degenerate on the grid")
    area_density = np.sqrt(det2)

    if mode == "isothermal":
        sigma = 0.5 * np.log(0.5 * (g11 + g22))
        es = np.exp(-sigma)[..., None]
        e1, e2 = es * xu, es * xv
    else:
        sigma = None
        e1 = xu / np.sqrt(g11)[..., None]
        e2v = xv - (g12 / g11)[..., None] * xu
        e2 = e2v / np.sqrt(contract2(g, e2v, e2v))[..., None]

    # normal frame
    hint = jet.normal_hint_fn(jet) if jet.normal_hint_fn is not None else None
    used_hint = hint is not None
    lagrangian = complex_curve = False
    if used_hint:
        eps3, eps4 = hint.eps3, hint.eps4
    elif ambient.has_complex_structure:
        jmat = ambient.complex_structure(x)
        je1 = np.einsum("...ij,...j->...i", jmat, e1)
        je2 = np.einsum("...ij,...j->...i", jmat, e2)
        tang = (contract2(g, je1, e1)[..., None] * e1
                + contract2(g, je1, e2)[..., None] * e2)
        tang_norm = np.sqrt(np.abs(contract2(g, tang, tang)))
        if np.max(tang_norm) < 1e-8:          # Lagrangian: J e1 is normal
            lagrangian = True
            eps3, eps4 = -je1, je2
        elif np.min(1.0 - tang_norm) < 1e-8:  # complex curve: J e1 is tangent
            complex_curve = True
            seeds = [np.broadcast_to(row, x.shape).copy() for row in np.eye(4)]
            eps3 = _gs_normal_pair(g, seeds, [e1, e2])[0]
            eps4 = np.einsum("...ij,...j->...i", jmat, eps3)
        else:
            seeds = [np.broadcast_to(row, x.shape).copy() for row in np.eye(4)]
            eps3, eps4 = _gs_normal_pair(g, seeds, [e1, e2])
            target = _normalize(g, _project_out(g, -je1, [e1, e2]))
            c3 = contract2(g, eps3, target)
            c4 = contract2(g, eps4, target)
            alpha = -np.arctan2(c4, c3)
            ca, sa = np.cos(alpha)[..., None], np.sin(alpha)[..., None]
            eps3, eps4 = ca * eps3 - sa * eps4, sa * eps3 + ca * eps4
            flip = contract2(g, eps4, _normalize(g, _project_out(g, je2, [e1, e2])))
            if np.mean(flip) < 0:
                eps4 = -eps4
    else:
        seeds = [np.broadcast_to(row, x.shape).copy() for row in np.eye(4)[::-1]]
        eps3, eps4 = _gs_normal_pair(g, seeds, [e1, e2])

    if gauge_alpha is not None:
        alpha = np.broadcast_to(np.asarray(gauge_alpha, dtype=float), x.shape[:-1])
        ca, sa = np.cos(alpha)[..., None], np.sin(alpha)[..., None]
        # n -> e^{i alpha} n: eps3' = cos a * eps3 - sin a * eps4
        eps3, eps4 = ca * eps3 - sa * eps4, sa * eps3 + ca * eps4
    else:
        alpha = np.zeros(x.shape[:-1])

    # frame residual checks
    for pair, want in (((e1, e1), 1.0), ((e2, e2), 1.0), ((e1, e2), 0.0),
                       ((eps3, eps3), 1.0), ((eps4, eps4), 1.0), ((eps3, eps4), 0.0),
                       ((e1, eps3), 0.0), ((e1, eps4), 0.0),
                       ((e2, eps3), 0.0), ((e2, eps4), 0.0)):
        err = np.max(np.abs(contract2(g, pair[0], pair[1]) - want))
        if err > 1e-7:
            raise GeometryError(f"frame orthonormality residual {err:.2e}")

    diff = Differentiator(jet.domain, jet.shape)

    # theta(d_u), theta(d_v)
    theta_u = contract2(g, xu, e1) + 1j * contract2(g, xu, e2)
    theta_v = contract2(g, xv, e1) + 1j * contract2(g, xv, e2)

    # conformal-factor chain
    sigma_z = sigma_zzbar = None
    if mode == "isothermal":
        if getattr(ambient, "flat", False) or ambient.name == "flat-r4":
            q = np.einsum("...i,...i->...", jet.x_z, jet.x_zbar)
            qz = (np.einsum("...i,...i->...", jet.second_z("zz"), jet.x_zbar)
                  + np.einsum("...i,...i->...", jet.x_z, jet.second_z("zzbar")))
            qzb = (np.einsum("...i,...i->...", jet.second_z("zzbar"), jet.x_zbar)
                   + np.einsum("...i,...i->...", jet.x_z, jet.second_z("zbzb")))
            qzzb = (np.einsum("...i,...i->...", jet.third_z(2, 1), jet.x_zbar)
                    + np.einsum("...i,...i->...", jet.second_z("zz"), jet.second_z("zbzb"))
                    + np.einsum("...i,...i->...", jet.second_z("zzbar"), jet.second_z("zzbar"))
                    + np.einsum("...i,...i->...", jet.x_z, jet.third_z(1, 2)))
            sigma_z = qz / (2 * q)
            sigma_zzbar = qzzb / (2 * q) - qz * qzb / (2 * q ** 2)
        else:
            su, sv = diff.d_u(sigma), diff.d_v(sigma)
            sigma_z = 0.5 * (su - 1j * sv)
            sigma_zzbar = 0.25 * (diff.deriv(sigma, 2, 0) + diff.deriv(sigma, 0, 2))
        w12_u = -2.0 * np.imag(sigma_z)       # w12(d_u) = -sigma_v
        w12_v = 2.0 * np.real(sigma_z)        # w12(d_v) = +sigma_u
    else:
        de1u = np.stack([diff.d_u(e1[..., k]) for k in range(4)], axis=-1)
        de1v = np.stack([diff.d_v(e1[..., k]) for k in range(4)], axis=-1)
        w12_u = contract2(g, de1u + np.einsum("...kij,...i,...j->...k", gamma, xu, e1), e2)
        w12_v = contract2(g, de1v + np.einsum("...kij,...i,...j->...k", gamma, xv, e1), e2)

    if used_hint and hint.deps3_u is not None and gauge_alpha is None:
        n3u = hint.deps3_u + np.einsum("...kij,...i,...j->...k", gamma, xu, eps3)
        n3v = hint.deps3_v + np.einsum("...kij,...i,...j->...k", gamma, xv, eps3)
        w34_u = contract2(g, n3u, eps4)
        w34_v = contract2(g, n3v, eps4)
    else:
        d3u = np.stack([diff.d_u(eps3[..., k]) for k in range(4)], axis=-1)
        d3v = np.stack([diff.d_v(eps3[..., k]) for k in range(4)], axis=-1)
        w34_u = contract2(g, d3u + np.einsum("...kij,...i,...j->...k", gamma, xu, eps3), eps4)
        w34_v = contract2(g, d3v + np.einsum("...kij,...i,...j->...k", gamma, xv, eps3), eps4)

    rho = -0.5 * (w34_v + 1j * w34_u)

    return FrameField(jet=jet, ambient=ambient, mode=mode, e1=e1, e2=e2,
                      eps3=eps3, eps4=eps4, sigma=sigma, sigma_z=sigma_z,
                      sigma_zzbar=sigma_zzbar, rho=rho, theta_u=theta_u,
                      theta_v=theta_v, w12_u=w12_u, w12_v=w12_v, w34_u=w34_u,
                      w34_v=w34_v, area_density=area_density, metric=g,
                      gamma=gamma, gauge_alpha=alpha)


# ---------------------------------------------------------------------------
# weighted covariant derivatives
# ---------------------------------------------------------------------------

def covariant_derivatives(field: Array, p: int, q: int, frame: FrameField,
                          diff: Differentiator) -> tuple[Array, Array]:
    """Coefficients (f_1, f_1bar) of D f = f_1 theta + f_1bar theta-bar.

    The operator is D f = d f - i (p theta_12 + q theta_34) f; the tangent
    weight p increases by one under the 1-derivative and decreases under the
    1bar-derivative, while q is unchanged; conjugation flips (p, q).
    """
    fu = diff.d_u(field) - 1j * (p * frame.w12_u + q * frame.w34_u) * field
    fv = diff.d_v(field) - 1j * (p * frame.w12_v + q * frame.w34_v) * field
    tu, tv = frame.theta_u, frame.theta_v
    det = tu * np.conj(tv) - np.conj(tu) * tv
    f1 = (fu * np.conj(tv) - np.conj(tu) * fv) / det
    f1b = (tu * fv - fu * tv) / det
    return f1, f1b


WEIGHTS = {
    "H": (0, -1), "Hbar": (0, 1),
    "phi": (2, -1), "psi": (2, 1),
    "v": (0, -1),
}


# ---------------------------------------------------------------------------
# invariant fields
# ---------------------------------------------------------------------------

@dataclass
class InvariantField:
    """Pointwise invariants H, phi, psi with covariant derivatives."""

    frame: FrameField
    H: Array
    phi: Array
    psi: Array
    PHI: Optional[Array]          # e^{2 sigma} phi in isothermal charts
    PSI: Optional[Array]
    H1: Array
    H1b: Array
    Hb1: Array
    Hb1b: Array
    phi1: Array
    phi1b: Array
    psi1: Array
    psi1b: Array
    phi11: Array
    phi11b: Array
    phi1b1: Array
    phi1b1b: Array
    psi11: Array
    psi11b: Array
    psi1b1: Array
    psi1b1b: Array
    R1212: Array
    R1234: Array

    @property
    def jet(self) -> SurfaceJet:
        return self.frame.jet

    @property
    def trace_free_sq(self) -> Array:
        return 4.0 * (np.abs(self.phi) ** 2 + np.abs(self.psi) ** 2)

    def integrate(self, field: Array) -> complex:
        w = quadrature_weights(self.jet.domain, self.jet.shape)
        return np.sum(field * self.frame.area_density * w)


def _phi_psi_from_bij(frame: FrameField, diff: Differentiator):
    """Second-fundamental-form route: b-components in the orthonormal frame."""
    jet, g, gamma = frame.jet, frame.metric, frame.gamma
    xu, xv = jet.partial(1, 0), jet.partial(0, 1)
    cov = {}
    cov[(0, 0)] = jet.partial(2, 0) + np.einsum("...kij,...i,...j->...k", gamma, xu, xu)
    cov[(0, 1)] = jet.partial(1, 1) + np.einsum("...kij,...i,...j->...k", gamma, xu, xv)
    cov[(1, 1)] = jet.partial(0, 2) + np.einsum("...kij,...i,...j->...k", gamma, xv, xv)
    g11 = contract2(g, xu, xu)
    g12 = contract2(g, xu, xv)
    g22 = contract2(g, xv, xv)
    # rows of S express (e1, e2) in the coordinate frame (x_u, x_v)
    s11 = 1.0 / np.sqrt(g11)
    denom = np.sqrt(g22 - g12 ** 2 / g11)
    s21 = -(g12 / g11) / denom
    s22 = 1.0 / denom
    S = np.stack([np.stack([s11, np.zeros_like(s11)], -1),
                  np.stack([s21, s22], -1)], -2)
    b = {}
    for al, eps in (("3", frame.eps3), ("4", frame.eps4)):
        beta = np.stack([np.stack([contract2(g, cov[(0, 0)], eps),
                                   contract2(g, cov[(0, 1)], eps)], -1),
                         np.stack([contract2(g, cov[(0, 1)], eps),
                                   contract2(g, cov[(1, 1)], eps)], -1)], -2)
        b[al] = np.einsum("...ia,...jb,...ab->...ij", S, S, beta)
    two_phi = ((b["4"][..., 0, 1] + 0.5 * (b["3"][..., 0, 0] - b["3"][..., 1, 1]))
               - 1j * (b["3"][..., 0, 1] - 0.5 * (b["4"][..., 0, 0] - b["4"][..., 1, 1])))
    two_psi = ((-b["4"][..., 0, 1] + 0.5 * (b["3"][..., 0, 0] - b["3"][..., 1, 1]))
               - 1j * (b["3"][..., 0, 1] + 0.5 * (b["4"][..., 0, 0] - b["4"][..., 1, 1])))
    H = 0.5 * ((b["3"][..., 0, 0] + b["3"][..., 1, 1])
               + 1j * (b["4"][..., 0, 0] + b["4"][..., 1, 1]))
    return 0.5 * two_phi, 0.5 * two_psi, H


def invariant_fields(jet: SurfaceJet, ambient: AmbientModel,
                     frame: FrameField) -> InvariantField:
    """Populate H, phi, psi and their covariant derivatives on the grid."""
    if jet.shape[0] < 16 or jet.shape[1] < 16:
        raise ConfigError("grid too coarse for derivative fields (need N, M >= 16)")
    diff = Differentiator(jet.domain, jet.shape)
    g, gamma, n = frame.metric, frame.gamma, frame.n

    if frame.mode == "isothermal":
        e2s = np.exp(2 * frame.sigma)
        nabla_z_xz = jet.second_z("zz") + np.einsum("...kij,...i,...j->...k",
                                                    gamma, jet.x_z, jet.x_z)
        nabla_z_xzb = jet.second_z("zzbar") + np.einsum("...kij,...i,...j->...k",
                                                        gamma, jet.x_z, jet.x_zbar)
        PHI = contract2(g, nabla_z_xz, n)
        PSI = contract2(g, nabla_z_xz, np.conj(n))
        H = 2.0 * contract2(g, nabla_z_xzb, n) / e2s
        phi = PHI / e2s
        psi = PSI / e2s
    else:
        phi, psi, H = _phi_psi_from_bij(frame, diff)
        PHI = PSI = None

    H1, H1b = covariant_derivatives(H, 0, -1, frame, diff)
    Hb1, Hb1b = covariant_derivatives(np.conj(H), 0, 1, frame, diff)
    phi1, phi1b = covariant_derivatives(phi, 2, -1, frame, diff)
    psi1, psi1b = covariant_derivatives(psi, 2, 1, frame, diff)
    phi11, phi11b = covariant_derivatives(phi1, 3, -1, frame, diff)
    phi1b1, phi1b1b = covariant_derivatives(phi1b, 1, -1, frame, diff)
    psi11, psi11b = covariant_derivatives(psi1, 3, 1, frame, diff)
    psi1b1, psi1b1b = covariant_derivatives(psi1b, 1, 1, frame, diff)

    if frame.mode == "isothermal" and frame.sigma_zzbar is not None:
        R1212 = np.real(-4.0 * np.exp(-2 * frame.sigma) * frame.sigma_zzbar)
    else:
        R1212 = (diff.d_v(frame.w12_u) - diff.d_u(frame.w12_v)) / frame.area_density
    R1234 = (diff.d_v(frame.w34_u) - diff.d_u(frame.w34_v)) / frame.area_density

    return InvariantField(frame=frame, H=H, phi=phi, psi=psi, PHI=PHI, PSI=PSI,
                          H1=H1, H1b=H1b, Hb1=Hb1, Hb1b=Hb1b,
                          phi1=phi1, phi1b=phi1b, psi1=psi1, psi1b=psi1b,
                          phi11=phi11, phi11b=phi11b, phi1b1=phi1b1,
                          phi1b1b=phi1b1b, psi11=psi11, psi11b=psi11b,
                          psi1b1=psi1b1, psi1b1b=psi1b1b,
                          R1212=np.real(R1212), R1234=np.real(R1234))


def gauss_codazzi_ricci_residuals(inv: InvariantField, ambient: AmbientModel,
                                  frame: FrameField):
    """Pointwise residuals of the Gauss, two Codazzi, and Ricci equations."""
    kten = ambient.riemann(frame.jet.x)
    e, n = frame.e, frame.n
    eb, nb = np.conj(e), np.conj(n)
    k1212 = np.real(contract4(kten, (e + eb) / 2, (e - eb) / 2j,
                              (e + eb) / 2, (e - eb) / 2j))
    k1234 = np.real(contract4(kten, (e + eb) / 2, (e - eb) / 2j,
                              (n + nb) / 2, (n - nb) / 2j))
    gauss = inv.R1212 - k1212 - np.abs(inv.H) ** 2 \
        + 2 * (np.abs(inv.phi) ** 2 + np.abs(inv.psi) ** 2)
    codazzi_phi = 2 * inv.phi1b - inv.H1 - 0.25 * contract4(kten, eb, n, eb, e)
    codazzi_psi = 2 * inv.psi1b - inv.Hb1 - 0.25 * contract4(kten, eb, nb, eb, e)
    ricci = inv.R1234 - k1234 - 2 * (np.abs(inv.phi) ** 2 - np.abs(inv.psi) ** 2)
    return gauss, codazzi_phi, codazzi_psi, ricci


def rotate_normal_gauge(jet: SurfaceJet, ambient: AmbientModel, alpha,
                        mode: str = "auto"):
    """Rebuild frame and invariants with the normal gauge n -> e^{i alpha} n."""
    frame = build_frame(jet, ambient, mode=mode, gauge_alpha=alpha)
    return frame, invariant_fields(jet, ambient, frame)
