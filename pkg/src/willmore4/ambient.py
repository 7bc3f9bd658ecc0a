"""Ambient 4-manifold geometry: metrics, curvature, conformal rescaling.

All evaluators are vectorized over an arbitrary batch of chart points
``pts`` with shape ``(..., 4)``.  The curvature tensor is stored with all
indices lowered, in the sign convention where ``K(X, Y, X, Y)`` is the
(unnormalized) sectional curvature, so the round sphere has ``K > 0`` and
the Fubini-Study plane has holomorphic sectional curvature 4.

Complexified tensor arguments are handled by complex-multilinear extension
of the real arrays; nothing is conjugated implicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import ConfigError, NumericError

Array = np.ndarray


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def _central4(fn: Callable[[Array], Array], pts: Array, k: int, h: float) -> Array:
    """4th-order central difference of ``fn`` along coordinate ``k``."""
    e = np.zeros(4)
    e[k] = 1.0
    return (-fn(pts + 2 * h * e) + 8 * fn(pts + h * e)
            - 8 * fn(pts - h * e) + fn(pts - 2 * h * e)) / (12 * h)


def richardson_partial(fn: Callable[[Array], Array], pts: Array, k: int, h: float) -> Array:
    """Richardson-extrapolated partial derivative (steps h and h/2)."""
    return (16.0 * _central4(fn, pts, k, h / 2) - _central4(fn, pts, k, h)) / 15.0


# ---------------------------------------------------------------------------
# ambient model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LambdaJet:
    """Conformal factor with derivatives to second order."""

    value: Callable[[Array], Array]
    gradient: Callable[[Array], Array]      # (..., 4)
    hessian: Callable[[Array], Array]       # (..., 4, 4), plain chart partials

    def __call__(self, pts: Array):
        return self.value(pts), self.gradient(pts), self.hessian(pts)


def constant_lambda(c: float) -> LambdaJet:
    return LambdaJet(
        value=lambda p: np.full(p.shape[:-1], float(c)),
        gradient=lambda p: np.zeros(p.shape[:-1] + (4,)),
        hessian=lambda p: np.zeros(p.shape[:-1] + (4, 4)),
    )


def gaussian_bump_lambda(height: float, center, width: float) -> LambdaJet:
    """lambda(x) = height * exp(-|x - center|^2 / (2 width^2))."""
    c = np.asarray(center, dtype=float)
    w2 = float(width) ** 2

    def value(p):
        d = p - c
        return height * np.exp(-np.sum(d * d, axis=-1) / (2 * w2))

    def gradient(p):
        d = p - c
        return value(p)[..., None] * (-d / w2)

    def hessian(p):
        d = p - c
        lam = value(p)
        eye = np.eye(4)
        return lam[..., None, None] * (
            np.einsum("...i,...j->...ij", d, d) / w2 ** 2 - eye / w2)

    return LambdaJet(value, gradient, hessian)


@dataclass(frozen=True)
class AmbientModel:
    """A 4-manifold chart with metric, curvature, and optional extras."""

    name: str
    metric_fn: Callable[[Array], Array]
    dmetric_fn: Optional[Callable[[Array], Array]] = None  # (...,4,4,4): d_k g_ij last index
    riemann_fn: Optional[Callable[[Array], Array]] = None  # closed-form K_{ijkl}
    complex_structure_fn: Optional[Callable[[Array], Array]] = None  # J^i_j
    symmetry_flag: bool = False
    curvature_mode: str = "analytic"        # "analytic" | "finite-difference" | "conformal"
    fd_step: float = 0.02
    conformal_base: Optional["AmbientModel"] = None
    conformal_lambda: Optional[LambdaJet] = None

    # -- basic fields ----------------------------------------------------

    def metric(self, pts: Array) -> Array:
        g = self.metric_fn(np.asarray(pts, dtype=float))
        if not np.all(np.isfinite(g)):
            raise NumericError(f"non-finite metric values in model {self.name!r}")
        return g

    def inverse_metric(self, pts: Array) -> Array:
        return np.linalg.inv(self.metric(pts))

    def dmetric(self, pts: Array) -> Array:
        pts = np.asarray(pts, dtype=float)
        if self.conformal_base is not None:
            lam, dlam, _ = self.conformal_lambda(pts)
            g = self.conformal_base.metric(pts)
            dg = self.conformal_base.dmetric(pts)
            scale = np.exp(2 * lam)[..., None, None, None]
            return scale * (dg + 2 * np.einsum("...ij,...k->...ijk", g, dlam))
        if self.dmetric_fn is not None:
            return self.dmetric_fn(pts)
        out = np.stack([richardson_partial(self.metric_fn, pts, k, self.fd_step)
                        for k in range(4)], axis=-1)
        return out

    def christoffels(self, pts: Array) -> Array:
        """Gamma^k_{ij} as (..., 4, 4, 4) with the upper index first."""
        pts = np.asarray(pts, dtype=float)
        if self.conformal_base is not None:
            base = self.conformal_base
            gamma = base.christoffels(pts)
            _, dlam, _ = self.conformal_lambda(pts)
            g = base.metric(pts)
            ginv = np.linalg.inv(g)
            eye = np.eye(4)
            grad_up = np.einsum("...kl,...l->...k", ginv, dlam)
            corr = (np.einsum("ki,...j->...kij", eye, dlam)
                    + np.einsum("kj,...i->...kij", eye, dlam)
                    - np.einsum("...ij,...k->...kij", g, grad_up))
            return gamma + corr
        g = self.metric(pts)
        dg = self.dmetric(pts)
        ginv = np.linalg.inv(g)
        # Gamma^k_ij = 1/2 g^{kl} (d_i g_lj + d_j g_li - d_l g_ij)
        term = (np.einsum("...lji->...lij", dg) + np.einsum("...lij->...lij", dg)
                - np.einsum("...ijl->...lij", dg))
        return 0.5 * np.einsum("...kl,...lij->...kij", ginv, term)

    def dchristoffels(self, pts: Array) -> Array:
        """d_m Gamma^k_{ij} as (..., 4, 4, 4, 4), derivative index last."""
        pts = np.asarray(pts, dtype=float)
        return np.stack([richardson_partial(self.christoffels, pts, m, self.fd_step)
                         for m in range(4)], axis=-1)

    # -- curvature ---------------------------------------------------------

    def riemann(self, pts: Array) -> Array:
        """Full lowered curvature tensor K_{ijkl}, shape (..., 4, 4, 4, 4)."""
        pts = np.asarray(pts, dtype=float)
        if self.conformal_base is not None:
            return self._riemann_conformal(pts)
        if self.riemann_fn is not None:
            return self.riemann_fn(pts)
        return self._riemann_from_metric(pts)

    def _riemann_from_metric(self, pts: Array) -> Array:
        g = self.metric(pts)
        gamma = self.christoffels(pts)
        dgamma = self.dchristoffels(pts)
        # R^m_{ijk} for R(d_i, d_j) d_k
        r_up = (np.einsum("...mjki->...mijk", dgamma)
                - np.einsum("...mikj->...mijk", dgamma)
                + np.einsum("...mip,...pjk->...mijk", gamma, gamma)
                - np.einsum("...mjp,...pik->...mijk", gamma, gamma))
        # K_{ijkl} = -<R(d_i,d_j) d_k, d_l>, so K(X,Y,X,Y) is sectional
        return -np.einsum("...lm,...mijk->...ijkl", g, r_up)

    def _riemann_conformal(self, pts: Array) -> Array:
        base = self.conformal_base
        lam, dlam, hess = self.conformal_lambda(pts)
        g = base.metric(pts)
        k0 = base.riemann(pts)
        gamma = base.christoffels(pts)
        ginv = np.linalg.inv(g)
        # covariant Hessian wrt the base metric
        d2 = hess - np.einsum("...kij,...k->...ij", gamma, dlam)
        p = d2 - np.einsum("...i,...j->...ij", dlam, dlam)
        grad2 = np.einsum("...ij,...i,...j->...", ginv, dlam, dlam)
        gg = np.einsum("...ik,...jl->...ijkl", g, g)
        ggt = np.einsum("...il,...jk->...ijkl", g, g)
        gp = (np.einsum("...jl,...ik->...ijkl", g, p)
              + np.einsum("...ik,...jl->...ijkl", g, p)
              - np.einsum("...il,...jk->...ijkl", g, p)
              - np.einsum("...jk,...il->...ijkl", g, p))
        k = k0 - grad2[..., None, None, None, None] * (gg - ggt) - gp
        return np.exp(2 * lam)[..., None, None, None, None] * k

    def ricci(self, pts: Array) -> Array:
        """Ric_{jl} = g^{ik} K_{ijkl} (positive on the round sphere)."""
        k = self.riemann(pts)
        ginv = self.inverse_metric(pts)
        return np.einsum("...ik,...ijkl->...jl", ginv, k)

    def scalar_curvature(self, pts: Array) -> Array:
        ginv = self.inverse_metric(pts)
        return np.einsum("...jl,...jl->...", ginv, self.ricci(pts))

    def weyl(self, pts: Array) -> Array:
        """Weyl tensor from the curvature with scalar and Ricci corrections."""
        g = self.metric(pts)
        k = self.riemann(pts)
        ric = self.ricci(pts)
        scal = self.scalar_curvature(pts)
        gg = (np.einsum("...ik,...jl->...ijkl", g, g)
              - np.einsum("...jk,...il->...ijkl", g, g))
        gric = (np.einsum("...ik,...jl->...ijkl", g, ric)
                + np.einsum("...jl,...ik->...ijkl", g, ric)
                - np.einsum("...jk,...il->...ijkl", g, ric)
                - np.einsum("...il,...jk->...ijkl", g, ric))
        return k + (scal / 6.0)[..., None, None, None, None] * gg - 0.5 * gric

    def nabla_riemann(self, pts: Array, direction: Array) -> Array:
        """(nabla_d K)_{ijkl}; exact zero when the model is locally symmetric."""
        pts = np.asarray(pts, dtype=float)
        d = np.asarray(direction, dtype=float)
        if self.symmetry_flag:
            return np.zeros(pts.shape[:-1] + (4, 4, 4, 4))
        h = 1e-3
        gamma = self.christoffels(pts)
        # first-order parallel transport of the coordinate frame to p +/- h d;
        # even-order transport errors cancel in the central difference
        shift = np.einsum("...kij,...j->...ki", gamma, d) * h
        eye = np.eye(4)
        frame_p = eye - shift   # columns: transported basis vectors at p + h d
        frame_m = eye + shift
        kp = self.riemann(pts + h * d)
        km = self.riemann(pts - h * d)
        kp = np.einsum("...abcd,...ai,...bj,...ck,...dl->...ijkl",
                       kp, frame_p, frame_p, frame_p, frame_p)
        km = np.einsum("...abcd,...ai,...bj,...ck,...dl->...ijkl",
                       km, frame_m, frame_m, frame_m, frame_m)
        return (kp - km) / (2 * h)

    # -- complex structure -------------------------------------------------

    @property
    def has_complex_structure(self) -> bool:
        return self.complex_structure_fn is not None

    def complex_structure(self, pts: Array) -> Array:
        if self.complex_structure_fn is None:
            raise ConfigError(f"model {self.name!r} has no complex structure")
        return self.complex_structure_fn(np.asarray(pts, dtype=float))

    # -- geodesics -----------------------------------------------------------

    def geodesic_step(self, x0: Array, v0: Array, t: float, nsteps: int = 64) -> Array:
        """Endpoint of the geodesic from x0 with initial velocity t*v0 (RK4)."""
        x = np.array(x0, dtype=float)
        p = np.asarray(v0, dtype=float) * t
        if nsteps <= 0:
            return x
        dt = 1.0 / nsteps

        def acc(x, p):
            gamma = self.christoffels(x)
            return -np.einsum("...kij,...i,...j->...k", gamma, p, p)

        for _ in range(nsteps):
            k1x, k1p = p, acc(x, p)
            k2x, k2p = p + 0.5 * dt * k1p, acc(x + 0.5 * dt * k1x, p + 0.5 * dt * k1p)
            k3x, k3p = p + 0.5 * dt * k2p, acc(x + 0.5 * dt * k2x, p + 0.5 * dt * k2p)
            k4x, k4p = p + dt * k3p, acc(x + dt * k3x, p + dt * k3p)
            x = x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            p = p + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p)
        return x


# ---------------------------------------------------------------------------
# tensor contraction with (complexified) vectors
# ---------------------------------------------------------------------------

def contract4(tensor: Array, x, y, z, w) -> Array:
    """Complex-multilinear contraction of a lowered rank-4 tensor field."""
    return np.einsum("...ijkl,...i,...j,...k,...l->...", tensor, x, y, z, w)


def contract2(tensor: Array, x, y) -> Array:
    return np.einsum("...ij,...i,...j->...", tensor, x, y)


def conformal_rescale(model: AmbientModel, lam: LambdaJet) -> AmbientModel:
    """Model with metric e^{2 lambda} h and curvature from the exact
    conformal-change formula (no re-differentiation of the product metric)."""
    if lam is None:
        raise ConfigError("conformal_rescale requires a lambda jet")
    base_metric = model.metric_fn

    def metric_fn(pts):
        l = lam.value(pts)
        return np.exp(2 * l)[..., None, None] * base_metric(pts)

    return AmbientModel(
        name=f"{model.name}+conformal",
        metric_fn=metric_fn,
        complex_structure_fn=model.complex_structure_fn,
        symmetry_flag=False,
        curvature_mode="conformal",
        conformal_base=model,
        conformal_lambda=lam,
    )


# ---------------------------------------------------------------------------
# built-in models
# ---------------------------------------------------------------------------

def flat_r4() -> AmbientModel:
    def metric_fn(pts):
        return np.broadcast_to(np.eye(4), pts.shape[:-1] + (4, 4)).copy()

    def dmetric_fn(pts):
        return np.zeros(pts.shape[:-1] + (4, 4, 4))

    def riemann_fn(pts):
        return np.zeros(pts.shape[:-1] + (4, 4, 4, 4))

    return AmbientModel("flat-r4", metric_fn, dmetric_fn, riemann_fn,
                        symmetry_flag=True)


def round_s4(radius: float = 1.0) -> AmbientModel:
    r2 = float(radius) ** 2

    def rho(pts):
        return 1.0 / (1.0 + np.sum(pts * pts, axis=-1) / (4 * r2))

    def metric_fn(pts):
        return rho(pts)[..., None, None] ** 2 * np.eye(4)

    def dmetric_fn(pts):
        f = rho(pts)
        df = -(pts / (2 * r2)) * f[..., None] ** 2
        return 2 * np.einsum("...,...k,ij->...ijk", f, df, np.eye(4))

    def riemann_fn(pts):
        g = metric_fn(pts)
        return (np.einsum("...ik,...jl->...ijkl", g, g)
                - np.einsum("...il,...jk->...ijkl", g, g)) / r2

    return AmbientModel("round-s4", metric_fn, dmetric_fn, riemann_fn,
                        symmetry_flag=True)


_J4 = np.array([[0.0, -1.0, 0.0, 0.0],
                [1.0, 0.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, -1.0],
                [0.0, 0.0, 1.0, 0.0]])


def _fs_hermitian(w: Array) -> Array:
    """Hermitian matrix h_{a b-bar} of the Fubini-Study metric (c = 4)."""
    d = 1.0 + np.sum(np.abs(w) ** 2, axis=-1)
    eye = np.eye(2)
    return (eye / d[..., None, None]
            - np.einsum("...a,...b->...ab", np.conj(w), w) / d[..., None, None] ** 2)


def _fs_dhermitian(w: Array):
    """Holomorphic and antiholomorphic derivatives of h_{a b-bar}."""
    d = (1.0 + np.sum(np.abs(w) ** 2, axis=-1))[..., None, None, None]
    eye = np.eye(2)
    wb, ww = np.conj(w), w
    dh_dw = (-np.einsum("ab,...c->...abc", eye, wb) / d ** 2
             - np.einsum("...a,bc->...abc", wb, eye) / d ** 2
             + 2 * np.einsum("...a,...b,...c->...abc", wb, ww, wb) / d ** 3)
    dh_dwb = (-np.einsum("ab,...c->...abc", eye, ww) / d ** 2
              - np.einsum("ac,...b->...abc", eye, ww) / d ** 2
              + 2 * np.einsum("...a,...b,...c->...abc", wb, ww, ww) / d ** 3)
    return dh_dw, dh_dwb


_BASIS_C = np.array([[1.0, 0.0], [1.0j, 0.0], [0.0, 1.0], [0.0, 1.0j]])


def cp2_fubini_study() -> AmbientModel:
    """CP^2 in the affine chart C^2 ~ R^4, holomorphic sectional curvature 4.

    Chart coordinates (x1, x2, x3, x4) correspond to (w1, w2) = (x1 + i x2,
    x3 + i x4).  Near the chart boundary (|w| large) users should switch to
    another affine chart [w1 : 1 : w2]-style by inverting coordinates; the
    built-in surface catalog stays on |w| = O(1) so no switch is performed
    automatically.
    """

    def w_of(pts):
        return np.stack([pts[..., 0] + 1j * pts[..., 1],
                         pts[..., 2] + 1j * pts[..., 3]], axis=-1)

    def metric_fn(pts):
        h = _fs_hermitian(w_of(pts))
        g = np.einsum("ia,...ab,jb->...ij", _BASIS_C, h, np.conj(_BASIS_C))
        return np.real(g)

    def dmetric_fn(pts):
        w = w_of(pts)
        dh_dw, dh_dwb = _fs_dhermitian(w)
        # real partials: d/dx1 = d/dw1 + d/dw1b, d/dx2 = i d/dw1 - i d/dw1b, ...
        parts = []
        for c, coef in ((0, 1.0), (0, 1.0j), (1, 1.0), (1, 1.0j)):
            dh = coef * dh_dw[..., c] + np.conj(coef) * dh_dwb[..., c]
            dg = np.einsum("ia,...ab,jb->...ij", _BASIS_C, dh, np.conj(_BASIS_C))
            parts.append(np.real(dg))
        return np.stack(parts, axis=-1)

    def complex_structure_fn(pts):
        return np.broadcast_to(_J4, pts.shape[:-1] + (4, 4)).copy()

    def riemann_fn(pts):
        g = metric_fn(pts)
        q = np.einsum("...im,mj->...ij", g, _J4)  # q_ij = <d_i, J d_j>
        return (np.einsum("...ik,...jl->...ijkl", g, g)
                - np.einsum("...il,...jk->...ijkl", g, g)
                + np.einsum("...ik,...jl->...ijkl", q, q)
                - np.einsum("...il,...jk->...ijkl", q, q)
                + 2 * np.einsum("...ij,...kl->...ijkl", q, q))

    return AmbientModel("cp2-fubini-study", metric_fn, dmetric_fn, riemann_fn,
                        complex_structure_fn=complex_structure_fn,
                        symmetry_flag=True)


def custom_metric(expressions: dict, symmetry_flag: bool = False) -> AmbientModel:
    """Metric from per-component closed-form expressions in x1..x4.

    ``expressions`` maps component names like "g11", "g12" to expression
    strings; missing off-diagonal components default to 0, missing diagonal
    components to 1.  Curvature is evaluated by Richardson-extrapolated
    finite differences of the metric.
    """
    from .expressions import compile_expression

    variables = ("x1", "x2", "x3", "x4")
    compiled = {}
    for key, text in expressions.items():
        if not (len(key) == 3 and key.startswith("g")
                and key[1] in "1234" and key[2] in "1234"):
            raise ConfigError(f"bad metric component name {key!r}")
        compiled[(int(key[1]) - 1, int(key[2]) - 1)] = compile_expression(text, variables)

    def metric_fn(pts):
        env = {f"x{k+1}": pts[..., k] for k in range(4)}
        g = np.zeros(pts.shape[:-1] + (4, 4))
        for i in range(4):
            for j in range(4):
                fn = compiled.get((i, j)) or compiled.get((j, i))
                if fn is not None:
                    g[..., i, j] = fn(**env)
                elif i == j:
                    g[..., i, j] = 1.0
        g = 0.5 * (g + np.swapaxes(g, -1, -2))
        if not np.all(np.isfinite(g)):
            raise NumericError("custom metric evaluated to non-finite values")
        return g

    return AmbientModel("custom", metric_fn, symmetry_flag=symmetry_flag,
                        curvature_mode="finite-difference")


AMBIENT_CATALOG = {
    "flat-r4": flat_r4,
    "round-s4": round_s4,
    "cp2-fubini-study": cp2_fubini_study,
}


def make_ambient(name: str, params: dict | None = None) -> AmbientModel:
    params = dict(params or {})
    if name == "custom":
        expressions = params.pop("components", None)
        if not isinstance(expressions, dict):
            raise ConfigError("custom ambient requires a 'components' expression table")
        flag = bool(params.pop("symmetry_flag", False))
        if params:
            raise ConfigError(f"unknown ambient parameters: {sorted(params)}")
        return custom_metric(expressions, symmetry_flag=flag)
    if name not in AMBIENT_CATALOG:
        raise ConfigError(f"unknown ambient model {name!r}; "
                          f"choose from {sorted(AMBIENT_CATALOG) + ['custom']}")
    try:
        return AMBIENT_CATALOG[name](**params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for ambient {name!r}: {exc}") from None
