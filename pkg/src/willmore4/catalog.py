"""Built-in immersion catalog, referenced by name from run configurations.

Every entry returns a :class:`~willmore4.surface.SurfaceJet` with analytic
jets (evaluated in truncated Taylor arithmetic), plus topological data and,
where useful, an analytic normal frame.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigError, GeometryError
from .expressions import compile_expression
from .jets import Jet
from .surface import (Domain, NormalFrameHint, SurfaceJet, grid_points,
                      rectangle_domain, surface_from_jets, torus_domain)

SQRT3 = np.sqrt(3.0)

CLIFFORD_LATTICE = np.array([[np.pi / SQRT3, -np.pi / 3.0],
                             [np.pi / SQRT3, np.pi / 3.0]])


def _param_jets(domain: Domain, shape):
    u, v = grid_points(domain, shape)
    return Jet.variable(u, 0), Jet.variable(v, 1)


def _check_torus_periodicity(component_fns, domain: Domain, linear_part, name):
    rng = np.random.default_rng(7)
    pts = rng.uniform(-1.0, 1.0, size=(3, 2))
    lp = np.zeros((2, 4)) if linear_part is None else np.asarray(linear_part)
    for lam in domain.lattice:
        for p in pts:
            a = np.array([fn(p[0], p[1]) for fn in component_fns])
            b = np.array([fn(p[0] + lam[0], p[1] + lam[1]) for fn in component_fns])
            drift = b - a - lam[0] * lp[0] - lam[1] * lp[1]
            if np.max(np.abs(drift)) > 1e-10:
                raise GeometryError(f"{name}: immersion is not periodic over the "
                                    f"declared lattice (drift {np.max(np.abs(drift)):.2e})")


def clifford_torus_cp2(shape) -> SurfaceJet:
    """Minimal Lagrangian torus |z1| = |z2| = |z3| in the CP^2 affine chart.

    Coordinates (t, s) = (u, v) carry the flat metric 2(dt^2 + ds^2); the
    chart functions are w1 = exp(i(sqrt(3) t - 3 s)), w2 = exp(-i(sqrt(3) t
    + 3 s)), which are periodic over the lattice spanned by
    (pi/sqrt(3), -pi/3) and (pi/sqrt(3), pi/3).
    """
    domain = torus_domain(CLIFFORD_LATTICE)
    uj, vj = _param_jets(domain, shape)
    p1 = uj * SQRT3 - vj * 3.0
    p2 = -(uj * SQRT3) - vj * 3.0
    comps = [p1.cos(), p1.sin(), p2.cos(), p2.sin()]

    def fn(k):
        table = [lambda t, s: np.cos(SQRT3 * t - 3 * s),
                 lambda t, s: np.sin(SQRT3 * t - 3 * s),
                 lambda t, s: np.cos(-SQRT3 * t - 3 * s),
                 lambda t, s: np.sin(-SQRT3 * t - 3 * s)]
        return table[k]

    _check_torus_periodicity([fn(k) for k in range(4)], domain, None, "clifford-torus-cp2")
    return surface_from_jets(domain, shape, comps, name="clifford-torus-cp2",
                             chi_topology=(0, 0))


def veronese_cp2(shape, cap: float = 0.05) -> SurfaceJet:
    """Veronese curve [1, sqrt(2) z, z^2] on a conformal cylinder chart.

    The chart is z = exp(u + i v) with the polar caps of angular radius
    ``cap`` (in the round parametrizing-sphere angle) removed; v is periodic.
    """
    smax = float(np.log(np.tan((np.pi - cap) / 2)))
    domain = rectangle_domain(((-smax, smax), (0.0, 2 * np.pi)),
                              periodic=(False, True))
    uj, vj = _param_jets(domain, shape)
    r = uj.exp()
    c1, s1 = vj.cos(), vj.sin()
    r2 = (uj * 2.0).exp()
    c2, s2 = (vj * 2.0).cos(), (vj * 2.0).sin()
    comps = [np.sqrt(2.0) * r * c1, np.sqrt(2.0) * r * s1, r2 * c2, r2 * s2]
    return surface_from_jets(domain, shape, comps, name="veronese-cp2",
                             chi_topology=(2, 4))


def flat_plane_r4(shape, period: float = 2 * np.pi) -> SurfaceJet:
    """Totally geodesic plane patch, treated as a torus by periodic extension."""
    domain = torus_domain(np.diag([period, period]))
    uj, vj = _param_jets(domain, shape)
    zero = Jet.constant(0.0, uj.c.shape[2:])
    lp = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])
    return surface_from_jets(domain, shape, [uj, vj, zero, zero],
                             name="flat-plane-r4", linear_part=lp,
                             chi_topology=(0, 0))


def stereographic_sphere_r4(shape, radius: float = 1.0, extent: float = 1.5) -> SurfaceJet:
    """Round sphere of the given radius in R^3 x {0}, stereographic chart."""
    r = float(radius)
    domain = rectangle_domain(((-extent, extent), (-extent, extent)))
    uj, vj = _param_jets(domain, shape)
    d = uj * uj + vj * vj + 1.0
    inv = d.reciprocal()
    comps = [2.0 * r * uj * inv, 2.0 * r * vj * inv,
             r * (uj * uj + vj * vj - 1.0) * inv,
             Jet.constant(0.0, uj.c.shape[2:])]

    def normal_hint(jet: SurfaceJet) -> NormalFrameHint:
        eps3 = jet.x / r
        eps4 = np.zeros_like(jet.x)
        eps4[..., 3] = 1.0
        return NormalFrameHint(eps3=eps3, eps4=eps4,
                               deps3_u=jet.partial(1, 0) / r,
                               deps3_v=jet.partial(0, 1) / r,
                               deps4_u=np.zeros_like(jet.x),
                               deps4_v=np.zeros_like(jet.x))

    return surface_from_jets(domain, shape, comps, name="stereographic-sphere-r4",
                             chi_topology=(2, 0), normal_hint_fn=normal_hint)


def ellipsoid_r3(shape, a: float = 1.0, c: float = 1.45, extent: float = 3.0) -> SurfaceJet:
    """Ellipsoid of revolution (semi-axes a, a, c) in R^3 x {0}.

    The chart is a stereographic projection of the parametrizing round
    sphere from an equatorial point, so both umbilics sit at the interior
    chart points (0, +-1).
    """
    if abs(a - c) < 1e-9:
        raise ConfigError("ellipsoid-r3 requires distinct semi-axes (a != c)")
    domain = rectangle_domain(((-extent, extent), (-extent, extent)))
    uj, vj = _param_jets(domain, shape)
    d = uj * uj + vj * vj + 1.0
    inv = d.reciprocal()
    comps = [a * (uj * uj + vj * vj - 1.0) * inv,
             2.0 * a * uj * inv,
             2.0 * c * vj * inv,
             Jet.constant(0.0, uj.c.shape[2:])]

    aa, cc = float(a) ** 2, float(c) ** 2

    def normal_hint(jet: SurfaceJet) -> NormalFrameHint:
        grad = np.stack([jet.x[..., 0] / aa, jet.x[..., 1] / aa,
                         jet.x[..., 2] / cc, np.zeros(jet.shape)], axis=-1)
        grad = grad / np.linalg.norm(grad, axis=-1, keepdims=True)
        eps4 = np.zeros_like(jet.x)
        eps4[..., 3] = 1.0
        return NormalFrameHint(eps3=grad, eps4=eps4)

    return surface_from_jets(domain, shape, comps, name="ellipsoid-r3",
                             chi_topology=(2, 0), normal_hint_fn=normal_hint)


DEFAULT_GRAPH_MODES = ("cos(u)*sin(v)", "sin(2*u)*cos(v)")


def graph_torus_r4(shape, eps: float = 0.1, component3: str | None = None,
                   component4: str | None = None) -> SurfaceJet:
    """Graph torus (u, v, eps*f, eps*g) over the square lattice, periodic."""
    domain = torus_domain(np.diag([2 * np.pi, 2 * np.pi]))
    uj, vj = _param_jets(domain, shape)
    f3 = compile_expression(component3 or DEFAULT_GRAPH_MODES[0], ("u", "v"))
    f4 = compile_expression(component4 or DEFAULT_GRAPH_MODES[1], ("u", "v"))
    comps = [uj, vj, float(eps) * f3(u=uj, v=vj), float(eps) * f4(u=uj, v=vj)]
    lp = np.array([[1.0, 0, 0, 0], [0, 1.0, 0, 0]])

    def fscalar(expr):
        fn = compile_expression(expr, ("u", "v"))
        return lambda u, v: float(eps) * fn(u=np.asarray(u), v=np.asarray(v))

    fns = [lambda u, v: np.asarray(u), lambda u, v: np.asarray(v),
           fscalar(component3 or DEFAULT_GRAPH_MODES[0]),
           fscalar(component4 or DEFAULT_GRAPH_MODES[1])]
    _check_torus_periodicity(fns, domain, lp, "graph-torus-r4")
    return surface_from_jets(domain, shape, comps, name="graph-torus-r4",
                             linear_part=lp, chi_topology=(0, 0))


def custom_immersion(shape, components, domain_spec: dict,
                     linear_part=None) -> SurfaceJet:
    """Immersion from four expression strings in (u, v)."""
    if not (isinstance(components, (list, tuple)) and len(components) == 4):
        raise ConfigError("custom immersion needs exactly 4 component expressions")
    kind = domain_spec.get("kind")
    if kind == "torus":
        domain = torus_domain(np.asarray(domain_spec["lattice"], dtype=float))
    elif kind == "rectangle":
        domain = rectangle_domain(tuple(map(tuple, domain_spec["bounds"])),
                                  periodic=tuple(domain_spec.get("periodic", (False, False))))
    else:
        raise ConfigError(f"unknown domain kind {kind!r}")
    uj, vj = _param_jets(domain, shape)
    fns = [compile_expression(text, ("u", "v")) for text in components]
    comps = [fn(u=uj, v=vj) for fn in fns]
    if kind == "torus":
        scalar_fns = [
            (lambda fn: lambda u, v: np.asarray(fn(u=np.asarray(u, float),
                                                   v=np.asarray(v, float))))(fn)
            for fn in fns]
        _check_torus_periodicity(scalar_fns, domain, linear_part, "custom")
    return surface_from_jets(domain, shape, comps, name="custom",
                             linear_part=linear_part)


SURFACE_CATALOG = {
    "clifford-torus-cp2": clifford_torus_cp2,
    "veronese-cp2": veronese_cp2,
    "flat-plane-r4": flat_plane_r4,
    "stereographic-sphere-r4": stereographic_sphere_r4,
    "ellipsoid-r3": ellipsoid_r3,
    "graph-torus-r4": graph_torus_r4,
}

PREFERRED_AMBIENT = {
    "clifford-torus-cp2": "cp2-fubini-study",
    "veronese-cp2": "cp2-fubini-study",
    "flat-plane-r4": "flat-r4",
    "stereographic-sphere-r4": "flat-r4",
    "ellipsoid-r3": "flat-r4",
    "graph-torus-r4": "flat-r4",
}


def make_surface(name: str, shape, params: dict | None = None) -> SurfaceJet:
    params = dict(params or {})
    if name == "custom":
        comps = params.pop("components", None)
        domain_spec = params.pop("domain", None)
        lp = params.pop("linear_part", None)
        if comps is None or domain_spec is None:
            raise ConfigError("custom surface requires 'components' and 'domain'")
        if params:
            raise ConfigError(f"unknown surface parameters: {sorted(params)}")
        return custom_immersion(shape, comps, domain_spec, linear_part=lp)
    if name not in SURFACE_CATALOG:
        raise ConfigError(f"unknown surface {name!r}; choose from "
                          f"{sorted(SURFACE_CATALOG) + ['custom']}")
    try:
        return SURFACE_CATALOG[name](shape, **params)
    except TypeError as exc:
        raise ConfigError(f"bad parameters for surface {name!r}: {exc}") from None
