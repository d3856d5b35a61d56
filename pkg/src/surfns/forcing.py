"""Forcing catalog with declared hypothesis flags and empirical checks.

Catalog tags (u_K = P_K u, u_NK = u - u_K, all fields tangential,
divergence-free after projection):

    zero              f = 0
    constant_field    f = g(x), a fixed divergence-free field
    f2_plus/f2_minus  f = v +/- u_K, v a fixed non-Killing field
    f3_plus/f3_minus  f = +/- u
    f4_plus/f4_minus  f = u_NK +/- P_K(|x - p| u_K), p a point on the surface
    f5                f = (I - P_K)(|x| u) - u
    constant_killing  f = c v_j, one Killing basis field

Each catalog entry carries the declared constants of its standing
hypotheses: the
L2 bound on f(.,0), the Lipschitz constant in u, whether the Killing part
of the power integral has a sign (nega/pos), the growth bound on the
Killing power, and the non-Killing power envelope coefficients (c5, c6).
``hypothesis_check`` estimates all of them by seeded Monte Carlo and
reports any sample violating a declared flag.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from . import geometry as geo
from .geometry import SPHERE, TangentialField
from .harmonics import SpectralState, get_transform, random_band_limited

TAGS = ("zero", "constant_field", "f2_plus", "f2_minus", "f3_plus", "f3_minus",
        "f4_plus", "f4_minus", "f5", "constant_killing")

_SIGN_TAGS = {"f2_plus": 1.0, "f2_minus": -1.0, "f3_plus": 1.0, "f3_minus": -1.0,
              "f4_plus": 1.0, "f4_minus": -1.0}


@dataclass
class FlagSet:
    """Declared hypothesis constants of a catalog forcing."""
    c1: float
    c2: float
    uk1: bool
    nega: bool
    pos: bool
    c5: float
    c6: float
    extra2: bool
    independent_of_u: bool


@dataclass
class ForcingSpec:
    tag: str
    basis: object
    flags: FlagSet
    g: object = None          # constant_field: TangentialField
    v: object = None          # f2: fixed non-Killing TangentialField
    point: object = None      # f4: point on the surface
    c: float = 0.0            # constant_killing amplitude
    axis: int = 0             # constant_killing basis index
    _cache: dict = field(default_factory=dict)


def _as_nodal(grid, vec):
    if isinstance(vec, TangentialField):
        return vec
    if isinstance(vec, SpectralState):
        return get_transform(grid, vec.L).synthesize(vec)
    raise ParameterError("expected a TangentialField or SpectralState")


def make_catalog_forcing(tag, params, basis):
    """Build a tagged forcing with its hypothesis flags set."""
    grid = basis.grid
    params = dict(params or {})
    if tag not in TAGS:
        raise ParameterError(f"unknown forcing tag {tag!r}")

    if tag == "zero":
        flags = FlagSet(0.0, 0.0, True, True, True, 0.0, 0.0, True, True)
        return ForcingSpec(tag, basis, flags)

    if tag == "constant_field":
        g = _as_nodal(grid, params["g"])
        gk, gnk = _project_killing(basis, g)
        norm_g = geo.l2_norm(grid, g)
        kill_free = geo.l2_norm(grid, gk) <= 1e-10 * max(norm_g, 1.0)
        flags = FlagSet(norm_g, 0.0, True, kill_free, kill_free,
                        0.0, geo.l2_norm(grid, gnk), True, True)
        return ForcingSpec(tag, basis, flags, g=g)

    if tag in ("f2_plus", "f2_minus"):
        v = _as_nodal(grid, params["v"])
        vk, _ = _project_killing(basis, v)
        nv = geo.l2_norm(grid, v)
        if geo.l2_norm(grid, vk) > 1e-10 * max(nv, 1.0):
            raise ParameterError("f2 requires v orthogonal to the Killing space")
        pos = tag.endswith("plus")
        flags = FlagSet(nv, 1.0, True, not pos, pos, 0.0, nv, True, False)
        return ForcingSpec(tag, basis, flags, v=v)

    if tag in ("f3_plus", "f3_minus"):
        pos = tag.endswith("plus")
        c5 = 1.0 if pos else 0.0
        flags = FlagSet(0.0, 1.0, True, not pos, pos, c5, 0.0, True, False)
        return ForcingSpec(tag, basis, flags)

    if tag in ("f4_plus", "f4_minus"):
        p = np.asarray(params["p"], dtype=float)
        if p.shape != (3,):
            raise ParameterError("f4 point must be an ambient 3-vector")
        if grid.kind == SPHERE:
            if abs(np.linalg.norm(p) - grid.R) > 1e-10 * grid.R:
                raise ParameterError("f4 point must lie on the sphere")
        dist_max = float(np.linalg.norm(grid.nodes - p[None, :], axis=1).max())
        pos = tag.endswith("plus")
        flags = FlagSet(0.0, max(1.0, dist_max), True, not pos, pos,
                        1.0, 0.0, True, False)
        return ForcingSpec(tag, basis, flags, point=p)

    if tag == "f5":
        if grid.kind != SPHERE:
            raise ParameterError("f5 evaluation is sphere-only")
        R = grid.R
        flags = FlagSet(0.0, max(abs(R - 1.0), 1.0), True, True, False,
                        max(R - 1.0, 0.0), 0.0, True, False)
        return ForcingSpec(tag, basis, flags)

    # constant_killing
    c = float(params.get("c", 1.0))
    j = int(params.get("axis", 0))
    if not (0 <= j < basis.n):
        raise ParameterError(f"Killing axis {j} outside 0..{basis.n - 1}")
    flags = FlagSet(abs(c), 0.0, True, False, False, 0.0, 0.0, True, True)
    return ForcingSpec("constant_killing", basis, flags, c=c, axis=j)


def _project_killing(basis, u):
    from .killing import pk_project
    return pk_project(basis, u)


def _cached_coeffs(spec, grid, key, nodal, L):
    ck = (key, L)
    if ck not in spec._cache:
        tr = get_transform(grid, L)
        spec._cache[ck] = tr.leray_project(nodal).coeffs
    return spec._cache[ck]


def apply_forcing(spec, grid, basis, state):
    """Coefficients of P_0 f(., u) for the represented state u."""
    L = state.L
    c = state.coeffs
    out = np.zeros_like(c)
    tag = spec.tag

    if tag == "zero":
        pass
    elif tag == "constant_field":
        out[:] = _cached_coeffs(spec, grid, "g", spec.g, L)
    elif tag in ("f2_plus", "f2_minus"):
        out[:] = _cached_coeffs(spec, grid, "v", spec.v, L)
        out[:3] += _SIGN_TAGS[tag] * c[:3]
    elif tag in ("f3_plus", "f3_minus"):
        out[:] = _SIGN_TAGS[tag] * c
    elif tag in ("f4_plus", "f4_minus"):
        out[3:] = c[3:]
        alpha = basis.alpha_from_state(state)
        uk = np.zeros((grid.n_nodes, 2))
        for a, v in zip(alpha, basis.fields):
            uk += a * v.comps
        wdist = np.linalg.norm(grid.nodes - spec.point[None, :], axis=1)
        weighted = TangentialField(grid, wdist[:, None] * uk)
        beta = np.array([geo.l2_inner(grid, weighted, v) for v in basis.fields])
        out[:3] += _SIGN_TAGS[tag] * basis.state_from_alpha(beta, L).coeffs[:3]
    elif tag == "f5":
        tr = get_transform(grid, L)
        u = tr.synthesize(state)
        w = TangentialField(grid, np.linalg.norm(grid.nodes, axis=1)[:, None] * u.comps)
        cw = tr.leray_project(w).coeffs
        cw[:3] = 0.0
        out[:] = cw - c
    elif tag == "constant_killing":
        ej = np.zeros(spec.basis.n)
        ej[spec.axis] = spec.c
        out[:3] = basis.state_from_alpha(ej, L).coeffs[:3]
    else:
        raise ParameterError(f"unknown forcing tag {tag!r}")
    return SpectralState(L, out, state.t)


@dataclass
class HypothesisReport:
    tag: str
    n_samples: int
    c1_hat: float
    sup_f0_nodal: float
    c2_hat: float
    c5_hat: float
    c6_hat: float
    killing_power_min: float
    killing_power_max: float
    violations: list

    @property
    def ok(self):
        return not self.violations


def hypothesis_check(spec, grid, basis, n_samples, seed):
    """Monte-Carlo estimates of the hypothesis constants and flag audit.

    Violations of declared flags become report entries, never exceptions.
    """
    if n_samples < 10:
        raise ParameterError("need at least 10 samples")
    L = min(8, max(2, int(grid.max_degree * 2 // 3))) if grid.kind == SPHERE else None
    if L is None:
        raise ParameterError("hypothesis sampling is sphere-only")
    tr = get_transform(grid, L)
    tol = 1e-8
    violations = []

    zero = SpectralState(L)
    f0 = apply_forcing(spec, grid, basis, zero)
    c1_hat = f0.norm()
    sup_f0 = float(np.abs(tr.synthesize(f0).comps).max()) if c1_hat > 0 else 0.0
    if c1_hat > spec.flags.c1 + tol:
        violations.append(f"c1: measured {c1_hat:.6g} > declared {spec.flags.c1:.6g}")

    rng = np.random.default_rng(seed)
    seeds = rng.integers(0, 2 ** 63 - 1, size=2 * n_samples)
    samples = [random_band_limited(tr, int(s)) for s in seeds[:n_samples]]
    pairs = [random_band_limited(tr, int(s)) for s in seeds[n_samples:]]

    c2_hat = 0.0
    for u1, u2 in zip(samples, pairs):
        df = apply_forcing(spec, grid, basis, u1).coeffs - \
            apply_forcing(spec, grid, basis, u2).coeffs
        du = np.linalg.norm(u1.coeffs - u2.coeffs)
        if du > 0:
            c2_hat = max(c2_hat, float(np.linalg.norm(df)) / du)
    if c2_hat > spec.flags.c2 + tol:
        violations.append(f"c2: measured {c2_hat:.6g} > declared {spec.flags.c2:.6g}")

    kp_min, kp_max = np.inf, -np.inf
    rows, y_nk = [], []
    for i, u in enumerate(samples):
        f = apply_forcing(spec, grid, basis, u)
        power_k = float(np.dot(f.coeffs[:3], u.coeffs[:3]))
        kp_min, kp_max = min(kp_min, power_k), max(kp_max, power_k)
        scale = max(1.0, u.norm() ** 2)
        if spec.flags.nega and power_k > tol * scale:
            violations.append(f"nega: sample {i} has Killing power {power_k:.3e}")
        if spec.flags.pos and power_k < -tol * scale:
            violations.append(f"pos: sample {i} has Killing power {power_k:.3e}")
        a = u.nonkilling_norm() ** 2
        b = u.nonkilling_norm()
        power_nk = float(np.dot(f.coeffs[3:], u.coeffs[3:]))
        rows.append([a, b])
        y_nk.append(power_nk)
        declared = spec.flags.c5 * a + spec.flags.c6 * b
        if spec.flags.extra2:
            declared += spec.flags.c6 * u.killing_norm() ** 2
        if power_nk > declared + tol * scale:
            violations.append(
                f"extra: sample {i} non-Killing power {power_nk:.3e} "
                f"exceeds envelope {declared:.3e}")

    A = np.asarray(rows)
    y = np.asarray(y_nk)
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    c5_hat, c6_hat = (float(max(v, 0.0)) for v in coef)

    return HypothesisReport(spec.tag, n_samples, c1_hat, sup_f0, c2_hat,
                            c5_hat, c6_hat, float(kp_min), float(kp_max),
                            violations)
