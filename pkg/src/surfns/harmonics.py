"""Divergence-free vector spherical-harmonic transforms on the sphere.

The solver state lives in the real toroidal basis

    Phi_lm = (n x grad_G Y_lm) / sqrt(l(l+1)),   1 <= l <= L,  -l <= m <= l,

which is L2-orthonormal on the radius-R sphere for any R.  Every tangential
divergence-free field on the sphere is toroidal, so truncating to this basis
realizes the Helmholtz-Leray projection exactly and the divergence constraint
holds by construction.  The degree-1 block spans precisely the rigid
rotations, i.e. the Killing fields.

Coefficients are stored as reals: for each degree l the layout is
[(l,0), (l,1,cos), (l,1,sin), ..., (l,l,cos), (l,l,sin)], with block l
occupying the slice [l^2 - 1, (l+1)^2 - 1).  A negative m in the public API
addresses the sine partner of |m|.  The complex view is derived and satisfies
the usual reality condition.
"""

from collections import namedtuple

import numpy as np

from .errors import GridMismatchError, ParameterError
from ._legendre import plm_tables
from .geometry import SPHERE, TangentialField, TangentialTensor

DealiasRule = namedtuple("DealiasRule", ["degree", "n_lat", "n_lon"])


def dealias_rule(L):
    """Grid resolution needed to integrate quadratic nonlinearities exactly.

    Follows the 3/2 rule: resolve degree ceil(3L/2), which takes
    n_lat = degree + 1 Gauss-Legendre colatitudes and n_lon = 2 degree + 2
    uniform longitudes.
    """
    if L < 1:
        raise ParameterError("truncation degree must be >= 1")
    M = int(np.ceil(3 * L / 2))
    return DealiasRule(M, M + 1, 2 * M + 2)


def n_modes(L):
    """Dimension of the toroidal span up to degree L."""
    return L * (L + 2)


def block_slice(l):
    """Coefficient slice of degree l."""
    return slice(l * l - 1, (l + 1) * (l + 1) - 1)


def mode_index(L, l, m):
    """Flat index of mode (l, m); m < 0 addresses the sine partner of |m|."""
    if not (1 <= l <= L) or abs(m) > l:
        raise ParameterError(f"mode (l={l}, m={m}) outside truncation L={L}")
    base = l * l - 1
    if m == 0:
        return base
    return base + 2 * abs(m) - (1 if m > 0 else 0)


class SpectralState:
    """Real toroidal coefficients up to degree L at time t."""

    def __init__(self, L, coeffs=None, t=0.0):
        self.L = int(L)
        if coeffs is None:
            coeffs = np.zeros(n_modes(self.L))
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (n_modes(self.L),):
            raise ParameterError(
                f"coefficient vector must have length {n_modes(self.L)}")
        self.coeffs = coeffs
        self.t = float(t)

    def copy(self):
        return SpectralState(self.L, self.coeffs.copy(), self.t)

    def norm(self):
        """L2 norm of the represented field (Parseval)."""
        return float(np.linalg.norm(self.coeffs))

    def killing_norm(self):
        return float(np.linalg.norm(self.coeffs[:3]))

    def nonkilling_norm(self):
        return float(np.linalg.norm(self.coeffs[3:]))

    def killing_part(self):
        out = self.copy()
        out.coeffs[3:] = 0.0
        return out

    def nonkilling_part(self):
        out = self.copy()
        out.coeffs[:3] = 0.0
        return out

    def get(self, l, m):
        return float(self.coeffs[mode_index(self.L, l, m)])

    def set(self, l, m, value):
        self.coeffs[mode_index(self.L, l, m)] = value

    def to_complex(self):
        """Derived complex coefficients c[l][m], m = -l..l.

        Built from the real storage via c_{l0} = a_{l0},
        c_{lm} = (a_cos - i a_sin)/sqrt(2) and the reality condition
        c_{l,-m} = (-1)^m conj(c_{lm}).
        """
        out = {}
        for l in range(1, self.L + 1):
            row = np.zeros(2 * l + 1, dtype=complex)
            row[l] = self.coeffs[mode_index(self.L, l, 0)]
            for m in range(1, l + 1):
                ac = self.coeffs[mode_index(self.L, l, m)]
                as_ = self.coeffs[mode_index(self.L, l, -m)]
                c = (ac - 1j * as_) / np.sqrt(2.0)
                row[l + m] = c
                row[l - m] = (-1) ** m * np.conj(c)
            out[l] = row
        return out


class SphereTransform:
    """Precomputed toroidal basis and derivative tables for (grid, L).

    Immutable after construction; transforms are pure functions of their
    inputs and safe to call concurrently.
    """

    def __init__(self, grid, L):
        if grid.kind != SPHERE:
            raise ParameterError("spectral vector transforms are sphere-only")
        if not grid.canonical_frame:
            raise ParameterError("transforms require the canonical (e_theta, e_phi) frame")
        if L < 1 or grid.max_degree < L:
            raise ParameterError(
                f"grid resolves degree {grid.max_degree} < requested L={L}")
        self.grid = grid
        self.L = int(L)
        self.n_modes = n_modes(self.L)
        self.dealiased = grid.max_degree >= dealias_rule(self.L).degree

        self.mode_l = np.zeros(self.n_modes, dtype=int)
        self.mode_m = np.zeros(self.n_modes, dtype=int)   # signed: <0 means sine
        for l in range(1, self.L + 1):
            for m in range(-l, l + 1):
                k = mode_index(self.L, l, m)
                self.mode_l[k] = l
                self.mode_m[k] = m

        self._P, self._dP, self._d2P = plm_tables(self.L, grid.glx, nderiv=2)
        self.basis = self._build_basis()      # (n_modes, n_nodes, 2)
        self._wbasis = self.basis * grid.weights[None, :, None]
        self._grad = None
        self._grad_norm2 = None

    # -- table construction -------------------------------------------------

    def _trig(self, m):
        return np.cos(m * self.grid.lon), np.sin(m * self.grid.lon)

    def _lat_profiles(self, m):
        """Latitudinal profiles (A, B) with u = (A trig', B trig) per degree."""
        g = self.grid
        s = np.sin(g.lat)
        ls = np.arange(max(1, m), self.L + 1)
        q = 1.0 / np.sqrt(ls * (ls + 1.0))
        fac = np.sqrt(2.0) if m > 0 else 1.0
        rows = slice(max(1, m) - m, self.L - m + 1)
        P = self._P[m][rows]
        dP = self._dP[m][rows]
        A = (q[:, None] * fac * m) * P / (g.R * s[None, :])
        B = (q[:, None] * fac) * dP / g.R
        return ls, A, B

    def _build_basis(self):
        g = self.grid
        B = np.zeros((self.n_modes, g.n_lat, g.n_lon, 2))
        for m in range(0, self.L + 1):
            ls, A, Bphi = self._lat_profiles(m)
            cos_m, sin_m = self._trig(m)
            for i, l in enumerate(ls):
                kc = mode_index(self.L, l, m)
                B[kc, :, :, 0] = np.outer(A[i], sin_m)
                B[kc, :, :, 1] = np.outer(Bphi[i], cos_m)
                if m > 0:
                    ks = mode_index(self.L, l, -m)
                    B[ks, :, :, 0] = np.outer(-A[i], cos_m)
                    B[ks, :, :, 1] = np.outer(Bphi[i], sin_m)
        return B.reshape(self.n_modes, g.n_nodes, 2)

    def _build_grad(self):
        """Covariant derivatives of the basis modes, frame components.

        Closed forms in spherical coordinates; cross-validated against the
        ambient-interpolant route of the geometry module.
        """
        g = self.grid
        s = np.sin(g.lat)
        x = np.cos(g.lat)
        G = np.zeros((self.n_modes, g.n_lat, g.n_lon, 2, 2))
        for m in range(0, self.L + 1):
            ls, A, B = self._lat_profiles(m)
            cos_m, sin_m = self._trig(m)
            rows = slice(max(1, m) - m, self.L - m + 1)
            q = 1.0 / np.sqrt(ls * (ls + 1.0))
            fac = np.sqrt(2.0) if m > 0 else 1.0
            P = self._P[m][rows]
            dP = self._dP[m][rows]
            d2P = self._d2P[m][rows]
            # dA/dtheta and dB/dtheta
            dA = (q[:, None] * fac * m) * (dP * s[None, :] - P * x[None, :]) / (
                g.R * s[None, :] ** 2)
            dB = (q[:, None] * fac) * d2P / g.R
            mixTF = (m * A - x[None, :] * B) / (g.R * s[None, :])
            mixFF = (x[None, :] * A - m * B) / (g.R * s[None, :])
            for i, l in enumerate(ls):
                kc = mode_index(self.L, l, m)
                G[kc, :, :, 0, 0] = np.outer(dA[i] / g.R, sin_m)
                G[kc, :, :, 0, 1] = np.outer(mixTF[i], cos_m)
                G[kc, :, :, 1, 0] = np.outer(dB[i] / g.R, cos_m)
                G[kc, :, :, 1, 1] = np.outer(mixFF[i], sin_m)
                if m > 0:
                    ks = mode_index(self.L, l, -m)
                    G[ks, :, :, 0, 0] = np.outer(-dA[i] / g.R, cos_m)
                    G[ks, :, :, 0, 1] = np.outer(mixTF[i], sin_m)
                    G[ks, :, :, 1, 0] = np.outer(dB[i] / g.R, sin_m)
                    G[ks, :, :, 1, 1] = np.outer(-mixFF[i], cos_m)
        return G.reshape(self.n_modes, g.n_nodes, 2, 2)

    @property
    def grad_basis(self):
        if self._grad is None:
            self._grad = self._build_grad()
        return self._grad

    @property
    def grad_norm2(self):
        """||grad Phi_k||_{L2}^2 per mode (used for H1 norms of states)."""
        if self._grad_norm2 is None:
            G = self.grad_basis
            w = self.grid.weights
            self._grad_norm2 = np.einsum("knij,knij,n->k", G, G, w)
        return self._grad_norm2

    # -- transforms ----------------------------------------------------------

    def toroidal_basis_field(self, l, m):
        """The real orthonormal toroidal mode (l, m) as a nodal field."""
        if l == 0:
            raise ParameterError("no toroidal field of degree 0")
        k = mode_index(self.L, l, m)
        return TangentialField(self.grid, self.basis[k].copy())

    def analyze(self, u):
        """Toroidal coefficients of a nodal tangential field by quadrature."""
        if u.grid is not self.grid:
            raise GridMismatchError("field lives on a different grid")
        c = np.einsum("knc,nc->k", self._wbasis, u.comps)
        return SpectralState(self.L, c)

    def synthesize(self, state):
        """Nodal field of a coefficient state."""
        if state.L != self.L:
            raise ParameterError("state truncation does not match transform")
        comps = np.einsum("k,knc->nc", state.coeffs, self.basis)
        return TangentialField(self.grid, comps)

    def leray_project(self, v):
        """Coefficients of the divergence-free part of a tangential field.

        On the sphere the toroidal expansion discards exactly the gradient
        (spheroidal) part, so projection and analysis coincide.
        """
        return self.analyze(v)

    def grad_synthesize(self, state):
        """Covariant derivative of the state's field, as a nodal tensor."""
        if state.L != self.L:
            raise ParameterError("state truncation does not match transform")
        T = np.einsum("k,knij->nij", state.coeffs, self.grad_basis)
        return TangentialTensor(self.grid, T)

    def h1_norm2(self, state):
        """||u||_{H1}^2 via Parseval plus per-mode gradient energies."""
        return float(np.dot(1.0 + self.grad_norm2, state.coeffs ** 2))


def get_transform(grid, L):
    """Per-grid cache of transforms (grids are immutable)."""
    key = ("transform", L)
    if key not in grid._caches:
        grid._caches[key] = SphereTransform(grid, L)
    return grid._caches[key]


def random_band_limited(transform, seed, l_max=None, spectrum=None,
                        norm_killing=None, norm_nonkilling=None):
    """Seeded random state with prescribed Killing/non-Killing norms.

    ``spectrum`` maps degree to a standard deviation (default 1/l^2, a smooth
    profile); modes above ``l_max`` stay zero.  When a block norm is given the
    corresponding block is rescaled exactly; a requested nonzero norm on an
    all-zero block is a parameter error.
    """
    L = transform.L
    l_max = L if l_max is None else min(l_max, L)
    rng = np.random.default_rng(seed)
    c = np.zeros(n_modes(L))
    for l in range(1, l_max + 1):
        sd = spectrum(l) if spectrum is not None else 1.0 / l ** 2
        sl = block_slice(l)
        c[sl] = rng.normal(0.0, sd, 2 * l + 1)
    state = SpectralState(L, c)
    if norm_killing is not None:
        cur = state.killing_norm()
        if cur == 0.0 and norm_killing != 0.0:
            raise ParameterError("cannot rescale an all-zero Killing block")
        state.coeffs[:3] *= (norm_killing / cur) if cur > 0 else 0.0
    if norm_nonkilling is not None:
        cur = state.nonkilling_norm()
        if cur == 0.0 and norm_nonkilling != 0.0:
            raise ParameterError("cannot rescale an all-zero non-Killing block")
        state.coeffs[3:] *= (norm_nonkilling / cur) if cur > 0 else 0.0
    return state
