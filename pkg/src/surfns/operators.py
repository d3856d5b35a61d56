"""Right-hand-side operators in the toroidal Galerkin basis.

The variable-viscosity Stokes operator is assembled in weak form,
A[j,k] = int 2 nu eps(Phi_j) : eps(Phi_k) dS, which keeps exact symmetry and
positive semidefiniteness without differentiating nu.  The convective term
is pseudospectral on the dealiased grid; forcing evaluation delegates to the
catalog.  All operations return coefficient states.
"""

import numpy as np

from .errors import ParameterError
from .forcing import apply_forcing
from .harmonics import SpectralState, dealias_rule, get_transform


class StokesForm:
    """Assembled weak-form Stokes matrix with its implicit/explicit split.

    ``A = nu_min * diag(D) + A_prime`` where D carries the constant-viscosity
    per-degree eigenvalues (Rayleigh quotients) and A_prime is positive
    semidefinite because nu - nu_min >= 0.
    """

    def __init__(self, grid, transform, nu, L, A, lam_by_degree):
        self.grid = grid
        self.transform = transform
        self.nu = nu
        self.L = L
        self.A = A
        self.lam_by_degree = lam_by_degree          # (L+1,) with entry l = lambda_l
        self.D = lam_by_degree[transform.mode_l]    # per-mode diagonal
        self.nu_min = nu.nu_min
        self._rho_explicit = None
        self._rho_full = None

    @property
    def A_prime(self):
        return self.A - self.nu_min * np.diag(self.D)

    def rho_explicit(self):
        """Spectral radius of the explicit remainder A' (cached)."""
        if self._rho_explicit is None:
            ap = self.A_prime
            self._rho_explicit = float(np.linalg.eigvalsh(0.5 * (ap + ap.T)).max())
        return self._rho_explicit

    def rho_full(self):
        """Largest eigenvalue of the full operator A (cached)."""
        if self._rho_full is None:
            self._rho_full = float(np.linalg.eigvalsh(self.A).max())
        return self._rho_full

    def apply(self, state):
        return stokes_apply(self, state)

    def quad_form(self, coeffs):
        """c . A c = int 2 nu |eps(u)|^2 dS for the represented field."""
        return float(coeffs @ (self.A @ coeffs))


def assemble_stokes(grid, nu, L):
    """Assemble the variable-viscosity Stokes form up to degree L.

    Requires a dealiased grid so every product eps_j : eps_k nu is
    integrated exactly (band-limited nu assumed).
    """
    if nu.grid is not grid:
        raise ParameterError("viscosity lives on a different grid")
    if nu.nu_min <= 0:
        raise ParameterError("viscosity lower bound must be positive")
    if grid.max_degree < dealias_rule(L).degree:
        raise ParameterError(
            f"grid resolves degree {grid.max_degree}, need {dealias_rule(L).degree} "
            f"for exact degree-{L} assembly")
    tr = get_transform(grid, L)
    G = tr.grad_basis
    E = 0.5 * (G + np.swapaxes(G, 2, 3))
    Ef = E.reshape(tr.n_modes, -1)
    w = grid.weights

    w1 = np.repeat(2.0 * w, 4)
    A1 = (Ef * w1[None, :]) @ Ef.T
    A1 = 0.5 * (A1 + A1.T)
    lam = np.zeros(L + 1)
    diag1 = np.diag(A1)
    for l in range(1, L + 1):
        lam[l] = float(diag1[tr.mode_l == l].mean())
    lam[1] = max(lam[1], 0.0)

    if np.ptp(nu.values) == 0.0:
        A = nu.values[0] * A1
    else:
        wv = np.repeat(2.0 * w * nu.values, 4)
        A = (Ef * wv[None, :]) @ Ef.T
        A = 0.5 * (A + A.T)
    return StokesForm(grid, tr, nu, L, A, lam)


def stokes_apply(form, state):
    """Matrix-vector product of the assembled form; Killing block stays null."""
    if state.L != form.L:
        raise ParameterError("state truncation does not match form")
    return SpectralState(form.L, form.A @ state.coeffs, state.t)


def convective_term(grid, state):
    """Coefficients of P_0 [(u . grad_G) u], computed pseudospectrally.

    Synthesize u and its covariant derivative on the dealiased grid, form
    the transport vector nodally, and project back onto the toroidal basis.
    Discrete energy orthogonality and the vanishing Killing projection hold
    to quadrature exactness.
    """
    tr = get_transform(grid, state.L)
    n = grid.n_nodes
    u = (state.coeffs @ tr.basis.reshape(tr.n_modes, -1)).reshape(n, 2)
    T = (state.coeffs @ tr.grad_basis.reshape(tr.n_modes, -1)).reshape(n, 2, 2)
    adv = np.einsum("nij,nj->ni", T, u)
    c = tr._wbasis.reshape(tr.n_modes, -1) @ adv.reshape(-1)
    return SpectralState(state.L, c, state.t)


def forcing_apply(spec, grid, basis, state):
    """Coefficients of P_0 f(., u); Killing-valued forcings land in l = 1."""
    return apply_forcing(spec, grid, basis, state)
