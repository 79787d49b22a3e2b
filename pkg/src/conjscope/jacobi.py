"""Jacobi matrix system, conjugate times and the variational-flow oracle.

In a normal frame the Jacobi equation reduces to the matrix system
P' = Q, Q' = -K(t) P with P(0) = 0, Q(0) = I; conjugate times are the
parameter values where P loses rank, with multiplicity equal to the rank
drop.  The variational oracle instead pushes the vertical subspace forward
with the linearized flow and watches its transverse components directly,
providing an independent detection path for cross-validation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

from . import ode, pair as pair_mod
from .errors import EndpointNotZero, RegularityViolation

DETECT_TOL = 1e-8        # refined singular-value dip counted as zero, x scale
RANK_TOL = 1e-7          # singular values below this x scale count into the kernel
MERGE_TOL = 1e-6
JACOBI_REL_TOL = 1e-11
JACOBI_ABS_TOL = 1e-13

__all__ = ["JacobiSolution", "ConjugateTime", "integrate_jacobi",
           "find_conjugate_times", "index_functional", "variational_oracle"]


@dataclass(frozen=True)
class JacobiSolution:
    m: int
    K_normal: object              # callable t -> (m, m)
    joint: object                 # Trajectory of (vec P, vec Q)

    @property
    def T(self):
        return self.joint.T

    def P(self, t):
        return self.joint.at(t)[: self.m * self.m].reshape(self.m, self.m)

    def Q(self, t):
        return self.joint.at(t)[self.m * self.m:].reshape(self.m, self.m)

    def sigma_min(self, t):
        return float(np.linalg.svd(self.P(t), compute_uv=False)[-1])

    def det_P(self, t):
        return float(np.linalg.det(self.P(t)))

    def grid(self, per_step=ode.SAMPLES_PER_STEP):
        return self.joint.grid(per_step)


@dataclass(frozen=True)
class ConjugateTime:
    t_star: float
    multiplicity: int
    kernel_basis: tuple           # right singular vectors spanning ker P(t*)
    mode: str                     # "sign_change" | "touch"

    def as_dict(self):
        return {
            "t": self.t_star,
            "multiplicity": self.multiplicity,
            "mode": self.mode,
            "kernel_basis": [list(map(float, k)) for k in self.kernel_basis],
        }


def integrate_jacobi(K_normal, m, T, rel_tol=JACOBI_REL_TOL, abs_tol=JACOBI_ABS_TOL) -> JacobiSolution:
    """Integrate P' = Q, Q' = -K(t) P from P(0)=0, Q(0)=I with dense output."""
    mm = m * m

    # time enters through an explicit quadrature variable so the matrix system
    # can reuse the autonomous integrator interface
    def rhs_aug(z):
        t = z[0]
        P = z[1:1 + mm].reshape(m, m)
        K = np.asarray(K_normal(t), dtype=float)
        Q = z[1 + mm:].reshape(m, m)
        return np.concatenate([[1.0], Q.ravel(), (-K @ P).ravel()])

    z0 = np.concatenate([[0.0], np.zeros(mm), np.eye(m).ravel()])
    joint = ode.integrate(rhs_aug, z0, T, rel_tol=rel_tol, abs_tol=abs_tol)
    return JacobiSolution(m=m, K_normal=K_normal, joint=_TimeStripped(joint))


class _TimeStripped:
    """Adapter removing the leading quadrature coordinate from a Trajectory."""

    def __init__(self, traj):
        self._traj = traj

    @property
    def T(self):
        return self._traj.T

    @property
    def steps(self):
        return self._traj.steps

    def at(self, t):
        return self._traj.at(t)[1:]

    def grid(self, per_step=ode.SAMPLES_PER_STEP):
        return self._traj.grid(per_step)


def _rank_events(sigma_min, det_like, grid, zero_tol, t_floor=0.0,
                 sigma_values=None, det_values=None):
    """Zeros of a nonnegative singular-value track.

    Sign changes of the signed determinant-like companion (when available)
    give odd-multiplicity crossings; dips of the track itself catch tangential
    zeros.  Returns merged, sorted (t, mode) events past t_floor."""
    events = []
    if det_like is not None:
        for t, mode in ode.locate_events(det_like, grid, zero_tol=zero_tol,
                                         values=det_values):
            if mode == "sign_change" and t > t_floor:
                events.append((t, "sign_change"))
    for t, mode in ode.locate_events(sigma_min, grid, zero_tol=zero_tol,
                                     values=sigma_values):
        if t <= t_floor:
            continue
        if any(abs(t - s) < MERGE_TOL * (1.0 + abs(t)) for s, _ in events):
            continue
        events.append((t, "touch"))
    events.sort(key=lambda ev: ev[0])
    merged = []
    for t, mode in events:
        if merged and abs(t - merged[-1][0]) < MERGE_TOL * (1.0 + abs(t)):
            continue
        merged.append((t, mode))
    return merged


def _kernel(matrix, scale, rank_tol):
    U, s, Vt = np.linalg.svd(matrix)
    cut = rank_tol * scale
    idx = [i for i in range(len(s)) if s[i] < cut]
    return len(idx), tuple(Vt[i] for i in idx)


def find_conjugate_times(js: JacobiSolution, rank_tol=RANK_TOL, zero_tol=DETECT_TOL):
    """Detected conjugate times on (0, T] with multiplicity and kernel basis.

    Multiplicity counts singular values of P(t*) below rank_tol times the
    largest singular value seen along the whole run (the pointwise maximum is
    useless at a full-rank drop, where every singular value vanishes)."""
    grid = js.grid()
    svals = np.array([np.linalg.svd(js.P(t), compute_uv=False) for t in grid])
    scale = float(np.max(svals[:, 0]))
    if scale == 0.0:
        return []
    det_values = np.array([js.det_P(t) for t in grid])
    # P(0) = 0 is structural: events inside the first dense subinterval are
    # sign noise of the determinant, not conjugate times
    events = _rank_events(js.sigma_min, js.det_P, grid, zero_tol, t_floor=grid[1],
                          sigma_values=svals[:, -1], det_values=det_values)
    out = []
    for t_star, mode in events:
        mult, kernel = _kernel(js.P(t_star), scale, rank_tol)
        if mult == 0:
            # dip passed the zero tolerance but no singular value clears the
            # rank cut; classify with the most conservative reading
            mult, kernel = 1, (np.linalg.svd(js.P(t_star))[2][-1],)
        out.append(ConjugateTime(t_star=float(t_star), multiplicity=mult,
                                 kernel_basis=kernel, mode=mode))
    return out


def index_functional(K_normal, w, r, times=None):
    """Quadrature of the second-variation integrand over [0, r].

    ``w`` is an (N, m) array of section samples on a uniform grid (or the grid
    ``times``), vanishing at both ends; derivatives come from a cubic spline
    through the samples; the metric is the identity of the normal frame."""
    w = np.atleast_2d(np.asarray(w, dtype=float))
    if w.shape[0] == 1:
        w = w.T
    N = w.shape[0]
    ts = np.linspace(0.0, r, N) if times is None else np.asarray(times, dtype=float)
    w_max = float(np.max(np.abs(w))) or 1.0
    if np.linalg.norm(w[0]) > 1e-10 * w_max or np.linalg.norm(w[-1]) > 1e-10 * w_max:
        raise EndpointNotZero("section must vanish at both endpoints")
    spline = CubicSpline(ts, w, axis=0)
    dw = spline(ts, 1)
    integrand = np.empty(N)
    for i, t in enumerate(ts):
        K = np.asarray(K_normal(t), dtype=float)
        integrand[i] = dw[i] @ dw[i] - (K @ w[i]) @ w[i]
    return float(simpson(integrand, x=ts))


def variational_oracle(pair, x0, T, rel_tol=JACOBI_REL_TOL, abs_tol=JACOBI_ABS_TOL,
                       rank_tol=RANK_TOL, zero_tol=DETECT_TOL):
    """Conjugate times straight from the definition.

    Integrates the flow linearization M' = DX(c(t)) M, M(0) = I, pushes a
    basis of the vertical space at x0 forward, and solves
    [V(c(t)) | XV(c(t)) | X(c(t))] coeffs = M(t) v_j at each t.  The rows of
    the XV block together with the X row measure transversality; conjugate
    times are the rank drops of that block.  (On lifted second-order systems
    the X row vanishes identically, so including it matches intersecting with
    the vertical space alone.)"""
    model = pair
    pair = pair_mod.as_pair(pair)
    n = pair.n
    x0 = np.asarray(x0, dtype=float)
    if (isinstance(model, pair_mod.SODEModel) and not model.autonomous
            and len(x0) == 2 * model.m):
        x0 = np.concatenate([[0.0], x0])

    def rhs(z):
        x = z[:n]
        M = z[n:].reshape(n, n)
        env = pair.bindings(x)
        x_val, J_X = pair_mod._jacobian(pair.X, pair.coords, env, x)
        return np.concatenate([x_val, (J_X @ M).ravel()])

    z0 = np.concatenate([x0, np.eye(n).ravel()])
    joint = ode.integrate(rhs, z0, T, rel_tol=rel_tol, abs_tol=abs_tol)

    data0 = pair_mod.extract_H(pair, x0)
    V0 = data0.V                  # columns form the transported basis seeds
    square = (n == 2 * pair.m)

    def transverse(t):
        z = joint.at(t)
        x = z[:n]
        M = z[n:].reshape(n, n)
        data = pair_mod.extract_H(pair, x)
        cols = [data.V, data.XV] if square else [data.V, data.XV, data.X[:, None]]
        basis = np.hstack(cols)
        coeffs, *_ = np.linalg.lstsq(basis, M @ V0, rcond=None)
        if pair_mod._cond(basis) > pair_mod.COND_LIMIT:
            raise RegularityViolation("decomposition basis ill-conditioned along the trajectory")
        return coeffs[pair.m:, :]

    grid = joint.grid()
    samples = [transverse(t) for t in grid]
    svals = np.array([np.linalg.svd(C, compute_uv=False) for C in samples])
    scale = float(np.max(svals[:, 0]))
    if scale == 0.0:
        return []
    sig = lambda t: float(np.linalg.svd(transverse(t), compute_uv=False)[-1])
    det_like = (lambda t: float(np.linalg.det(transverse(t)))) if square else None
    det_values = (np.array([np.linalg.det(C) for C in samples]) if square else None)
    # the transverse block vanishes structurally at t = 0
    events = _rank_events(sig, det_like, grid, zero_tol, t_floor=grid[1],
                          sigma_values=svals[:, -1], det_values=det_values)
    out = []
    for t_star, mode in events:
        C = transverse(t_star)
        mult, kernel = _kernel(C, scale, rank_tol)
        if mult == 0:
            mult, kernel = 1, (np.linalg.svd(C)[2][-1],)
        out.append(ConjugateTime(t_star=float(t_star), multiplicity=mult,
                                 kernel_basis=kernel, mode=mode))
    return out
