"""Normal-frame transport, normal curvature matrix and invariant metrics.

A working frame of the distribution becomes a normal frame along a trajectory
after multiplication by the matrix solution G of the transport equation
X(G) = -H1 G / 2; the curvature matrix expressed in that frame is the
coefficient matrix of the Jacobi equation.  The transport is integrated as an
augmented state alongside the base point so G and the trajectory stay
consistent to integrator tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ode, pair as pair_mod
from .errors import SingularG, ZeroDirection

__all__ = ["FrameTransport", "transport_normal_frame", "invariant_metric_at",
           "directional_curvature"]


@dataclass(frozen=True)
class FrameTransport:
    """Joint dense solution of the trajectory and the frame transport."""

    pair: object
    trajectory: object            # the plain trajectory this transport tracks
    G0: np.ndarray
    joint: object                 # Trajectory of the (x, vec G) system
    m: int

    @property
    def T(self):
        return self.joint.T

    def x(self, t):
        return self.joint.at(t)[: self.pair.n]

    def G(self, t):
        n = self.pair.n
        return self.joint.at(t)[n:].reshape(self.m, self.m)

    def det_G(self, t):
        return float(np.linalg.det(self.G(t)))

    def K_frame(self, t):
        """Curvature in the working frame at the trajectory point c(t)."""
        x = self.x(t)
        if self.pair.sode is not None:
            return pair_mod.curvature_at(self.pair, x)
        h = 1e-4 * (1.0 + float(np.linalg.norm(x)))
        lo, hi = 0.0, self.T

        def flow(s):
            # prefer the trajectory's own dense output as the flow of X
            if lo <= t + s <= hi:
                return self.x(t + s)
            fld = self.pair.field_callable()
            if s >= 0:
                return ode.integrate(fld, x, s, rel_tol=1e-12, abs_tol=1e-14).at(s)
            return ode.integrate(lambda z: -fld(z), x, -s, rel_tol=1e-12, abs_tol=1e-14).at(-s)

        dX_H1 = pair_mod.flow_derivative_H1(self.pair, x, h=h, flow=flow)
        return pair_mod.curvature_frame(self.pair, x, dX_H1=dX_H1)

    def K_normal(self, t):
        G = self.G(t)
        return np.linalg.solve(G, self.K_frame(t) @ G)

    def grid(self, per_step=ode.SAMPLES_PER_STEP):
        return self.joint.grid(per_step)


def transport_normal_frame(pair, traj, G0=None) -> FrameTransport:
    """Integrate G' = -H1(c(t)) G / 2 jointly with the trajectory.

    G0 defaults to the identity.  Raises SingularG if |det G| collapses
    relative to |det G0| (analytically impossible: det G obeys a linear
    scalar equation, so this would signal numerical breakdown)."""
    m = pair.m
    n = pair.n
    if G0 is None:
        G0 = np.eye(m)
    G0 = np.asarray(G0, dtype=float)
    if abs(np.linalg.det(G0)) < 1e-300:
        raise ValueError("G0 must be invertible")

    if pair.sode is not None:
        H1_at = lambda x: pair_mod._sode_H1(pair, x)
    else:
        H1_at = lambda x: pair_mod.extract_H(pair, x).H1

    fld = pair.field_callable()

    def rhs(z):
        x = z[:n]
        G = z[n:].reshape(m, m)
        dG = -0.5 * H1_at(x) @ G
        return np.concatenate([fld(x), dG.ravel()])

    z0 = np.concatenate([traj.x0, G0.ravel()])
    joint = ode.integrate(rhs, z0, traj.T, rel_tol=traj.rel_tol, abs_tol=traj.abs_tol)

    ft = FrameTransport(pair=pair, trajectory=traj, G0=G0, joint=joint, m=m)
    det0 = abs(np.linalg.det(G0))
    for t in joint.steps:
        if abs(ft.det_G(t)) < 1e-12 * det0:
            raise SingularG(f"|det G| collapsed at t={t}")
    return ft


def invariant_metric_at(ft: FrameTransport, t):
    """Metric on the distribution (working-frame coordinates) that makes the
    transported normal frame orthonormal: (G G^T)^{-1} at t."""
    G = ft.G(t)
    return np.linalg.inv(G @ G.T)


def directional_curvature(K, g, v):
    """Rayleigh-type quotient g(Kv, v) / g(v, v)."""
    K = np.asarray(K, dtype=float)
    g = np.asarray(g, dtype=float)
    v = np.asarray(v, dtype=float)
    denom = float(v @ g @ v)
    scale = 1e-14 * max(float(v @ v), 1e-300) * float(np.linalg.norm(g))
    if abs(denom) <= scale:
        raise ZeroDirection("direction is g-null")
    return float((K @ v) @ g @ v) / denom
