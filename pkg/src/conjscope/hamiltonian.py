"""Semi-Hamiltonian structure checks.

A skew 2-form sigma (given as a coordinate matrix of expressions, contracted
only with vectors of the span of the frame and its brackets) induces a metric
g(V, W) = sigma([X, V], W) on the distribution when the distribution is
sigma-isotropic.  The module verifies the isotropy condition, the invariance
of sigma along X, the induced metric's symmetry and nondegeneracy, and the
self-adjointness of the curvature with respect to it.  Closedness of sigma is
neither required nor checked.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import pair as pair_mod
from .errors import DegenerateMetric
from .scalar import ExprProgram, HyperDual, evaluate, parse

__all__ = ["SemiHamiltonianModel", "check_lagrangian", "induced_metric",
           "check_semi_invariance", "check_K_selfadjoint", "canonical_sigma",
           "horizontal_lagrangian_residual", "metric_constancy_residual"]


def _as_expr(e):
    return e if isinstance(e, ExprProgram) else parse(e)


@dataclass(frozen=True)
class SemiHamiltonianModel:
    """A generic pair together with a coordinate matrix of 2-form components."""

    pair: pair_mod.GenericPair
    sigma: tuple                  # n x n ExprPrograms, antisymmetric pointwise
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(
            self, "sigma",
            tuple(tuple(_as_expr(e) for e in row) for row in self.sigma))
        n = self.pair.n
        if len(self.sigma) != n or any(len(row) != n for row in self.sigma):
            raise ValueError("sigma must be an n x n matrix of expressions")

    def bindings(self, x):
        env = dict(self.pair.params)
        env.update(self.params)
        for name, value in zip(self.pair.coords, x):
            env[name] = value
        return env

    def sigma_at(self, x, check=True):
        env = self.bindings(x)
        n = self.pair.n
        S = np.array([[evaluate(e, env) for e in row] for row in self.sigma], dtype=float)
        if check:
            scale = np.linalg.norm(S)
            if scale > 0 and np.linalg.norm(S + S.T) > 1e-12 * scale:
                raise ValueError("sigma matrix is not antisymmetric at the evaluated point")
        return S


def canonical_sigma(m, coords=None):
    """Matrix of sum dx_i ^ dy_i on coordinates (x1..xm, y1..ym); a leading t
    coordinate (odd total dimension) gets a zero row and column."""
    offset = 0 if coords is None or len(coords) == 2 * m else 1
    n = 2 * m + offset
    rows = [["0"] * n for _ in range(n)]
    for i in range(m):
        rows[offset + i][offset + m + i] = "1"
        rows[offset + m + i][offset + i] = "-1"
    return tuple(tuple(row) for row in rows)


def check_lagrangian(model: SemiHamiltonianModel, points):
    """Max relative residual of sigma(V_i, V_j) over the points: zero means
    the distribution is sigma-isotropic (the Lagrangian condition)."""
    pr = model.pair
    worst = 0.0
    for x in points:
        S = model.sigma_at(x)
        data = pair_mod.extract_H(pr, x, raise_on_violation=False)
        V = data.V
        scale = max(np.linalg.norm(S), 1e-300)
        for i in range(pr.m):
            for j in range(i + 1, pr.m):
                num = abs(V[:, i] @ S @ V[:, j])
                den = scale * max(np.linalg.norm(V[:, i]) * np.linalg.norm(V[:, j]), 1e-300)
                worst = max(worst, num / den)
    return worst


def induced_metric(model: SemiHamiltonianModel, x, normalize_sign=True):
    """Metric g_ij = sigma([X, V_i], V_j) at x.

    If the metric comes out negative definite it is flipped to its negative
    (recorded in the result).  Raises DegenerateMetric when the smallest
    singular value collapses."""
    pr = model.pair
    S = model.sigma_at(x)
    data = pair_mod.extract_H(pr, x, raise_on_violation=False)
    m = pr.m
    g = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            g[i, j] = data.XV[:, i] @ S @ data.V[:, j]
    sym_res = float(np.linalg.norm(g - g.T) / max(np.linalg.norm(g), 1e-300))
    svals = np.linalg.svd(g, compute_uv=False)
    if svals[-1] < 1e-10 * max(svals[0], 1e-300):
        raise DegenerateMetric(f"induced metric degenerate at {x} (smallest sv {svals[-1]:.3e})")
    flipped = False
    eigs = np.linalg.eigvalsh(0.5 * (g + g.T))
    if normalize_sign and np.all(eigs < 0):
        g = -g
        flipped = True
    return {"g": g, "flipped": flipped, "symmetry_residual": sym_res,
            "eigenvalues": np.sort(eigs if not flipped else -eigs)}


# -- invariance of sigma along X (condition on the Lie derivative) ------------

def _jacobian_generic(exprs, coords, base_env, coord_values):
    """Jacobian over an arbitrary scalar ring by stacking one more hyper-dual
    level on top of the coordinate values."""
    n = len(coords)
    J = [[0.0] * n for _ in range(len(exprs))]
    for b in range(n):
        env = dict(base_env)
        for idx, name in enumerate(coords):
            env[name] = HyperDual(coord_values[idx], 1.0 if idx == b else 0.0, 0.0, 0.0)
        for i, e in enumerate(exprs):
            out = evaluate(e, env)
            if isinstance(out, HyperDual):
                J[i][b] = out.e1
    return J


def _basis_fields_generic(pr: pair_mod.GenericPair, coord_values):
    """V columns, X and [X, V] columns evaluated over any scalar ring."""
    env0 = pr.bindings(coord_values)
    n = pr.n
    Xv = [evaluate(e, env0) for e in pr.X]
    JX = _jacobian_generic(pr.X, pr.coords, env0, coord_values)
    fields = []
    for col in pr.vframe:
        Vv = [evaluate(e, env0) for e in col]
        JV = _jacobian_generic(col, pr.coords, env0, coord_values)
        xv = []
        for i in range(n):
            acc = 0.0
            for b in range(n):
                acc = acc + JV[i][b] * Xv[b] - JX[i][b] * Vv[b]
            xv.append(acc)
        fields.append((Vv, xv))
    return Xv, fields


def check_semi_invariance(model: SemiHamiltonianModel, points):
    """Max relative residual of the invariance condition

        X(sigma(Y, Z)) = sigma([X, Y], Z) + sigma(Y, [X, Z])

    over all pairs of frame and bracket basis fields of the span, with the
    directional derivative computed by nested automatic differentiation
    through sigma and the field expressions."""
    pr = model.pair
    n = pr.n
    worst = 0.0
    for x in points:
        x = np.asarray(x, dtype=float)
        data = pair_mod.extract_H(pr, x, raise_on_violation=False)
        u = data.X
        seeded = [HyperDual(float(x[k]), float(u[k]), 0.0, 0.0) for k in range(n)]
        _, fields_hd = _basis_fields_generic(pr, seeded)
        env_hd = model.bindings(seeded)
        sigma_hd = [[evaluate(e, env_hd) for e in row] for row in model.sigma]
        S0 = model.sigma_at(x)

        basis_hd = [f[0] for f in fields_hd] + [f[1] for f in fields_hd]
        basis_val = [data.V[:, j] for j in range(pr.m)] + [data.XV[:, j] for j in range(pr.m)]
        basis_brk = [data.XV[:, j] for j in range(pr.m)] + [data.XXV[:, j] for j in range(pr.m)]

        scale = max(np.linalg.norm(S0), 1e-300) * max(
            max(np.linalg.norm(v) for v in basis_val) ** 2, 1e-300)
        for a in range(len(basis_hd)):
            for b in range(a + 1, len(basis_hd)):
                s = 0.0
                for i in range(n):
                    Yi = basis_hd[a][i]
                    if isinstance(Yi, float) and Yi == 0.0:
                        continue
                    for j in range(n):
                        s = s + Yi * sigma_hd[i][j] * basis_hd[b][j]
                ds = s.e1 if isinstance(s, HyperDual) else 0.0
                lhs = float(ds)
                rhs = float(basis_brk[a] @ S0 @ basis_val[b] + basis_val[a] @ S0 @ basis_brk[b])
                bracket_scale = max(
                    scale,
                    abs(lhs),
                    np.linalg.norm(S0) * np.linalg.norm(basis_brk[a]) * np.linalg.norm(basis_val[b]),
                    np.linalg.norm(S0) * np.linalg.norm(basis_val[a]) * np.linalg.norm(basis_brk[b]),
                    1e-300,
                )
                worst = max(worst, abs(lhs - rhs) / bracket_scale)
    return worst


def check_K_selfadjoint(g, K):
    """Relative asymmetry of gK; zero means K is self-adjoint for g."""
    g = np.asarray(g, dtype=float)
    K = np.asarray(K, dtype=float)
    gK = g @ K
    scale = np.linalg.norm(gK)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(gK - gK.T) / scale)


# -- transported-frame diagnostics --------------------------------------------

def horizontal_lagrangian_residual(model: SemiHamiltonianModel, ft, ts):
    """Max relative residual of sigma on pairs of transported horizontal
    frame vectors [X, W_i] with W = V G along the trajectory."""
    pr = model.pair
    worst = 0.0
    for t in ts:
        x = ft.x(t)
        G = ft.G(t)
        S = model.sigma_at(x)
        data = pair_mod.extract_H(pr, x, raise_on_violation=False)
        H = data.XV @ G - 0.5 * data.V @ (data.H1 @ G)
        scale = max(np.linalg.norm(S), 1e-300)
        for i in range(pr.m):
            for j in range(i + 1, pr.m):
                num = abs(H[:, i] @ S @ H[:, j])
                den = scale * max(np.linalg.norm(H[:, i]) * np.linalg.norm(H[:, j]), 1e-300)
                worst = max(worst, num / den)
    return worst


def metric_constancy_residual(model: SemiHamiltonianModel, ft, ts):
    """Sup relative drift of the induced metric coefficients expressed in the
    transported normal frame (they are constant for invariant sigma)."""
    pr = model.pair

    def g_normal(t):
        x = ft.x(t)
        G = ft.G(t)
        S = model.sigma_at(x)
        data = pair_mod.extract_H(pr, x, raise_on_violation=False)
        W = data.V @ G
        XW = data.XV @ G - 0.5 * data.V @ (data.H1 @ G)
        return XW.T @ S @ W

    g0 = g_normal(ts[0])
    scale = max(np.linalg.norm(g0), 1e-300)
    return max(float(np.linalg.norm(g_normal(t) - g0) / scale) for t in ts)
