"""Dynamic pairs: a vector field X together with a rank-m distribution V.

A pair is either given directly (expression-valued X and a frame of V) or
lifted from a system of second order ODEs x'' = F(t, x, x').  The module
computes Lie brackets and iterated brackets exactly through hyper-dual AD,
extracts the structure matrices H0, H1 of the iterated bracket relation,
evaluates the curvature operator, builds the canonical vertical/horizontal
splitting and checks the regularity conditions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ode, scalar
from .errors import RegularityViolation
from .scalar import ExprProgram, HyperDual, evaluate, parse

COND_LIMIT = 1e8
INVARIANCE_TOL = 1e-6

__all__ = [
    "SODEModel",
    "GenericPair",
    "PointFrameData",
    "RegularityReport",
    "lift_sode",
    "bracket",
    "extract_H",
    "point_frame_data",
    "curvature_frame",
    "sode_curvature",
    "flow_derivative_H1",
    "split_and_project",
    "check_regularity",
]


def _as_expr(e) -> ExprProgram:
    return e if isinstance(e, ExprProgram) else parse(e)


@dataclass(frozen=True)
class SODEModel:
    """System x_i'' = F_i(t, x, x'), stored with x' renamed to y.

    ``autonomous`` systems must not reference t and are analysed on the
    2m-dimensional (x, y) space; otherwise t becomes the first coordinate of
    the lifted 2m+1 dimensional space.
    """

    m: int
    F: tuple                      # m ExprPrograms in (t, x1..xm, y1..ym)
    autonomous: bool = False
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "F", tuple(_as_expr(f) for f in self.F))
        if len(self.F) != self.m:
            raise ValueError(f"expected {self.m} force components, got {len(self.F)}")
        if self.autonomous:
            for f in self.F:
                if "t" in f.free_vars:
                    raise ValueError("autonomous system must not reference t")

    @property
    def coord_names(self):
        names = [f"x{i+1}" for i in range(self.m)] + [f"y{i+1}" for i in range(self.m)]
        return tuple(names if self.autonomous else ["t"] + names)

    def force_bindings(self, t, x, y):
        env = dict(self.params)
        env["t"] = t
        for i in range(self.m):
            env[f"x{i+1}"] = x[i]
            env[f"y{i+1}"] = y[i]
        return env


@dataclass(frozen=True)
class GenericPair:
    """Expression-valued pair: X (n components) and a frame of V (n x m).

    ``vframe[j]`` is the j-th frame column.  ``sode`` optionally points back
    at the second-order system the pair was lifted from, which unlocks exact
    closed-form curvature along X.
    """

    coords: tuple
    X: tuple
    vframe: tuple                 # m columns, each a tuple of n ExprPrograms
    params: dict = field(default_factory=dict)
    sode: SODEModel | None = None

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(self.coords))
        object.__setattr__(self, "X", tuple(_as_expr(e) for e in self.X))
        object.__setattr__(
            self, "vframe",
            tuple(tuple(_as_expr(e) for e in col) for col in self.vframe),
        )
        n = len(self.coords)
        if len(self.X) != n:
            raise ValueError("X must have one component per coordinate")
        for col in self.vframe:
            if len(col) != n:
                raise ValueError("every frame column must have one component per coordinate")

    @property
    def n(self):
        return len(self.coords)

    @property
    def m(self):
        return len(self.vframe)

    def bindings(self, x):
        env = dict(self.params)
        for name, value in zip(self.coords, x):
            env[name] = value
        return env

    def X_at(self, x):
        env = self.bindings(x)
        return np.array([evaluate(e, env) for e in self.X], dtype=float)

    def field_callable(self):
        return lambda x: self.X_at(x)


DynamicPairModel = SODEModel | GenericPair


def lift_sode(model: SODEModel) -> GenericPair:
    """Total-derivative lift: X = d/dt + sum y_i d/dx_i + sum F_i d/dy_i with
    V spanned by the d/dy_i; the t coordinate is dropped for autonomous
    systems."""
    m = model.m
    names = model.coord_names
    n = len(names)
    X = []
    if not model.autonomous:
        X.append(scalar.const_expr(1.0))
    X += [scalar.var_expr(f"y{i+1}") for i in range(m)]
    X += list(model.F)
    vframe = []
    for j in range(m):
        col = [scalar.const_expr(0.0)] * n
        col[names.index(f"y{j+1}")] = scalar.const_expr(1.0)
        vframe.append(tuple(col))
    return GenericPair(coords=names, X=tuple(X), vframe=tuple(vframe),
                       params=dict(model.params), sode=model)


def as_pair(model: DynamicPairModel) -> GenericPair:
    return lift_sode(model) if isinstance(model, SODEModel) else model


# -- jets of expression-valued vector fields ---------------------------------

def _field_values(exprs, env):
    return [evaluate(e, env) for e in exprs]


def _jet(exprs, coords, base_env, x, u):
    """Value, Jacobian and direction-contracted Hessian of a vector field.

    Returns (val[k], J[k,n], Hu[k,n]) with Hu[i,b] = sum_j u_j d2 f_i / dx_b dx_j,
    all real; one hyper-dual evaluation per (component, coordinate) pair.
    """
    n = len(coords)
    k = len(exprs)
    val = np.zeros(k)
    J = np.zeros((k, n))
    Hu = np.zeros((k, n))
    for b in range(n):
        env = dict(base_env)
        for idx, name in enumerate(coords):
            env[name] = HyperDual(x[idx], u[idx], 1.0 if idx == b else 0.0, 0.0)
        for i, e in enumerate(exprs):
            out = evaluate(e, env)
            if not isinstance(out, HyperDual):
                out = HyperDual(float(out))
            if b == 0:
                val[i] = out.re
            J[i, b] = out.e2
            Hu[i, b] = out.e12
    return val, J, Hu


def _jacobian(exprs, coords, base_env, x):
    """Value and Jacobian, two columns per hyper-dual evaluation."""
    n = len(coords)
    k = len(exprs)
    val = np.zeros(k)
    J = np.zeros((k, n))
    for b in range(0, n, 2):
        b2 = b + 1 if b + 1 < n else b
        env = dict(base_env)
        for idx, name in enumerate(coords):
            env[name] = HyperDual(x[idx], 1.0 if idx == b else 0.0,
                                  1.0 if idx == b2 else 0.0, 0.0)
        for i, e in enumerate(exprs):
            out = evaluate(e, env)
            if not isinstance(out, HyperDual):
                out = HyperDual(float(out))
            if b == 0:
                val[i] = out.re
            J[i, b] = out.e1
            if b2 != b:
                J[i, b2] = out.e2
    return val, J


def _cond(D):
    s = np.linalg.svd(D, compute_uv=False)
    if s[-1] <= 0.0 or not np.all(np.isfinite(s)):
        return float("inf")
    return float(s[0] / s[-1])


def bracket(pair: GenericPair, A_exprs, B_exprs, x):
    """Lie bracket [A, B](x) = (DB)(x) A(x) - (DA)(x) B(x), Jacobians by AD."""
    x = np.asarray(x, dtype=float)
    env = pair.bindings(x)
    a_val, Ja = _jacobian(tuple(_as_expr(e) for e in A_exprs), pair.coords, env, x)
    b_val, Jb = _jacobian(tuple(_as_expr(e) for e in B_exprs), pair.coords, env, x)
    return Jb @ a_val - Ja @ b_val


@dataclass(frozen=True)
class PointFrameData:
    """Frame, first and second iterated brackets and the structure matrices
    of the relation [X,[X,V]] = V H0 + [X,V] H1 at one point."""

    point: np.ndarray
    X: np.ndarray
    V: np.ndarray                 # n x m
    XV: np.ndarray                # n x m, columns [X, V_j]
    XXV: np.ndarray               # n x m, columns [X, [X, V_j]]
    H0: np.ndarray
    H1: np.ndarray
    cond_D: float
    residual: float               # relative residual of XXV outside span [V | XV]


def brackets_at(pair: GenericPair, x):
    """V, [X,V], [X,[X,V]] at x, all m columns, exact AD."""
    x = np.asarray(x, dtype=float)
    env = pair.bindings(x)
    n, m = pair.n, pair.m
    x_val = np.array(_field_values(pair.X, env), dtype=float)
    _, J_X, Hu_X = _jet(pair.X, pair.coords, env, x, x_val)
    V = np.zeros((n, m))
    XV = np.zeros((n, m))
    XXV = np.zeros((n, m))
    JX_x = J_X @ x_val
    for j, col in enumerate(pair.vframe):
        v_val, J_V, Hu_V = _jet(col, pair.coords, env, x, x_val)
        V[:, j] = v_val
        xv = J_V @ x_val - J_X @ v_val
        XV[:, j] = xv
        # directional derivative of the bracket field along X, then bracket again
        dW = Hu_V @ x_val + J_V @ JX_x - Hu_X @ v_val - J_X @ (J_V @ x_val)
        XXV[:, j] = dW - J_X @ xv
    return x_val, V, XV, XXV


def extract_H(pair: GenericPair, x, raise_on_violation=True):
    """Solve [V | XV] (H0; H1) = XXV column-wise.

    Least squares when the ambient dimension exceeds 2m; reports the
    conditioning of the 2m-column matrix and the relative residual, which is
    the numerical witness of the invariance condition."""
    x_val, V, XV, XXV = brackets_at(pair, x)
    D = np.hstack([V, XV])
    m = pair.m
    sol, *_ = np.linalg.lstsq(D, XXV, rcond=None)
    cond_D = _cond(D)
    scale = np.linalg.norm(XXV)
    residual = float(np.linalg.norm(D @ sol - XXV) / (scale if scale > 0 else 1.0))
    if raise_on_violation:
        if cond_D > COND_LIMIT:
            raise RegularityViolation(
                f"frame + bracket matrix ill-conditioned (cond={cond_D:.3e})",
                cond="R2", residual=cond_D)
        if residual > INVARIANCE_TOL:
            raise RegularityViolation(
                f"iterated bracket leaves span[V | XV] (residual={residual:.3e})",
                cond="I", residual=residual)
    data = PointFrameData(point=np.asarray(x, dtype=float), X=x_val, V=V, XV=XV,
                          XXV=XXV, H0=sol[:m, :], H1=sol[m:, :],
                          cond_D=cond_D, residual=residual)
    return data


def point_frame_data(pair: GenericPair, x) -> PointFrameData:
    return extract_H(pair, x)


def curvature_frame(pair: GenericPair, x, dX_H1=None, data=None):
    """Curvature matrix K = -H0 + X(H1)/2 - H1^2/4 in the working frame.

    ``dX_H1`` is the derivative of H1 along the flow; if omitted it is taken
    exactly from the second-order model when available and otherwise by a
    central difference of H1 along two short flow arcs."""
    if data is None:
        data = extract_H(pair, x)
    if dX_H1 is None:
        if pair.sode is not None:
            dX_H1 = _sode_dX_H1(pair, x)
        else:
            dX_H1 = flow_derivative_H1(pair, x)
    return -data.H0 + 0.5 * dX_H1 - 0.25 * (data.H1 @ data.H1)


def flow_derivative_H1(pair: GenericPair, x, h=None, flow=None):
    """Central difference of H1 along the flow of X through x.

    ``flow(s)`` may supply points on the trajectory directly (s in a
    neighbourhood of 0); otherwise two short high-accuracy integrations
    produce the flow points."""
    x = np.asarray(x, dtype=float)
    if h is None:
        h = 1e-4 * (1.0 + float(np.linalg.norm(x)))
    if flow is None:
        fld = pair.field_callable()
        fwd = ode.integrate(fld, x, h, rel_tol=1e-12, abs_tol=1e-14).at(h)
        bwd_traj = ode.integrate(lambda z: -fld(z), x, h, rel_tol=1e-12, abs_tol=1e-14)
        bwd = bwd_traj.at(h)
    else:
        fwd, bwd = flow(h), flow(-h)
    H1p = extract_H(pair, fwd).H1
    H1m = extract_H(pair, bwd).H1
    return (H1p - H1m) / (2.0 * h)


# -- closed-form path for second-order systems -------------------------------

def _sode_point(pair_or_model, x):
    model = pair_or_model.sode if isinstance(pair_or_model, GenericPair) else pair_or_model
    x = np.asarray(x, dtype=float)
    m = model.m
    if model.autonomous:
        t, xs, ys = 0.0, x[:m], x[m:]
    else:
        t, xs, ys = x[0], x[1:m + 1], x[m + 1:]
    return model, t, xs, ys


def sode_curvature(model: SODEModel, t, x, y):
    """Closed-form curvature of x'' = F(t, x, x'):

        K^i_j = -dF_i/dx_j - (1/4) sum_k dF_i/dy_k dF_k/dy_j
                + (1/2) sum_k F_k d2F_i/dy_k dy_j
                + (1/2) sum_k y_k d2F_i/dx_k dy_j + (1/2) d2F_i/dt dy_j,

    with every partial taken by hyper-dual AD.  The derivative of H1 along X
    is exact here (no flow differencing)."""
    m = model.m
    env = model.force_bindings(t, np.asarray(x, dtype=float), np.asarray(y, dtype=float))
    F_val = np.array([evaluate(f, env) for f in model.F], dtype=float)

    dFdx = np.zeros((m, m))
    dFdy = np.zeros((m, m))
    d2_yy = np.zeros((m, m, m))    # [i, k, j] = d2 F_i / dy_k dy_j
    d2_xy = np.zeros((m, m, m))    # [i, k, j] = d2 F_i / dx_k dy_j
    d2_ty = np.zeros((m, m))

    for i, f in enumerate(model.F):
        fv = f.free_vars
        for j in range(m):
            yj = f"y{j+1}"
            for k in range(m):
                xk, yk = f"x{k+1}", f"y{k+1}"
                if xk in fv or yj in fv:
                    _, d_xk, d_yj, d2 = scalar.second_partials(f, env, xk, yj)
                    dFdx[i, k] = d_xk
                    dFdy[i, j] = d_yj
                    d2_xy[i, k, j] = d2
                if yk in fv or yj in fv:
                    _, _, _, d2 = scalar.second_partials(f, env, yk, yj)
                    d2_yy[i, k, j] = d2
            if not model.autonomous and ("t" in fv or yj in fv):
                _, _, _, d2 = scalar.second_partials(f, env, "t", yj)
                d2_ty[i, j] = d2

    y_arr = np.asarray(y, dtype=float)
    K = -dFdx - 0.25 * dFdy @ dFdy
    K += 0.5 * np.einsum("k,ikj->ij", F_val, d2_yy)
    K += 0.5 * np.einsum("k,ikj->ij", y_arr, d2_xy)
    K += 0.5 * d2_ty
    return K


def _sode_H1(pair: GenericPair, x):
    model, t, xs, ys = _sode_point(pair, x)
    env = model.force_bindings(t, xs, ys)
    m = model.m
    H1 = np.zeros((m, m))
    for i, f in enumerate(model.F):
        for j in range(m):
            _, _, d_yj, _ = scalar.second_partials(f, env, f"x{j+1}", f"y{j+1}")
            H1[i, j] = -d_yj
    return H1


def _sode_dX_H1(pair: GenericPair, x):
    model, t, xs, ys = _sode_point(pair, x)
    data = extract_H(pair, x)
    K = sode_curvature(model, t, xs, ys)
    # invert the curvature formula: X(H1) = 2 (K + H0 + H1^2/4)
    return 2.0 * (K + data.H0 + 0.25 * data.H1 @ data.H1)


def curvature_at(pair: GenericPair, x, data=None):
    """Curvature in the working frame, exact for lifted second-order systems."""
    if pair.sode is not None:
        model, t, xs, ys = _sode_point(pair, x)
        return sode_curvature(model, t, xs, ys)
    return curvature_frame(pair, x, data=data)


# -- canonical splitting ------------------------------------------------------

def split_and_project(pair: GenericPair, x, dX_H1=None):
    """Vertical/horizontal splitting of span[V | XV] at x.

    Returns projector matrices on the ambient space (valid on the span), the
    horizontal frame columns XV - V H1/2, and the morphism matrices A (frame
    coordinates of the horizontal part of [X, .] on V) and B (vertical part
    of [X, .] on the horizontal frame).  The composition -B A reproduces the
    curvature matrix."""
    data = extract_H(pair, x)
    V, XV, H1 = data.V, data.XV, data.H1
    m = pair.m
    Hcols = XV - 0.5 * V @ H1
    D = np.hstack([V, Hcols])
    pinv = np.linalg.pinv(D)
    pi_V = V @ pinv[:m, :]
    pi_H = Hcols @ pinv[m:, :]

    # A: decompose [X, V_j] = XV_j over [V | Hcols]
    coeff_XV = pinv @ XV
    A = coeff_XV[m:, :]

    # B: vertical coefficients of [X, H_j] for the frozen-coefficient
    # extension of the horizontal frame, corrected by the flow derivative of
    # H1 (the frozen extension differs from the true frame by a vertical
    # field with nonzero X-derivative).
    if dX_H1 is None:
        dX_H1 = _sode_dX_H1(pair, x) if pair.sode is not None else flow_derivative_H1(pair, x)
    _, _, _, XXV = brackets_at(pair, x)
    XXVh = XXV - 0.5 * (XV @ H1)          # [X, XV_j - V (H1)_j] with H1 frozen
    coeff = pinv @ XXVh
    B = coeff[:m, :] - 0.5 * dX_H1
    return {
        "pi_V": pi_V,
        "pi_H": pi_H,
        "vertical_frame": V,
        "horizontal_frame": Hcols,
        "A": A,
        "B": B,
        "data": data,
    }


# -- regularity ---------------------------------------------------------------

@dataclass(frozen=True)
class RegularityPoint:
    point: np.ndarray
    X_norm: float
    cond_D: float
    residual: float
    weak_invariance_only: bool
    r1_ok: bool
    r2_ok: bool
    inv_ok: bool


@dataclass(frozen=True)
class RegularityReport:
    points: tuple
    all_ok: bool

    @property
    def worst_cond(self):
        return max(p.cond_D for p in self.points)

    @property
    def worst_residual(self):
        return max(p.residual for p in self.points)


def check_regularity(pair: GenericPair, points) -> RegularityReport:
    """Pointwise check of X != 0, full rank of [V | XV], and invariance of the
    span under bracketing with X.  When the strict invariance residual fails
    but the residual modulo X passes, the point is flagged as weakly invariant
    only; no modular computations are attempted beyond the diagnostic."""
    rows = []
    ok = True
    for x in points:
        x = np.asarray(x, dtype=float)
        x_val, V, XV, XXV = brackets_at(pair, x)
        D = np.hstack([V, XV])
        sol, *_ = np.linalg.lstsq(D, XXV, rcond=None)
        cond_D = _cond(D)
        scale = np.linalg.norm(XXV)
        residual = float(np.linalg.norm(D @ sol - XXV) / (scale if scale > 0 else 1.0))
        weak = False
        if residual > INVARIANCE_TOL:
            Dx = np.hstack([D, x_val[:, None]])
            sol2, *_ = np.linalg.lstsq(Dx, XXV, rcond=None)
            res2 = float(np.linalg.norm(Dx @ sol2 - XXV) / (scale if scale > 0 else 1.0))
            weak = res2 <= INVARIANCE_TOL
        x_norm = float(np.linalg.norm(x_val))
        r1 = x_norm > 1e-10 * (1.0 + float(np.linalg.norm(x)))
        r2 = cond_D <= COND_LIMIT
        inv = residual <= INVARIANCE_TOL
        ok = ok and r1 and r2 and inv
        rows.append(RegularityPoint(point=x, X_norm=x_norm, cond_D=cond_D,
                                    residual=residual, weak_invariance_only=weak,
                                    r1_ok=r1, r2_ok=r2, inv_ok=inv))
    return RegularityReport(points=tuple(rows), all_ok=ok)
