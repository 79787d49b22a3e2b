"""End-to-end analysis pipeline and the report it produces.

One call runs: trajectory integration, regularity sampling, normal-frame
transport, normal curvature sampling, Jacobi integration, conjugate-time
detection, the bound verdicts, and (when a 2-form is supplied) the
semi-Hamiltonian checks.  The report is a plain nested dict that serializes
to JSON losslessly and deterministically: no timestamps, no environment
data, keys sorted at emission.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import bounds as bounds_mod
from . import frames, hamiltonian, jacobi, ode
from . import pair as pair_mod
from .errors import ClosedOrbitWarning

MAX_SAMPLE_POINTS = 160
SELFADJOINT_FLAG_TOL = 1e-6

__all__ = ["AnalysisResult", "analyze", "curve_rows", "CURVE_COLUMNS"]


@dataclass
class AnalysisResult:
    """Everything the pipeline produced, plus the JSON-ready report dict."""

    pair: object
    trajectory: object
    transport: object
    jacobi_solution: object
    conjugate_times: list
    bounds: object
    report: dict
    grid: np.ndarray
    K_track: list
    sigma_min_track: np.ndarray


def _full_x0(model, pair, x0):
    x0 = np.asarray(x0, dtype=float)
    if isinstance(model, pair_mod.SODEModel) and not model.autonomous and len(x0) == 2 * model.m:
        return np.concatenate([[0.0], x0])
    if len(x0) != pair.n:
        raise ValueError(f"x0 must have {pair.n} components (got {len(x0)})")
    return x0


def _closed_orbit_suspected(traj):
    grid = traj.grid()
    x0 = traj.at(0.0)
    dist = lambda t: float(np.linalg.norm(traj.at(t) - x0))
    vals = np.array([dist(t) for t in grid])
    scale = float(np.max(vals))
    if scale == 0.0:
        return True
    mask = grid >= 0.1 * traj.T
    cand = np.where(mask)[0]
    if len(cand) == 0:
        return False
    i_rel = int(np.argmin(vals[cand]))
    i = cand[i_rel]
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    _, d_min = ode.refine_minimum(dist, lo, hi)
    return d_min < 1e-6 * scale


def _subsample(ts, cap=MAX_SAMPLE_POINTS):
    ts = np.asarray(ts)
    if len(ts) <= cap:
        return ts
    idx = np.linspace(0, len(ts) - 1, cap).round().astype(int)
    return ts[np.unique(idx)]


def _sigma_min_dips(js, grid, track):
    """Interior local minima of the smallest singular value of P, refined."""
    dips = []
    for i in range(1, len(grid) - 1):
        if track[i] <= track[i - 1] and track[i] <= track[i + 1]:
            t_min, v_min = ode.refine_minimum(js.sigma_min, grid[i - 1], grid[i + 1])
            dips.append({"t": float(t_min), "value": float(v_min)})
    return dips


def analyze(model, x0=None, T=None, sigma=None, rel_tol=ode.DEFAULT_REL_TOL,
            abs_tol=ode.DEFAULT_ABS_TOL, rank_tol=jacobi.RANK_TOL,
            zero_tol=jacobi.DETECT_TOL, G0=None, system_name=None,
            params_used=None) -> AnalysisResult:
    """Run the full pipeline on a model (second-order system or generic pair).

    ``sigma`` optionally supplies the coordinate matrix of a 2-form for the
    semi-Hamiltonian checks.  ``x0`` is the 2m state (position, velocity) for
    second-order models; a leading time coordinate is added automatically for
    nonautonomous systems."""
    pair = pair_mod.as_pair(model)
    if x0 is None or T is None:
        raise ValueError("x0 and T are required")
    x0_full = _full_x0(model, pair, x0)
    T = float(T)
    m = pair.m

    traj = ode.integrate(pair.field_callable(), x0_full, T, rel_tol=rel_tol, abs_tol=abs_tol)

    reg_points = [traj.at(t) for t in _subsample(traj.steps)]
    regularity = pair_mod.check_regularity(pair, reg_points)

    closed = _closed_orbit_suspected(traj)
    if closed:
        warnings.warn("trajectory appears to revisit its initial point; "
                      "conjugate-point analysis assumes a non-closed trajectory",
                      ClosedOrbitWarning, stacklevel=2)

    ft = frames.transport_normal_frame(pair, traj, G0=G0)
    js = jacobi.integrate_jacobi(ft.K_normal, m, T)
    cts = jacobi.find_conjugate_times(js, rank_tol=rank_tol, zero_tol=zero_tol)

    grid = ft.grid()
    K_track = [ft.K_normal(t) for t in grid]
    eye = np.eye(m)
    g_track = [eye] * len(grid)
    brep = bounds_mod.bounds_report(K_track, g_track, grid, m, T,
                                    [(c.t_star, c.multiplicity) for c in cts])

    sig_track = np.array([js.sigma_min(t) for t in grid])
    dips = _sigma_min_dips(js, grid, sig_track)

    ham_section = None
    if sigma is not None:
        sh = hamiltonian.SemiHamiltonianModel(pair=pair, sigma=sigma)
        pts = [traj.at(t) for t in _subsample(traj.steps, 12)]
        metric_info = hamiltonian.induced_metric(sh, x0_full)
        K0 = pair_mod.curvature_at(pair, x0_full)
        selfadj = hamiltonian.check_K_selfadjoint(metric_info["g"], K0)
        ham_ts = _subsample(grid, 24)
        flags = []
        if selfadj > SELFADJOINT_FLAG_TOL:
            flags.append("curvature_not_selfadjoint")
        if metric_info["flipped"]:
            flags.append("metric_sign_flipped")
        ham_section = {
            "lagrangian_residual": hamiltonian.check_lagrangian(sh, pts),
            "semi_invariance_residual": hamiltonian.check_semi_invariance(sh, pts[:8]),
            "metric_symmetry_residual": metric_info["symmetry_residual"],
            "metric_eigenvalues": [float(v) for v in metric_info["eigenvalues"]],
            "metric_flipped": bool(metric_info["flipped"]),
            "selfadjoint_residual": float(selfadj),
            "horizontal_lagrangian_residual": hamiltonian.horizontal_lagrangian_residual(sh, ft, ham_ts),
            "metric_constancy_residual": hamiltonian.metric_constancy_residual(sh, ft, ham_ts),
            "flags": flags,
        }

    weak_count = sum(1 for p in regularity.points if p.weak_invariance_only)
    report = {
        "system": {
            "name": system_name or type(model).__name__,
            "kind": "sode" if isinstance(model, pair_mod.SODEModel) else "generic",
            "m": m,
            "n": pair.n,
            "coords": list(pair.coords),
            "params": {k: v for k, v in sorted((params_used or {}).items())},
        },
        "trajectory": {
            "x0": [float(v) for v in x0_full],
            "T": T,
            "rel_tol": rel_tol,
            "abs_tol": abs_tol,
            "steps": int(traj.n_steps),
            "rhs_evals": int(traj.n_rhs_evals),
        },
        "tolerances": {"rank_tol": rank_tol, "zero_tol": zero_tol},
        "regularity": {
            "all_ok": bool(regularity.all_ok),
            "worst_cond": float(regularity.worst_cond),
            "worst_residual": float(regularity.worst_residual),
            "points_checked": len(regularity.points),
            "weak_invariance_points": int(weak_count),
        },
        "closed_orbit_suspected": bool(closed),
        "conjugate_times": [c.as_dict() for c in cts],
        "sigma_min_dips": dips,
        "bounds": {
            "lambda_max": float(brep.lambda_max),
            "trK_min": float(brep.trK_min),
            "symmetry_residual": float(brep.symmetry_residual),
            "safe_interval": [0.0, float(brep.safe_interval[1])],
            "trace_bound_time": None if brep.trace_bound_time is None else float(brep.trace_bound_time),
            "trace_bound_reason": brep.trace_bound_reason,
            "eigenlines": [
                {
                    "direction": [float(v) for v in tr.direction],
                    "kappa": float(tr.kappa),
                    "predicted_first_zero": None if tr.predicted_first_zero is None else float(tr.predicted_first_zero),
                    "sturm_zeros": [float(z) for z in tr.sturm_zeros],
                }
                for tr in brep.eigenline_tracks
            ],
            "verdicts": dict(sorted(brep.verdicts.items())),
        },
        "hamiltonian": ham_section,
    }

    return AnalysisResult(pair=pair, trajectory=traj, transport=ft,
                          jacobi_solution=js, conjugate_times=cts, bounds=brep,
                          report=report, grid=grid, K_track=K_track,
                          sigma_min_track=sig_track)


def _curve_columns(m):
    cols = ["t", "sigma_min_P"]
    for i in range(m):
        cols += [f"k_eig_{i+1}_re", f"k_eig_{i+1}_im"]
    cols += ["tr_K", "det_G"]
    return cols


CURVE_COLUMNS = _curve_columns


def curve_rows(result: AnalysisResult):
    """Rows of the curves table: t, sigma_min(P), curvature eigenvalues
    (real/imag, sorted by real part), trace, det G."""
    m = result.pair.m
    rows = []
    for idx, t in enumerate(result.grid):
        K = result.K_track[idx]
        eig = sorted(np.linalg.eigvals(K), key=lambda z: (z.real, z.imag))
        row = [float(t), float(result.sigma_min_track[idx])]
        for z in eig:
            row += [float(z.real), float(z.imag)]
        row += [float(np.trace(K)), float(result.transport.det_G(t))]
        rows.append(row)
    return _curve_columns(m), rows
