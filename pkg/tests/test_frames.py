import numpy as np
import pytest

from conjscope import catalog, frames, jacobi, ode, pair as pm
from conjscope.errors import ZeroDirection


def _transport(model, x0, T, G0=None):
    pr = pm.lift_sode(model) if isinstance(model, pm.SODEModel) else model
    traj = ode.integrate(pr.field_callable(), x0, T)
    return pr, traj, frames.transport_normal_frame(pr, traj, G0=G0)


def test_velocity_independent_force_keeps_G_constant():
    model = pm.SODEModel(m=1, F=("-x1",), autonomous=True)
    G0 = np.array([[1.7]])
    _, _, ft = _transport(model, [0.3, 0.7], 5.0, G0=G0)
    for t in np.linspace(0, 5, 9):
        assert np.allclose(ft.G(t), G0, atol=1e-12)
        assert np.allclose(ft.K_normal(t), [[1.0]], atol=1e-10)


def test_damped_oscillator_transport_and_metric():
    gamma = 0.4
    model = pm.SODEModel(m=1, F=(f"-x1 - {2*gamma}*y1",), autonomous=True)
    _, _, ft = _transport(model, [1.0, 0.0], 6.0)
    for t in (0.5, 2.0, 4.5):
        assert abs(ft.G(t)[0, 0] - np.exp(-gamma * t)) < 1e-9
        assert abs(ft.K_normal(t)[0, 0] - (1 - gamma**2)) < 1e-9
        g = frames.invariant_metric_at(ft, t)
        assert abs(g[0, 0] - np.exp(2 * gamma * t)) < 1e-7 * np.exp(2 * gamma * t)


def test_transported_frame_is_orthonormal_for_its_metric():
    model = pm.SODEModel(m=2, F=("-x1 - 0.4*y1", "-2*x2 + 0.1*y2"), autonomous=True)
    _, _, ft = _transport(model, [0.5, -0.3, 0.2, 0.4], 4.0)
    for t in (0.0, 1.3, 3.9):
        G = ft.G(t)
        g = frames.invariant_metric_at(ft, t)
        assert np.allclose(G.T @ g @ G, np.eye(2), atol=1e-9)


def test_identity_metric_when_H1_vanishes():
    model = pm.SODEModel(m=2, F=("-x1", "-3*x2"), autonomous=True)
    _, _, ft = _transport(model, [0.5, -0.3, 0.2, 0.4], 4.0)
    for t in (0.0, 2.0, 4.0):
        assert np.allclose(frames.invariant_metric_at(ft, t), np.eye(2), atol=1e-12)


def test_dancing_transport_follows_eigenvector_fields():
    # seed the transport with the curvature eigenvectors; the transported
    # columns must stay parallel to the pointwise eigenvector fields
    model, _ = catalog.build("dancing", {"F": "sin(x1)"})
    x0 = np.array([2.5, -2.0, 0.6, 0.1])
    c0 = x0[3] / (x0[2] - x0[1])
    G0 = np.array([[0.0, 1.0], [1.0, c0]])     # columns: d/dy2 and d/dy1 + c d/dy2
    pr, traj, ft = _transport(model, x0, 6.0, G0=G0)
    for t in np.linspace(0.0, 6.0, 13):
        s = traj.at(t)
        c = s[3] / (s[2] - s[1])
        G = ft.G(t)
        col0 = G[:, 0] / np.linalg.norm(G[:, 0])
        assert abs(abs(col0[1]) - 1.0) < 1e-8 and abs(col0[0]) < 1e-8
        col1 = G[:, 1]
        direction = np.array([1.0, c]) / np.linalg.norm([1.0, c])
        cross = col1[0] * direction[1] - col1[1] * direction[0]
        assert abs(cross) / np.linalg.norm(col1) < 1e-8


def test_H1_recomputed_in_transported_frame_vanishes():
    model = pm.SODEModel(m=2, F=("-x1 - 0.4*y1 + 0.2*y2", "-2*x2 - 0.3*y2"), autonomous=True)
    pr, traj, ft = _transport(model, [0.5, -0.3, 0.2, 0.4], 4.0)
    h = 1e-5
    for t in (0.7, 2.0, 3.3):
        x = ft.x(t)
        H1 = pm.extract_H(pr, x).H1
        G = ft.G(t)
        dG = (ft.G(t + h) - ft.G(t - h)) / (2 * h)
        residual = np.linalg.norm(H1 @ G + 2 * dG) / max(np.linalg.norm(H1) * np.linalg.norm(G), 1.0)
        assert residual < 1e-7


def test_detG_matches_trace_integral():
    from scipy.integrate import simpson
    model = pm.SODEModel(m=2, F=("-x1 - 0.4*y1 + 0.2*y2", "-2*x2 - 0.3*y2"), autonomous=True)
    pr, traj, ft = _transport(model, [0.5, -0.3, 0.2, 0.4], 4.0)
    ts = np.linspace(0, 4.0, 801)
    trH1 = np.array([np.trace(pm.extract_H(pr, ft.x(t)).H1) for t in ts])
    for t_end_idx in (200, 800):
        t_end = ts[t_end_idx]
        integral = simpson(trH1[: t_end_idx + 1], x=ts[: t_end_idx + 1])
        expected = np.exp(-0.5 * integral)
        assert abs(ft.det_G(t_end) - expected) < 1e-7 * abs(expected)


def test_conjugate_times_independent_of_G0():
    # mixed damping: H1 != 0, so the transport and the normal curvature both
    # genuinely depend on the seed matrix while the detected times must not
    model = pm.SODEModel(m=2, F=("-x1 - 0.3*y1", "-x2 - 0.6*y2"), autonomous=True)
    pr = pm.lift_sode(model)
    x0 = [0.2, -0.1, 1.0, 0.4]
    traj = ode.integrate(pr.field_callable(), x0, 4.0)
    rng = np.random.default_rng(9)
    reference = None
    for _ in range(10):
        G0 = rng.normal(size=(2, 2)) + 2.0 * np.eye(2)
        ft = frames.transport_normal_frame(pr, traj, G0=G0)
        js = jacobi.integrate_jacobi(ft.K_normal, 2, 4.0)
        times = [c.t_star for c in jacobi.find_conjugate_times(js)]
        if reference is None:
            reference = times
            assert times, "expected conjugate times in the window"
        else:
            assert len(times) == len(reference)
            for a, b in zip(times, reference):
                assert abs(a - b) < 1e-8


def test_directional_curvature_identity():
    rng = np.random.default_rng(3)
    for _ in range(5):
        A = rng.normal(size=(3, 3))
        g = A @ A.T + 3 * np.eye(3)
        v = rng.normal(size=3)
        assert abs(frames.directional_curvature(np.eye(3), g, v) - 1.0) < 1e-12


def test_directional_curvature_diagonal():
    K = np.diag([1.0, 4.0])
    assert frames.directional_curvature(K, np.eye(2), [1, 0]) == 1.0
    assert frames.directional_curvature(K, np.eye(2), [0, 1]) == 4.0


def test_directional_curvature_skew_part_drops():
    eps = 0.3
    K = np.array([[1.0, eps], [-eps, 1.0]])
    rng = np.random.default_rng(4)
    for _ in range(10):
        v = rng.normal(size=2)
        assert abs(frames.directional_curvature(K, np.eye(2), v) - 1.0) < 1e-12


def test_directional_curvature_zero_direction():
    with pytest.raises(ZeroDirection):
        frames.directional_curvature(np.eye(2), np.eye(2), [0.0, 0.0])


def test_sup_directional_curvature_is_max_symmetrized_eigenvalue():
    rng = np.random.default_rng(6)
    K = rng.normal(size=(3, 3))
    S = 0.5 * (K + K.T)
    vals, vecs = np.linalg.eigh(S)
    v_max = vecs[:, -1]
    k_at_max = frames.directional_curvature(K, np.eye(3), v_max)
    assert abs(k_at_max - vals[-1]) < 1e-10
    for _ in range(200):
        v = rng.normal(size=3)
        assert frames.directional_curvature(K, np.eye(3), v) <= vals[-1] + 1e-10


def test_constant_coordinates_have_constant_norm():
    model = pm.SODEModel(m=2, F=("-x1 - 0.4*y1 + 0.2*y2", "-2*x2 - 0.3*y2"), autonomous=True)
    _, _, ft = _transport(model, [0.5, -0.3, 0.2, 0.4], 4.0)
    coeff = np.array([0.8, -0.5])              # constant coordinates in the normal frame
    norms = []
    for t in np.linspace(0, 4, 21):
        u = ft.G(t) @ coeff                    # the field in working-frame coordinates
        g = frames.invariant_metric_at(ft, t)
        norms.append(u @ g @ u)
    assert np.max(np.abs(np.array(norms) - norms[0])) < 1e-8
