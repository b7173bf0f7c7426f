from types import SimpleNamespace

import numpy as np
import pytest

from entropy_split.gas import GasModel, conservative
from entropy_split.mesh import build_mesh, compute_element_ops
from entropy_split.problems import vortex2d
from entropy_split.spatial import SchemeConfig, residual
from entropy_split.timestepping import (
    EntropyFunctional,
    RelaxationError,
    compute_dt,
    integrate,
    relaxation_gamma,
    rk4_step,
    rrk4_step,
)


def decay(u, t):
    return -u


def test_rk4_decay_matches_stability_polynomial():
    u = np.array([1.0])
    for _ in range(10):
        u = rk4_step(u, 0.0, 0.1, decay)
    z = -0.1
    R = 1 + z + z**2 / 2 + z**3 / 6 + z**4 / 24
    assert u[0] == pytest.approx(R**10, rel=1e-14)
    # classical RK4 global error at this step size is 3.3e-7
    assert abs(u[0] - np.exp(-1.0)) == pytest.approx(3.33e-7, rel=0.01)


def test_rk4_zero_residual_keeps_state():
    u = np.array([0.3, -2.0])
    np.testing.assert_array_equal(rk4_step(u, 0.0, 0.5, lambda u, t: np.zeros_like(u)), u)


def test_rk4_fourth_order():
    def err(n):
        u, t, _ = integrate(np.array([1.0]), 0.0, 1.0, lambda u, t: np.cos(t) * u, n_steps=n)
        return abs(u[0] - np.exp(np.sin(1.0)))

    assert err(10) / err(20) == pytest.approx(16.0, rel=0.1)


def test_compute_dt_formula():
    gas = GasModel()
    u = conservative(np.full((2, 3), 1.4), np.zeros((2, 3, 1)), np.ones((2, 3)), gas)
    ops = SimpleNamespace(h_min=np.array([0.005, 0.01]))
    assert compute_dt(u, ops, gas, 0.3) == pytest.approx(0.0015, rel=1e-14)
    assert compute_dt(u, ops, gas, 0.6) == pytest.approx(0.003, rel=1e-14)


def test_sod_dt_set_by_left_state():
    from entropy_split.problems import sod

    prob = sod()
    mesh = build_mesh(2, 1, prob.cells, prob.domain)
    ops = compute_element_ops(mesh)
    u = prob.initial(mesh.x + 1e-9 * (mesh.centroids()[:, None, :] - mesh.x))
    # element width 0.005, LGL p=2 spacing 0.0025, left sound speed sqrt(1.4)
    assert compute_dt(u, ops, prob.gas, 0.3) == pytest.approx(0.3 * 0.0025 / np.sqrt(1.4), rel=1e-12)


class QuadraticEntropy:
    def total(self, u):
        return float(np.sum(u * u))

    def rate(self, u, r):
        return float(2.0 * np.sum(u * r))


def rotation(u, t):
    return np.array([u[1], -u[0]])


def test_relaxation_conserves_quadratic_invariant():
    u = np.array([1.0, 0.0])
    ent = QuadraticEntropy()
    gammas = []
    for _ in range(200):
        u, g, de = rrk4_step(u, 0.0, 0.3, rotation, ent)
        gammas.append(g)
    assert abs(ent.total(u) - 1.0) < 1e-13
    assert max(abs(np.array(gammas) - 1.0)) < 1e-3


def test_relaxation_error_without_sign_change():
    class Linear:
        def total(self, u):
            return float(np.sum(u))

        def rate(self, u, r):
            return 1e6

    with pytest.raises(RelaxationError):
        relaxation_gamma(np.array([1.0]), np.array([1.0]), 0.1, 1e6, Linear())


def test_rrk4_rejects_unknown_mode():
    with pytest.raises(ValueError):
        rrk4_step(np.array([1.0, 0.0]), 0.0, 0.1, rotation, QuadraticEntropy(), mode="strict")


def vortex_setup(dissipation=False):
    prob = vortex2d()
    mesh = build_mesh(2, 2, 4, prob.domain, "vortex2d")
    ops = compute_element_ops(mesh)
    cfg = SchemeConfig(gas=prob.gas, dissipation=dissipation)
    return prob, mesh, ops, cfg


def test_rrk4_step_conserves_entropy_on_vortex():
    prob, mesh, ops, cfg = vortex_setup()
    ent = EntropyFunctional(ops, prob.gas)
    u = prob.initial(mesh.x)
    s0 = ent.total(u)
    dt = compute_dt(u, ops, prob.gas, 0.1)
    u1, g, _ = rrk4_step(u, 0.0, dt, lambda u, t: residual(u, t, ops, cfg), ent)
    assert abs(ent.total(u1) - s0) <= 1e-12 * abs(s0)
    assert abs(g - 1.0) < 1e-2


def test_rrk4_dissipative_mode_is_monotone():
    prob, mesh, ops, cfg = vortex_setup(dissipation=True)
    ent = EntropyFunctional(ops, prob.gas)
    history = []
    u, t, steps = integrate(
        prob.initial(mesh.x), 0.0, 0.5, lambda u, t: residual(u, t, ops, cfg),
        lambda u, t: compute_dt(u, ops, prob.gas, 0.1), "rrk4", ent, "dissipative",
        after_step=lambda u, t, rec: history.append(ent.total(u)),
    )
    s = np.array(history)
    assert np.all(np.diff(s) <= 1e-12 * abs(s[0]))
    assert s[-1] < s[0]


def test_integrate_lands_on_final_time():
    seen = []
    u, t, steps = integrate(
        np.array([1.0, 0.0]), 0.0, 1.0, rotation, lambda u, t: 0.3, "rrk4", QuadraticEntropy(),
        before_step=lambda u, t, k: seen.append(t),
    )
    assert t == 1.0
    assert steps == len(seen) == 4
    assert seen[0] == 0.0


def test_integrate_argument_checks():
    with pytest.raises(ValueError):
        integrate(np.zeros(1), 0.0, 1.0, decay, method="euler", n_steps=2)
    with pytest.raises(ValueError):
        integrate(np.zeros(1), 0.0, 1.0, decay, method="rrk4", n_steps=2)
    with pytest.raises(ValueError):
        integrate(np.zeros(1), 0.0, 1.0, decay)
