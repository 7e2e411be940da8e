import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import fsolve

from genlip.model import (
    GeneratorParams,
    build_matrices,
    derive_constants,
    eval_dynamics,
    eval_f,
    eval_h,
    eval_output,
    intermediate_quantities,
    jac_f_x,
    jac_h_x,
    load_params,
    params_to_dict,
    steady_state,
)
from conftest import rand_points


def unit_params(**kw):
    base = dict(omega0=2.0, H=1.0, K_D=0.0, Td0p=1.0, Tq0p=1.0, xd=0.7, xq=0.7,
                xdp=0.7, xqp=0.7, S_B=1.0, S_N=1.0)
    base.update(kw)
    return GeneratorParams(**base)


# physical equations written out directly, without the alpha/beta collection
def physical_rates(p, x, u):
    d, w, eqp, edp = x
    Tm, Efd, iR, iI = u
    k = p.S_B / p.S_N
    iq = iI * math.sin(d) + iR * math.cos(d)
    id_ = iR * math.sin(d) - iI * math.cos(d)
    eq = eqp - k * p.xdp * id_
    ed = edp + k * p.xqp * iq
    Te = k * (eq * iq + ed * id_)
    return np.array([
        w - p.omega0,
        p.omega0 / (2 * p.H) * (Tm - Te - p.K_D / p.omega0 * (w - p.omega0)),
        # currents are on the system base; the machine equations need k * i
        (Efd - eqp - (p.xd - p.xdp) * k * id_) / p.Td0p,
        (-edp + (p.xq - p.xqp) * k * iq) / p.Tq0p,
    ])


def physical_output(p, x, u):
    d, _, eqp, edp = x
    _, _, iR, iI = u
    k = p.S_B / p.S_N
    iq = iI * math.sin(d) + iR * math.cos(d)
    id_ = iR * math.sin(d) - iI * math.cos(d)
    eq = eqp - k * p.xdp * id_
    ed = edp + k * p.xqp * iq
    return np.array([ed * math.sin(d) + eq * math.cos(d), eq * math.sin(d) - ed * math.cos(d)])


def test_params_validation():
    for name in ("omega0", "H", "Td0p", "Tq0p", "S_B", "S_N"):
        with pytest.raises(ValueError, match=name):
            unit_params(**{name: 0.0})
    with pytest.raises(ValueError):
        unit_params(H=-1.0)
    with pytest.raises(ValueError):
        unit_params(xd=float("nan"))


def test_constants_zero_damping_zero_saliency():
    c = derive_constants(unit_params())
    assert c.alpha1 == 2 and c.alpha2 == 1
    assert c.alpha4 == 0 and c.alpha5 == 0 and c.alpha6 == 0
    assert c.alpha8 == 0 and c.alpha10 == 0
    assert c.beta1 == 0.0


def test_constants_damping():
    c = derive_constants(unit_params(K_D=2.0))
    assert c.alpha5 == 1.0 and c.alpha6 == 2.0


def test_constants_example_file_recomputed(params, consts):
    # independent recomputation, formula by formula
    w0, H, KD = params.omega0, params.H, params.K_D
    k = params.S_B / params.S_N
    expect = {
        "alpha1": w0, "alpha2": w0 / (2 * H), "alpha3": w0 / (2 * H) * k,
        "alpha4": w0 / (2 * H) * k * k * (params.xqp - params.xdp),
        "alpha5": KD / (2 * H), "alpha6": KD / (2 * H) * w0,
        "alpha7": 1 / params.Td0p, "alpha8": k * (params.xd - params.xdp) / params.Td0p,
        "alpha9": 1 / params.Tq0p, "alpha10": k * (params.xq - params.xqp) / params.Tq0p,
        "beta1": 0.5 * k * (params.xqp - params.xdp), "beta2": 0.5 * k * (params.xqp + params.xdp),
    }
    for name, value in expect.items():
        assert getattr(consts, name) == pytest.approx(value, rel=1e-15), name
    assert consts.beta2 - consts.beta1 == pytest.approx(k * params.xdp, rel=1e-14)


def test_matrices_placement():
    c = derive_constants(unit_params(K_D=2.0, Td0p=0.5, Tq0p=1 / 3.0))
    m = build_matrices(c)
    assert np.array_equal(np.diag(m.A)[1:], [-1.0, -2.0, -3.0])
    assert m.A[0, 1] == 1.0
    assert np.count_nonzero(m.A) == 4
    assert m.Bu[1, 0] == c.alpha2 and m.Bu[2, 1] == c.alpha7 and np.count_nonzero(m.Bu) == 2


def test_matrices_all_zero_constants():
    c = derive_constants(unit_params())
    zero = type(c)(**{f: 0.0 for f in c.__dataclass_fields__})
    m = build_matrices(zero)
    assert np.count_nonzero(m.A) == 1 and m.A[0, 1] == 1.0
    half = type(c)(**{**{f: 0.0 for f in c.__dataclass_fields__}, "beta2": 0.5})
    assert np.array_equal(build_matrices(half).Du, [[0, 0, 0, 0.5], [0, 0, -0.5, 0]])


def test_f_with_zero_input(consts):
    rng = np.random.default_rng(0)
    x, _ = rand_points(rng, 20)
    f = eval_f(consts, x, np.zeros((20, 4)))
    assert np.allclose(f, [-consts.alpha1, consts.alpha6, 0.0, 0.0], rtol=0, atol=1e-12)


def test_f_axis_aligned_current(consts):
    f = eval_f(consts, np.array([0.0, 5.0, 0.0, 0.0]), np.array([0.3, 0.2, 0.0, 1.0]))
    assert f[2] == pytest.approx(consts.alpha8)
    assert f[3] == pytest.approx(0.0, abs=1e-15)


def test_h_examples(consts):
    assert np.allclose(eval_h(consts, [0, 3, 1, 0], np.zeros(4)), [1, 0])
    assert np.allclose(eval_h(consts, [math.pi / 2, 3, 0, 1], np.zeros(4)), [1, 0], atol=1e-15)


def test_dynamics_pure_angle_coupling():
    c = derive_constants(unit_params())
    zero = type(c)(**{f: 0.0 for f in c.__dataclass_fields__})
    m = build_matrices(zero)
    assert np.array_equal(eval_dynamics(zero, m, [0, 1, 0, 0], np.zeros(4)), [1, 0, 0, 0])


def test_dynamics_at_origin(consts, mats):
    assert np.allclose(eval_dynamics(consts, mats, np.zeros(4), np.zeros(4)), [-consts.alpha1, consts.alpha6, 0, 0])


def test_output_feedthrough(consts, mats):
    u = np.array([0, 0, 0, 1.0])
    y = eval_output(consts, mats, np.zeros(4), u)
    assert np.allclose(y, eval_h(consts, np.zeros(4), u) + [consts.beta2, 0])
    x = np.array([0.3, 1.0, 0.9, 0.2])
    assert np.array_equal(eval_output(consts, mats, x, np.zeros(4)), eval_h(consts, x, np.zeros(4)))


def test_dynamics_match_physical_equations(params, consts, mats):
    rng = np.random.default_rng(1)
    x, u = rand_points(rng, 100)
    for xi, ui in zip(x, u):
        got = eval_dynamics(consts, mats, xi, ui)
        want = physical_rates(params, xi, ui)
        assert np.allclose(got, want, rtol=1e-12, atol=1e-12 * np.abs(want).max())


def test_output_matches_physical_equations(params, consts, mats):
    rng = np.random.default_rng(2)
    x, u = rand_points(rng, 100)
    for xi, ui in zip(x, u):
        want = physical_output(params, xi, ui)
        assert np.allclose(eval_output(consts, mats, xi, ui), want, rtol=1e-12, atol=1e-13)


def test_batch_matches_pointwise(consts, mats):
    rng = np.random.default_rng(3)
    x, u = rand_points(rng, 30)
    fb, hb = eval_f(consts, x, u), eval_h(consts, x, u)
    for i in range(30):
        assert np.array_equal(fb[i], eval_f(consts, x[i], u[i]))
        assert np.array_equal(hb[i], eval_h(consts, x[i], u[i]))


def central_jacobian(fun, x, step=1e-6):
    cols = []
    for j in range(4):
        e = np.zeros(4)
        e[j] = step
        cols.append((fun(x + e) - fun(x - e)) / (2 * step))
    return np.stack(cols, axis=-1)


def test_jacobians_match_finite_differences(consts):
    rng = np.random.default_rng(4)
    x, u = rand_points(rng, 1000)
    for xi, ui in zip(x, u):
        for jac, fun in ((jac_f_x, eval_f), (jac_h_x, eval_h)):
            fd = central_jacobian(lambda z: fun(consts, z, ui), xi)
            an = jac(consts, xi, ui)
            assert np.max(np.abs(fd - an)) <= 1e-6 * max(1.0, np.max(np.abs(an)))


def test_jacobian_structure(consts):
    rng = np.random.default_rng(5)
    x, u = rand_points(rng, 50)
    J = jac_f_x(consts, x, u)
    assert np.all(J[:, 0] == 0)
    assert np.all(J[:, 2:, 1:] == 0)
    assert np.all(jac_h_x(consts, x, u)[:, :, 1] == 0)
    assert np.all(jac_f_x(consts, x, np.zeros((50, 4))) == 0)


def test_jacobian_examples(consts):
    assert np.array_equal(jac_h_x(consts, np.zeros(4), np.zeros(4)), [[0, 0, 1, 0], [0, 0, 0, -1]])
    assert jac_f_x(consts, np.zeros(4), np.array([0, 0, 1.0, 0]))[2, 0] == pytest.approx(-consts.alpha8)
    assert np.linalg.norm(jac_h_x(consts, np.zeros(4), np.zeros(4)), 2) == pytest.approx(1.0)


finite = st.floats(-10, 10, allow_nan=False)
vec4 = st.lists(finite, min_size=4, max_size=4).map(np.array)


@settings(max_examples=200, deadline=None)
@given(vec4, vec4)
def test_f1_constant_and_periodic(x, u):
    from genlip.model import DerivedConstants
    c = derive_constants(unit_params(K_D=1.3, xdp=0.3, xqp=0.5, S_B=100.0, S_N=300.0, xd=1.5, xq=1.2))
    assert eval_f(c, x, u)[0] == -c.alpha1
    shift = x + np.array([2 * math.pi, 0, 0, 0])
    assert np.allclose(eval_f(c, shift, u), eval_f(c, x, u), rtol=0, atol=1e-12 * (1 + np.abs(eval_f(c, x, u)).max()))
    assert np.allclose(eval_h(c, shift, u), eval_h(c, x, u), rtol=0, atol=1e-12 * (1 + np.abs(x).max() + np.abs(u).max()))
    assert isinstance(c, DerivedConstants)


@settings(max_examples=200, deadline=None)
@given(vec4, vec4, st.floats(-2, 2), st.floats(-2, 2))
def test_affine_in_transient_voltages(x, u, a, b):
    c = derive_constants(unit_params(K_D=1.3, xdp=0.3, xqp=0.5, S_B=100.0, S_N=300.0, xd=1.5, xq=1.2))
    d = np.array([0, 0, a, b])

    def g(z):
        return np.concatenate([eval_f(c, z, u)[1:2], eval_h(c, z, u)])

    second = g(x + 2 * d) - 2 * g(x + d) + g(x)
    scale = 1 + np.abs(g(x)).max() + np.abs(g(x + 2 * d)).max()
    assert np.max(np.abs(second)) <= 1e-10 * scale


def test_intermediate_quantities(consts, params):
    q = intermediate_quantities(consts, params, np.zeros(4), np.array([0, 0, 1.0, 0]))
    assert q.iq == 1.0 and q.id == 0.0
    q = intermediate_quantities(consts, params, np.array([0.4, 0, 1, 0.2]), np.zeros(4))
    assert q.iq == q.id == q.Pe == q.Te == 0.0
    q = intermediate_quantities(consts, params, np.array([0.4, 0, 1.1, 0.2]), np.array([0, 0, 3.0, -2.0]))
    assert q.Pe == pytest.approx(q.eq * q.iq + q.ed * q.id)
    assert q.Te == pytest.approx(params.base_ratio * q.Pe)


def test_steady_state_matches_root_finder(consts, mats, traj):
    u = traj.values[0]
    x = steady_state(consts, mats, u, (0.5, 0.0, 1.0, 0.0))
    assert np.linalg.norm(eval_dynamics(consts, mats, x, u)) < 1e-9

    def resid(z):
        full = np.array([z[0], consts.alpha1, z[1], z[2]])
        return eval_dynamics(consts, mats, full, u)[1:]

    z = fsolve(resid, [0.5, 1.0, 0.0], xtol=1e-12)
    assert np.allclose(x[[0, 2, 3]], z, atol=1e-10)


def test_load_params_errors(tmp_path, params):
    good = params_to_dict(params)
    path = tmp_path / "p.json"
    path.write_text(__import__("json").dumps({k: v for k, v in good.items() if k != "Tq0p"}))
    with pytest.raises(KeyError, match="Tq0p"):
        load_params(path)
    path.write_text(__import__("json").dumps({**good, "H": -1}))
    with pytest.raises(ValueError, match="H"):
        load_params(path)
    path.write_text(__import__("json").dumps(good))
    assert load_params(path) == params
