import math

import numpy as np
import pytest

from winmp import autodiff as ad


def fd_grad(f, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e.flat[i] = h
        g.flat[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def test_exp_derivative_at_zero():
    t = ad.Tape()
    x = t.var(0.0)
    assert t.backward(ad.exp(x))[x] == pytest.approx(1.0)


def test_relu_derivative_negative_side():
    t = ad.Tape()
    a = t.var(-1.0)
    assert t.backward(ad.relu(a))[a] == 0.0


def test_softmax_dot_gradient_hand_value():
    t = ad.Tape()
    th = t.var([0.0, 0.0])
    y = ad.dot(ad.softmax_groups(th, np.array([0])), np.array([1.0, 0.0]))
    np.testing.assert_allclose(t.backward(y)[th], [0.25, -0.25])


@pytest.mark.parametrize(
    "theta,expected",
    [([0.0, 0.0], [0.5, 0.5]), ([math.log(3), 0.0], [0.75, 0.25]), ([7.3], [1.0])],
)
def test_softmax_values(theta, expected):
    np.testing.assert_allclose(ad.softmax_groups(np.array(theta), np.array([0])), expected)


def test_softmax_singleton_has_zero_gradient():
    t = ad.Tape()
    th = t.var([2.0])
    y = ad.total(ad.softmax_groups(th, np.array([0])))
    assert t.backward(y)[th] == pytest.approx([0.0])


def test_softmax_stable_for_large_inputs():
    y = ad.softmax_groups(np.array([1000.0, 1000.0, -1000.0]), np.array([0, 2]), np.array([1.0, 0.5]))
    np.testing.assert_allclose(y, [0.5, 0.5, 0.5])


def test_softmax_rejects_non_finite():
    with pytest.raises(ValueError):
        ad.softmax_groups(np.array([np.nan, 0.0]), np.array([0]))


def test_maximum_tie_goes_to_first_operand():
    t = ad.Tape()
    a, b = t.var(1.0), t.var(1.0)
    g = t.backward(ad.maximum(a, b))
    assert g[a] == 1.0 and g[b] == 0.0


def test_maximum_strict():
    t = ad.Tape()
    a, b = t.var(1.0), t.var(2.0)
    g = t.backward(ad.maximum(a, b))
    assert g[a] == 0.0 and g[b] == 1.0


def test_arithmetic_chain_matches_finite_differences():
    x0 = np.array([0.7, 1.3, 2.1])

    def build(x):
        a = ad.mul(x, x)
        b = ad.div(ad.exp(ad.scale(x, 0.5)), ad.add(x, 1.0))
        c = ad.sub(ad.log(ad.add(a, 1.0)), b)
        return ad.total(ad.maximum(c, ad.relu(ad.sub(x, 1.0))))

    t = ad.Tape()
    xv = t.var(x0)
    grad = t.backward(build(xv))[xv]
    fd = fd_grad(lambda z: float(build(z)), x0)
    np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-9)


def test_var_operator_overloads():
    t = ad.Tape()
    x = t.var(3.0)
    y = (2.0 * x - 1.0) / x + (-x)
    assert float(y) == pytest.approx(5 / 3 - 3)
    assert t.backward(y)[x] == pytest.approx(1 / 9 - 1)


def test_div_by_zero_and_log_nonpositive_raise():
    with pytest.raises(ZeroDivisionError):
        ad.div(1.0, 0.0)
    with pytest.raises(ValueError):
        ad.log(-1.0)


def test_constant_expression_zero_gradient():
    t = ad.Tape()
    x = t.var(1.5)
    y = ad.add(ad.scale(x, 0.0), 4.0)
    assert t.backward(y)[x] == 0.0


def test_backward_rejects_foreign_output():
    t1, t2 = ad.Tape(), ad.Tape()
    x = t1.var(1.0)
    y = ad.exp(x)
    with pytest.raises(ValueError):
        t2.backward(y)


def test_mixing_tapes_rejected():
    t1, t2 = ad.Tape(), ad.Tape()
    with pytest.raises(ValueError):
        ad.add(t1.var(1.0), t2.var(2.0))


def test_gradient_map_is_immutable():
    t = ad.Tape()
    x = t.var(1.0)
    g = t.backward(ad.exp(x))
    with pytest.raises(TypeError):
        g[x] = 0


def test_stationary_symmetric_two_cycle_and_gradient():
    # chain [[1-p, p], [q, 1-q]] with p = q from softmax of a self-loop parameter
    def pi_a(theta):
        t = ad.Tape()
        th = t.var(theta)
        w = ad.softmax_groups(th, np.array([0, 2]))
        x = ad.stationary(w, np.array([0, 0, 1, 1]), np.array([0, 1, 0, 1]), 2)
        return t, th, x

    theta = np.zeros(4)
    t, th, x = pi_a(theta)
    np.testing.assert_allclose(x.value, [0.5, 0.5])
    grad = t.backward(ad.dot(x, np.array([1.0, 0.0])))[th]
    fd = fd_grad(lambda z: pi_a(z)[2].value[0], theta)
    np.testing.assert_allclose(grad, fd, atol=1e-6)


def test_stationary_closed_form_derivative():
    # P = [[1-p, p], [1, 0]]: pi_A = 1/(1+p), d pi_A / dp = -1/(1+p)^2
    p0 = 0.27
    t = ad.Tape()
    p = t.var([p0])
    w = ad.add(ad.mul(ad.gather(p, np.array([0, 0, 0])), np.array([-1.0, 1.0, 0.0])), np.array([1.0, 0.0, 1.0]))
    x = ad.stationary(w, np.array([0, 0, 1]), np.array([0, 1, 0]), 2)
    assert x.value[0] == pytest.approx(1 / (1 + p0))
    g = t.backward(ad.dot(x, np.array([1.0, 0.0])))[p]
    assert g[0] == pytest.approx(-1 / (1 + p0) ** 2, rel=1e-10)


def test_stationary_parameter_free_cycle_zero_gradient():
    t = ad.Tape()
    w = t.var(np.ones(3))
    x = ad.stationary(w, np.array([0, 1, 2]), np.array([1, 2, 0]), 3)
    np.testing.assert_allclose(x.value, [1 / 3] * 3)
    g = t.backward(ad.dot(x, np.array([1.0, 0.0, 0.0])))[w]
    # scaling the only edge out of a state does not move the distribution
    np.testing.assert_allclose(g @ np.ones(3), 0.0, atol=1e-12)


def test_stationary_singular_raises():
    with pytest.raises(np.linalg.LinAlgError):
        ad.stationary(np.ones(2), np.array([0, 1]), np.array([0, 1]), 2)


def test_propagate_gradients_match_finite_differences(rng):
    src_entry = np.array([0, 0, 1, 2, 2])
    edge = np.array([0, 1, 2, 3, 1])
    target = np.array([0, 1, 1, 2, 0])
    m0, w0 = rng.random(3), rng.random(4)
    c = rng.random(3)

    def f(m, w):
        return float(ad.propagate(m, w, src_entry, edge, target, 3) @ c)

    t = ad.Tape()
    m, w = t.var(m0), t.var(w0)
    g = t.backward(ad.dot(ad.propagate(m, w, src_entry, edge, target, 3), c))
    np.testing.assert_allclose(g[m], fd_grad(lambda z: f(z, w0), m0), atol=1e-8)
    np.testing.assert_allclose(g[w], fd_grad(lambda z: f(m0, z), w0), atol=1e-8)


def test_backward_single_reverse_sweep_deterministic():
    def run():
        t = ad.Tape()
        th = t.var(np.array([0.1, -0.4, 0.9]))
        y = ad.dot(ad.softmax_groups(th, np.array([0, 1])), np.array([1.0, 2.0, 3.0]))
        return t.backward(y)[th], t.kinds()

    (g1, k1), (g2, k2) = run(), run()
    assert np.array_equal(g1, g2) and k1 == k2 == ["softmax", "dot"]
