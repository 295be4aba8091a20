import numpy as np
import pytest

from capnet.nn import (
    IDENTITY,
    TANH,
    Adam,
    CheckpointFormatError,
    Layer,
    Mlp,
    backward,
    finite_difference_check,
    forward,
    init_xavier,
    load_mlp,
    make_rng,
    mse_loss,
    save_mlp,
)


def random_net(seed=0, sizes=(4, 6, 5, 3), acts=(TANH, TANH, IDENTITY)):
    net = init_xavier(list(sizes), list(acts), make_rng(seed))
    rng = make_rng(seed + 100)
    for layer in net.layers:
        layer.b[:] = rng.normal(scale=0.3, size=layer.b.shape)
    return net


def test_zero_network_gives_zero():
    net = Mlp([Layer(np.zeros((3, 4)), np.zeros(3)), Layer(np.zeros((2, 3)), np.zeros(2))])
    assert not forward(net, np.arange(4.0))[0].any()


def test_identity_layer():
    net = Mlp([Layer(np.eye(3), np.zeros(3), IDENTITY)])
    x = np.array([0.3, -2.0, 5.0])
    assert np.array_equal(net(x), x)


def test_hand_computed_2_2_1():
    net = Mlp(
        [
            Layer(np.array([[0.5, -0.3], [0.8, 0.2]]), np.array([0.1, -0.2])),
            Layer(np.array([[1.5, -0.7]]), np.array([0.05])),
        ]
    )
    # tanh(1.5 tanh(0.66) - 0.7 tanh(-0.12) + 0.05)
    assert net(np.array([0.4, -1.2]))[0] == pytest.approx(0.76207428397263, abs=1e-12)


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        forward(random_net(), np.zeros(5))
    with pytest.raises(ValueError):
        Mlp([Layer(np.zeros((3, 4)), np.zeros(3)), Layer(np.zeros((2, 2)), np.zeros(2))])


def test_batch_matches_rows():
    net = random_net()
    x = make_rng(1).normal(size=(7, 4))
    out = net(x)
    for i in range(7):
        assert np.allclose(out[i], net(x[i]), atol=1e-14)


def test_zero_output_grad():
    net = random_net()
    out, tape = forward(net, make_rng(2).normal(size=4))
    grads, gin = backward(net, tape, np.zeros_like(out))
    assert all(not g.any() for g in grads) and not gin.any()


def test_backward_linear_in_output_grad():
    net = random_net()
    out, tape = forward(net, make_rng(3).normal(size=(5, 4)))
    g = make_rng(4).normal(size=out.shape)
    one, _ = backward(net, tape, g)
    two, _ = backward(net, tape, 2 * g)
    for a, b in zip(one, two):
        assert np.allclose(b, 2 * a, rtol=0, atol=1e-14)


def test_backward_does_not_mutate():
    net = random_net()
    before = net.copy()
    out, tape = forward(net, make_rng(5).normal(size=4))
    backward(net, tape, np.ones_like(out))
    assert net == before


def test_tape_mismatch():
    net = random_net()
    _, tape = forward(net, np.zeros(4))
    with pytest.raises(ValueError):
        backward(net, tape[:-1], np.zeros(3))


@pytest.mark.parametrize("seed", range(5))
def test_gradients_match_finite_differences(seed):
    net = random_net(seed)
    rng = make_rng(seed + 50)
    x = rng.normal(size=(6, 4))
    target = rng.normal(size=(6, 3))

    def loss():
        return mse_loss(net(x), target)[0]

    out, tape = forward(net, x)
    grads, _ = backward(net, tape, mse_loss(out, target)[1])
    assert finite_difference_check(loss, net.params(), grads, n_samples=200, rng=rng) < 1e-4


def test_input_gradient_finite_differences():
    net = random_net(9)
    x = make_rng(10).normal(size=4)
    out, tape = forward(net, x)
    _, gin = backward(net, tape, np.ones_like(out))
    h = 1e-6
    for i in range(4):
        e = np.zeros(4)
        e[i] = h
        fd = (net(x + e).sum() - net(x - e).sum()) / (2 * h)
        assert gin[i] == pytest.approx(fd, rel=1e-6)


def test_mse_basics():
    loss, grad = mse_loss([1.0, 0.0], [0.0, 0.0])
    assert loss == 1.0 and list(grad) == [2.0, 0.0]
    loss, grad = mse_loss([0.2, 0.3], [0.2, 0.3])
    assert loss == 0.0 and not grad.any()
    with pytest.raises(ValueError):
        mse_loss([1.0], [1.0, 2.0])


def test_mse_against_summation():
    rng = make_rng(11)
    p, t = rng.normal(size=10), rng.normal(size=10)
    expected = 0.0
    for a, b in zip(p, t):
        expected += (a - b) * (a - b)
    assert mse_loss(p, t)[0] == pytest.approx(expected, abs=1e-12)


def test_adam_zero_gradient():
    p = [np.array([0.7, -1.2])]
    opt = Adam(p)
    opt.step(p, [np.zeros(2)])
    assert list(p[0]) == [0.7, -1.2] and opt.t == 1


def test_adam_first_step():
    p = [np.array([1.0])]
    Adam(p, lr=1e-3).step(p, [np.array([1.0])])
    assert 1.0 - p[0][0] == pytest.approx(1e-3, rel=1e-6)


@pytest.mark.parametrize("lr,expected", [(1e-3, 0.901743598078609), (1e-2, 0.2244460452318788)])
def test_adam_descends_quadratic(lr, expected):
    # expected values from an independent scalar Adam loop
    p = [np.array([1.0])]
    opt = Adam(p, lr=lr)
    for _ in range(100):
        opt.step(p, [2 * p[0]])
    assert p[0][0] == pytest.approx(expected, abs=1e-12)
    if lr >= 1e-2:
        assert abs(p[0][0]) < 0.9


def test_adam_rejects_nonfinite():
    p = [np.array([1.0])]
    with pytest.raises(FloatingPointError):
        Adam(p).step(p, [np.array([np.nan])])


def test_xavier_deterministic_and_bounded():
    a = init_xavier([100, 100], [TANH], make_rng(1))
    b = init_xavier([100, 100], [TANH], make_rng(1))
    assert a == b
    w = a.layers[0].w
    assert np.all(np.abs(w) <= np.sqrt(6 / 200))
    assert abs(w.mean()) < 0.01
    assert not a.layers[0].b.any()


def test_xavier_rejects_zero_width():
    with pytest.raises(ValueError):
        init_xavier([3, 0, 2], [TANH, TANH], make_rng(0))


def test_checkpoint_round_trip(tmp_path):
    net = random_net(3)
    save_mlp(net, tmp_path / "n.capm")
    back = load_mlp(tmp_path / "n.capm")
    assert back == net
    raw = (tmp_path / "n.capm").read_bytes()
    assert raw[:4] == b"CAPM"
    # 12-byte header, per layer 9 bytes + weights + biases
    assert len(raw) == 12 + sum(9 + 8 * (l.w.size + l.b.size) for l in net.layers)


def test_checkpoint_errors(tmp_path):
    net = random_net(3)
    save_mlp(net, tmp_path / "n.capm")
    raw = (tmp_path / "n.capm").read_bytes()
    (tmp_path / "bad.capm").write_bytes(b"XXXX" + raw[4:])
    with pytest.raises(CheckpointFormatError):
        load_mlp(tmp_path / "bad.capm")
    (tmp_path / "short.capm").write_bytes(raw[:-5])
    with pytest.raises(CheckpointFormatError):
        load_mlp(tmp_path / "short.capm")
