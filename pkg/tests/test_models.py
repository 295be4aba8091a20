import numpy as np
import pytest

from capnet.dataset import Dataset, Sample, ScaleTransform, generate_dataset, split_supervised
from capnet.geometry import CapacitorSpec, GridSpec
from capnet.models import (
    BoundaryNet,
    CoordNet,
    EncDec,
    PinnProblem,
    TrainConfig,
    TrainingDivergenceError,
    _init_boundary,
    _init_coord,
    _init_encdec,
    boundary_forward,
    boundary_loss,
    encdec_loss,
    interior_residual_ms,
    load_models,
    pde_residual,
    pinn_problem,
    save_models,
    train_boundary_decoder,
    train_encdec,
    train_joint,
    train_nn_fixed,
    train_pinn,
)
from capnet.nn import Layer, Mlp, finite_difference_check, make_rng
from capnet.solver import solve_sor

GRID = GridSpec(9, 9)
SMALL = TrainConfig(epochs=300, hidden=16, latent_dim=4, boundary_hidden=8, lr=3e-3, coord_hidden=12, coord_epochs=300)


@pytest.fixture(scope="module")
def corpus():
    ds = generate_dataset(CapacitorSpec(), GRID, np.linspace(0.1, 0.9, 17))
    return split_supervised(ds, 6, seed=0)


def sse(a, b):
    return float(np.sum((np.asarray(a) - np.asarray(b)) ** 2))


def test_zero_epochs_is_initialisation(corpus):
    cfg = TrainConfig(epochs=0, seed=4)
    model, history = train_encdec(corpus, cfg)
    ref = _init_encdec(GRID.n, cfg, make_rng(4))
    assert model.encoder == ref.encoder and model.decoder == ref.decoder
    assert history.size == 0


def test_single_sample_autoencodes():
    ds = generate_dataset(CapacitorSpec(), GRID, [0.5])
    model, history = train_encdec(ds, TrainConfig(epochs=2000, hidden=16, latent_dim=4))
    assert history[-1] < 0.01 * history[0]


def test_history_mostly_decreasing(corpus):
    _, history = train_encdec(corpus, TrainConfig(epochs=500, hidden=16, latent_dim=4))
    assert np.mean(np.diff(history) < 0) >= 0.9
    assert history[-1] <= history[0]


def test_encdec_deterministic(corpus):
    a, ha = train_encdec(corpus, SMALL)
    b, hb = train_encdec(corpus, SMALL)
    assert a.encoder == b.encoder and a.decoder == b.decoder
    assert ha.tobytes() == hb.tobytes()


def test_divergence_reports_epoch():
    grid = GridSpec(3, 3)
    from capnet.solver import Field

    bad = Dataset(grid, [Sample(0.5, Field(grid, np.full(9, np.nan)))])
    with pytest.raises(TrainingDivergenceError) as err:
        train_encdec(bad, TrainConfig(epochs=3, hidden=4, latent_dim=2))
    assert err.value.epoch == 0


def test_zero_boundary_network_outputs_zero():
    z = 4
    bnet = BoundaryNet(Mlp([Layer(np.zeros((3, 1)), np.zeros(3)), Layer(np.zeros((z, 3)), np.zeros(z))]))
    dec = Mlp([Layer(np.zeros((5, z)), np.zeros(5)), Layer(np.zeros((GRID.n, 5)), np.zeros(GRID.n))])
    for d in (0.1, 0.5, 1.3):
        out = boundary_forward(bnet, dec, d)
        assert out.shape == (GRID.n,) and not out.any()


def test_boundary_forward_batch_shape(corpus):
    rng = make_rng(0)
    model = _init_encdec(GRID.n, SMALL, rng)
    bnet = _init_boundary(SMALL, rng)
    assert boundary_forward(bnet, model.decoder, [0.2, 0.4, 0.6]).shape == (3, GRID.n)
    out = boundary_forward(bnet, model.decoder, 0.4)
    assert np.all(np.abs(out) < 1)


def test_lambda_zero_matches_encdec(corpus):
    cfg = TrainConfig(epochs=150, hidden=16, latent_dim=4, lam=0.0, seed=5)
    ref, href = train_encdec(corpus, cfg)
    model, _, hist = train_joint(corpus, cfg)
    assert model.encoder == ref.encoder and model.decoder == ref.decoder
    assert hist.tobytes() == href.tobytes()


def test_joint_needs_supervision(corpus):
    unlabeled = split_supervised(corpus, 0, seed=0)
    with pytest.raises(ValueError):
        train_joint(unlabeled, SMALL)
    train_joint(unlabeled, TrainConfig(epochs=2, lam=0.0, hidden=4, latent_dim=2))


def test_joint_training_improves_boundary_prediction(corpus):
    cfg = TrainConfig(epochs=1500, hidden=16, latent_dim=4, boundary_hidden=8, lr=3e-3)
    truth = solve_sor(CapacitorSpec(d=0.5), GRID)[0].values
    unscale = ScaleTransform(cfg.scale).invert
    rng = make_rng(cfg.seed)
    init_model = _init_encdec(GRID.n, cfg, rng)
    init_bnet = _init_boundary(cfg, rng)
    before = sse(unscale(boundary_forward(init_bnet, init_model.decoder, 0.5)), truth)
    model, bnet, _ = train_joint(corpus, cfg)
    after = sse(unscale(boundary_forward(bnet, model.decoder, 0.5)), truth)
    assert after * 10 <= before
    # the trained map depends on d
    assert sse(boundary_forward(bnet, model.decoder, 0.3), boundary_forward(bnet, model.decoder, 0.7)) > 1e-3


def test_boundary_decoder_leaves_encoder_untouched(corpus):
    model, _, _ = train_boundary_decoder(corpus, SMALL)
    ref = _init_encdec(GRID.n, SMALL, make_rng(SMALL.seed))
    assert model.encoder == ref.encoder
    assert model.decoder != ref.decoder


def test_boundary_linear_flag():
    bnet = _init_boundary(TrainConfig(boundary_linear=True), make_rng(0))
    assert [l.activation for l in bnet.net.layers] == ["identity", "identity"]
    with pytest.raises(ValueError):
        BoundaryNet(Mlp([Layer(np.zeros((2, 2)), np.zeros(2))]))


# --- gradient integrity of every trained architecture ---


def test_encoder_decoder_gradients(corpus):
    cfg = TrainConfig(hidden=6, latent_dim=3)
    model = _init_encdec(GRID.n, cfg, make_rng(1))
    x = ScaleTransform().apply(corpus.fields[:4])
    _, grads = encdec_loss(model, x)
    params = model.encoder.params() + model.decoder.params()
    err = finite_difference_check(lambda: encdec_loss(model, x)[0], params, grads, 150, make_rng(2))
    assert err < 1e-4


def test_boundary_chain_gradients(corpus):
    cfg = TrainConfig(hidden=6, latent_dim=3, boundary_hidden=5)
    rng = make_rng(3)
    model = _init_encdec(GRID.n, cfg, rng)
    bnet = _init_boundary(cfg, rng)
    d = corpus.d_values[:5]
    x = ScaleTransform().apply(corpus.fields[:5])
    _, grads = boundary_loss(bnet, model.decoder, d, x)
    params = bnet.net.params() + model.decoder.params()
    err = finite_difference_check(lambda: boundary_loss(bnet, model.decoder, d, x)[0], params, grads, 150, make_rng(4))
    assert err < 1e-4


@pytest.mark.parametrize("mu,nu", [(0.0, 0.0), (1.0, 0.0), (1.0, 1.0)])
def test_coordinate_net_gradients(mu, nu):
    spec = CapacitorSpec(d=0.55)
    truth = solve_sor(spec, GRID)[0].values
    problem = pinn_problem(spec, GRID, truth)
    net = _init_coord(TrainConfig(coord_hidden=8, seed=6))
    _, grads = problem.loss(net, mu, nu)
    err = finite_difference_check(lambda: problem.loss(net, mu, nu)[0], net.params(), grads, 150, make_rng(7))
    assert err < 1e-4


# --- coordinate networks ---


def test_pde_residual_quadratics():
    pts = make_rng(0).uniform(0.2, 0.8, size=(20, 2))
    assert np.allclose(pde_residual(lambda x, y: x**2 - y**2, pts, 0.05), 0.0, atol=1e-9)
    assert np.allclose(pde_residual(lambda x, y: x**2 + y**2, pts, 0.05), 4.0, atol=1e-9)


def test_pde_residual_margin():
    with pytest.raises(ValueError):
        pde_residual(lambda x, y: x, [[0.01, 0.5]], 0.05)
    with pytest.raises(ValueError):
        pde_residual(lambda x, y: x, [[0.5, 0.99]], 0.05)
    pde_residual(lambda x, y: x, [[0.05, 0.95]], 0.05)


def test_nn_fit_and_d_independence():
    spec = CapacitorSpec()
    cfg = TrainConfig(coord_epochs=1500, coord_lr=3e-3, coord_hidden=16)
    model, history = train_nn_fixed(spec, GRID, 0.55, cfg)
    truth = solve_sor(spec.with_d(0.55), GRID)[0].values
    assert history[-1] < 0.05 * history[0]
    assert sse(model.predict(GRID), truth) < 0.5
    assert model.trained_d == 0.55
    x, y = GRID.coordinates().T
    assert np.allclose(model(x, y), model.predict(GRID))


def test_pinn_without_physics_is_plain_nn():
    spec = CapacitorSpec()
    cfg = TrainConfig(coord_epochs=200, pinn_mu=0.0, neumann_weight=0.0, coord_hidden=8)
    nn, hn = train_nn_fixed(spec, GRID, 0.55, cfg)
    pinn, hp = train_pinn(spec, GRID, 0.55, cfg, supervise_all=True)
    assert nn.net == pinn.net
    assert hn.tobytes() == hp.tobytes()


def test_pinn_reduces_residual():
    spec = CapacitorSpec()
    cfg = TrainConfig(coord_epochs=1500, coord_lr=3e-3, coord_hidden=16)
    pinn, _ = train_pinn(spec, GRID, 0.55, cfg)
    init = CoordNet(_init_coord(cfg), 0.55)
    assert interior_residual_ms(pinn, spec, GRID) * 10 <= interior_residual_ms(init, spec, GRID)


def test_pinn_problem_point_sets():
    spec = CapacitorSpec(d=0.5)
    p = pinn_problem(spec, GRID, np.zeros(GRID.n))
    assert len(p.data_points) == 3 + 17
    assert len(p.collocation) == 49
    assert len(p.neumann_x) == 7 and len(p.neumann_y) == 5
    assert len(pinn_problem(spec, GRID, np.zeros(GRID.n), supervise_all=True).data_points) == GRID.n


def test_checkpoints_round_trip(corpus, tmp_path):
    model, bnet, _ = train_joint(corpus, TrainConfig(epochs=5, hidden=6, latent_dim=3))
    manifest = save_models(tmp_path / "joint", encoder=model.encoder, decoder=model.decoder, boundary=bnet.net)
    loaded = load_models(manifest.parent)
    assert set(loaded) == {"encoder", "decoder", "boundary"}
    assert loaded["decoder"] == model.decoder and loaded["boundary"] == bnet.net
    first = {p.name: p.read_bytes() for p in manifest.parent.iterdir()}
    save_models(tmp_path / "again", encoder=model.encoder, decoder=model.decoder, boundary=bnet.net)
    assert first == {p.name: p.read_bytes() for p in (tmp_path / "again").iterdir()}
