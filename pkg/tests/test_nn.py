import numpy as np
import pytest

from cfxl.errors import NumericalError
from cfxl.nn import Adam, Mlp, Sgd, clip_by_global_norm, load_checkpoint, save_checkpoint, soft_update


def _loss(net, x, w):
    return float(np.sum(net(x) * w))


@pytest.mark.parametrize("out_act", ["linear", "tanh"])
def test_backward_matches_finite_differences(out_act):
    rng = np.random.default_rng(0)
    net = Mlp(5, [7, 6], 3, out_act, rng)
    x = rng.standard_normal((4, 5))
    w = rng.standard_normal((4, 3))
    net(x, keep=True)
    grads, gx = net.backward(w)
    h = 1e-6
    for p, g in zip(net.params, grads):
        for idx in list(np.ndindex(p.shape))[:6]:
            old = p[idx]
            p[idx] = old + h
            up = _loss(net, x, w)
            p[idx] = old - h
            dn = _loss(net, x, w)
            p[idx] = old
            assert abs((up - dn) / (2 * h) - g[idx]) < 1e-6 * max(1.0, abs(g[idx]))
    for idx in np.ndindex(x.shape):
        xp, xm = x.copy(), x.copy()
        xp[idx] += h
        xm[idx] -= h
        assert abs((_loss(net, xp, w) - _loss(net, xm, w)) / (2 * h) - gx[idx]) < 1e-6


def test_backward_without_forward_raises():
    net = Mlp(2, [3], 1, rng=np.random.default_rng(0))
    with pytest.raises(RuntimeError):
        net.backward(np.ones(1))
    net(np.ones(2), keep=True)
    net.backward(np.ones(1))
    with pytest.raises(RuntimeError):
        net.backward(np.ones(1))


def test_tanh_outputs_bounded():
    net = Mlp(3, [8], 4, "tanh", np.random.default_rng(1))
    y = net(np.random.default_rng(2).standard_normal((50, 3)) * 100)
    assert np.all(np.abs(y) <= 1)


def test_bad_widths_and_inputs():
    with pytest.raises(ValueError):
        Mlp(0, [3], 1)
    with pytest.raises(ValueError):
        Mlp(2, [3], 1, "softmax")
    with pytest.raises(ValueError):
        Mlp(2, [3], 1)(np.ones(3))


def test_clip_by_global_norm():
    g = [np.array([3.0]), np.array([4.0])]
    clipped, norm = clip_by_global_norm(g, 1.0)
    assert norm == pytest.approx(5.0)
    assert np.sqrt(sum(float(c @ c) for c in clipped)) == pytest.approx(1.0)
    same, _ = clip_by_global_norm(g, 10.0)
    assert same[0][0] == 3.0
    with pytest.raises(NumericalError):
        clip_by_global_norm([np.array([np.nan])], 1.0)


@pytest.mark.parametrize("opt", [Adam(lr=1e-2, clip=None), Sgd(lr=0.05, clip=None)])
def test_optimizer_descends_quadratic_bowl(opt):
    rng = np.random.default_rng(3)
    net = Mlp(2, [], 1, "linear", rng)
    x = rng.standard_normal((64, 2))
    y = x @ np.array([[1.5], [-2.0]]) + 0.3
    losses = []
    for _ in range(400):
        err = net(x, keep=True) - y
        losses.append(float(np.mean(err ** 2)))
        grads, _ = net.backward(2 * err / len(x))
        opt.apply(net, grads)
    assert losses[-1] < 1e-3 * losses[0]


def test_soft_update_interpolates():
    rng = np.random.default_rng(4)
    src = Mlp(3, [4], 2, rng=rng)
    tgt = Mlp(3, [4], 2, rng=rng)
    before = [p.copy() for p in tgt.params]
    soft_update(tgt, src, 0.25)
    for pb, pt, ps in zip(before, tgt.params, src.params):
        np.testing.assert_allclose(pt, 0.25 * ps + 0.75 * pb, rtol=1e-14)
    soft_update(tgt, src, 1.0)
    for pt, ps in zip(tgt.params, src.params):
        np.testing.assert_array_equal(pt, ps)
    with pytest.raises(ValueError):
        soft_update(tgt, src, 1.5)


def test_soft_update_geometric_drift():
    rng = np.random.default_rng(5)
    src = Mlp(2, [3], 1, rng=rng)
    tgt = Mlp(2, [3], 1, rng=rng)
    d0 = [pt - ps for pt, ps in zip(tgt.params, src.params)]
    tau, n = 0.01, 50
    for _ in range(n):
        soft_update(tgt, src, tau)
    for d, pt, ps in zip(d0, tgt.params, src.params):
        np.testing.assert_allclose(pt - ps, (1 - tau) ** n * d, rtol=1e-10, atol=1e-15)


def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(6)
    nets = {"actor": Mlp(3, [5], 2, "tanh", rng), "critic": Mlp(4, [5, 3], 1, rng=rng)}
    path = tmp_path / "ck.npz"
    save_checkpoint(path, nets, {"episode": 7})
    back = load_checkpoint(path)
    x = rng.standard_normal((6, 3))
    np.testing.assert_array_equal(back["actor"](x), nets["actor"](x))
    assert back["critic"].sizes == [4, 5, 3, 1]


def test_checkpoint_version_rejected(tmp_path):
    path = tmp_path / "bad.npz"
    np.savez(path, version=np.array(99))
    with pytest.raises(ValueError):
        load_checkpoint(path)


def test_init_deterministic():
    a = Mlp(4, [8], 2, rng=np.random.default_rng(9))
    b = Mlp(4, [8], 2, rng=np.random.default_rng(9))
    for pa, pb in zip(a.params, b.params):
        np.testing.assert_array_equal(pa, pb)
    c = a.copy()
    c.params[0][0, 0] += 1
    assert a.params[0][0, 0] != c.params[0][0, 0]
