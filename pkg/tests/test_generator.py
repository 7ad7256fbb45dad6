import numpy as np
import pytest
import torch

from styleid import container
from styleid.errors import FormatError, InvalidArgumentError
from styleid.generator import ToyGenerator, load_generator, make_backend, register_adapter


def numpy_decoder(g, w):
    """Closed-form toy decoder evaluated straight from the stored tensors."""
    p = {k: v.numpy() * g.GAINS[k] for k, v in g.params.items()}
    st = np.einsum("ld,ldj->lj", w, p["A"]) + p["a0"]
    scale, shift = st[:, 0], st[:, 1]
    logit = np.zeros(g.image_shape)
    for k in range(g.n_layers):
        layer = (1.0 + scale[k]) * p["B"][:, :, k] + shift[k]
        logit += layer[:, :, None] * p["M"][k][None, None, :]
    return 1.0 / (1.0 + np.exp(-logit))


def test_synthesize_deterministic(gen, rng):
    w = rng.standard_normal(gen.latent_shape)
    assert gen.synthesize(w).tobytes() == gen.synthesize(w).tobytes()


def test_zero_latent_gives_base_image(gen):
    w = np.zeros(gen.latent_shape)
    np.testing.assert_allclose(gen.synthesize(w), numpy_decoder(gen, w), rtol=0, atol=1e-12)


def test_matches_closed_form_on_random_latents(gen, rng):
    for _ in range(3):
        w = rng.standard_normal(gen.latent_shape)
        np.testing.assert_allclose(gen.synthesize(w), numpy_decoder(gen, w), rtol=0, atol=1e-12)


def test_perturbing_swap_row_changes_output(gen, rng):
    w = rng.standard_normal(gen.latent_shape)
    dw = np.zeros_like(w)
    dw[7] = 1e-3
    delta = gen.synthesize(w + dw) - gen.synthesize(w)
    assert np.linalg.norm(delta) > 0


def test_shape_mismatch(gen):
    with pytest.raises(InvalidArgumentError):
        gen.synthesize(np.zeros((4, 16)))


def test_output_bounded(gen, rng):
    for scale in (1.0, 10.0, 100.0):
        img = gen.synthesize(scale * rng.standard_normal(gen.latent_shape))
        assert img.shape == (32, 32, 3)
        assert np.all((img >= 0) & (img <= 1))


def _fd_check(f, x, analytic, idx, h=1e-4, rtol=1e-4):
    flat = x.reshape(-1)
    for i in idx:
        old = flat[i]
        flat[i] = old + h
        up = f()
        flat[i] = old - h
        down = f()
        flat[i] = old
        fd = (up - down) / (2 * h)
        if abs(fd) > 1e-6:
            assert abs(analytic.reshape(-1)[i] - fd) <= rtol * abs(fd), (i, analytic.reshape(-1)[i], fd)


def test_gradient_wrt_latent_matches_finite_differences(gen, rng):
    for _ in range(3):
        w = rng.standard_normal(gen.latent_shape)
        c = torch.from_numpy(rng.standard_normal(gen.image_shape))
        wt = torch.from_numpy(w.copy()).requires_grad_(True)
        (grad,) = torch.autograd.grad((gen.forward(wt) * c).mean(), wt)
        f = lambda: float((gen.forward(torch.from_numpy(w)) * c).mean())
        _fd_check(f, w, grad.numpy(), range(w.size))


def test_gradient_wrt_params_matches_finite_differences(rng):
    g = ToyGenerator()
    w = torch.from_numpy(rng.standard_normal(g.latent_shape))
    c = torch.from_numpy(rng.standard_normal(g.image_shape))
    params = g.trainable()
    for p in params:
        p.requires_grad_(True)
    grads = torch.autograd.grad((g.forward(w) * c).mean(), params)
    for p in params:
        p.requires_grad_(False)
    f = lambda: float((g.forward(w) * c).mean())
    for p, gr in zip(params, grads):
        idx = rng.choice(p.numel(), size=min(40, p.numel()), replace=False)
        _fd_check(f, p.numpy(), gr.numpy(), idx)


def test_layer_locality_band_energy(gen, rng):
    w = rng.standard_normal(gen.latent_shape)
    base = gen.logits(torch.from_numpy(w)).numpy()
    B = gen.params["B"].numpy()
    for k in range(gen.n_layers):
        band = np.abs(np.fft.fft2(B[:, :, k])) > 1e-6 * np.abs(np.fft.fft2(B[:, :, k])).max()
        band[0, 0] = True  # the shift term lands on DC
        zeroed = w.copy()
        zeroed[k] = 0.0
        delta = gen.logits(torch.from_numpy(zeroed)).numpy() - base
        for c in range(3):
            energy = np.abs(np.fft.fft2(delta[:, :, c])) ** 2
            assert energy[~band].sum() <= 1e-20 + 1e-12 * energy.sum()


def test_sample_prior(gen):
    a = gen.sample_prior(5)
    assert a.shape == gen.latent_shape
    assert np.array_equal(a, gen.sample_prior(5))
    assert not np.array_equal(a, gen.sample_prior(6))
    assert np.array_equal(a, np.random.default_rng(5).standard_normal((8, 16)))


def test_prior_mean_over_many_seeds(gen):
    n = 10_000
    grand = np.mean([gen.sample_prior(s).mean() for s in range(n)])
    assert abs(grand) < 3.0 / 100


def test_mean_latent(gen):
    assert np.array_equal(gen.mean_latent(1, 9), gen.sample_prior(9))
    m = gen.mean_latent(10_000, 0)
    assert np.all(np.abs(m) < 0.05)
    assert np.array_equal(m, gen.mean_latent(10_000, 0))
    with pytest.raises(InvalidArgumentError):
        gen.mean_latent(0, 0)


def test_generic_mean_latent_path(gen):
    # the base-class loop agrees with the cached toy shortcut
    from styleid.generator import Generator
    np.testing.assert_allclose(Generator.mean_latent(gen, 50, 3), gen.mean_latent(50, 3), atol=1e-15)


def test_clone_isolation(gen, rng):
    w = rng.standard_normal(gen.latent_shape)
    c = gen.clone()
    assert np.array_equal(c.synthesize(w), gen.synthesize(w))
    before = gen.param_vector().copy()
    with torch.no_grad():
        for p in c.trainable():
            p -= 0.1
    assert np.array_equal(gen.param_vector(), before)
    assert not np.array_equal(c.synthesize(w), gen.synthesize(w))
    cc = c.clone()
    assert np.array_equal(cc.param_vector(), c.param_vector())


def test_checkpoint_roundtrip(tmp_path, gen, rng):
    path = tmp_path / "g.sidg"
    gen.save(path)
    raw = path.read_bytes()
    assert raw[:5] == b"SIDG1"
    g2 = load_generator(path)
    w = rng.standard_normal(gen.latent_shape)
    assert np.array_equal(g2.synthesize(w), gen.synthesize(w))
    g2.save(tmp_path / "again.sidg")
    assert (tmp_path / "again.sidg").read_bytes() == raw


def test_checkpoint_header_layout(tmp_path, gen):
    path = tmp_path / "g.sidg"
    gen.save(path)
    c = container.from_bytes(path.read_bytes())
    assert c.arch == "toy"
    assert c.dims == (8, 16, 32, 32, 3)
    assert c.param_count == 32 * 32 * 8 + 8 * 16 * 2 + 8 * 2 + 8 * 3


def test_unknown_arch_and_truncation(tmp_path, gen):
    c = gen.to_container()
    c.arch = "stylegan2-1024"
    path = tmp_path / "x.sidg"
    container.save(path, c)
    with pytest.raises(FormatError):
        load_generator(path)
    register_adapter("stylegan2-1024", lambda cont: ToyGenerator.from_container(
        container.Container("toy", cont.dims, cont.tensors)))
    assert load_generator(path).latent_shape == (8, 16)
    path.write_bytes(path.read_bytes()[:-4])
    with pytest.raises(FormatError):
        load_generator(path)


def test_make_backend(tmp_path, gen):
    assert make_backend("toy").param_vector().tobytes() == gen.param_vector().tobytes()
    gen.save(tmp_path / "g.sidg")
    assert make_backend(f"checkpoint:{tmp_path / 'g.sidg'}").latent_shape == gen.latent_shape
    with pytest.raises(InvalidArgumentError):
        make_backend("stylegan9")
