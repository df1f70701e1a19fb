import numpy as np
import pytest

import noisevolve as nv
from noisevolve.errors import InvalidInput, InvalidK
from noisevolve.featurespace import NaturalNoiseModel
from noisevolve.observer import pixel_correlation


@pytest.fixture(scope="module")
def corpus50():
    return nv.synthesize_test_corpus(50, side=32, seed=21)


@pytest.fixture(scope="module")
def model50(corpus50):
    return NaturalNoiseModel(n_components=30).fit(corpus50)


def test_component_orthonormality(model50):
    C = model50.components_
    gram = C.T @ C
    assert np.abs(gram - np.eye(C.shape[1])).max() < 1e-8


def test_score_variance_matches_eigendecomposition_oracle(corpus50, model50):
    # independent oracle: dense eigendecomposition of the weight covariance
    W = model50.bank_.encode(corpus50.images, penalty=model50.ridge_penalty_,
                             mean=model50.mean_image_)
    cov = np.cov(W.T, ddof=1)
    eigvals = np.linalg.eigvalsh(cov)[::-1]
    score_var = model50.scores_.var(axis=0, ddof=1)
    K = model50.n_components_
    assert np.abs(score_var - eigvals[:K]).max() / eigvals[0] < 1e-9
    rel = np.abs(score_var - eigvals[:K]) / eigvals[:K]
    assert rel.max() < 1e-6


def test_explained_variance_ordering(model50, corpus50):
    ev = model50.explained_variance_
    assert np.all(np.diff(ev) <= 1e-12)
    assert np.all(ev >= -1e-12)
    # recorded stds follow the same ordering
    assert np.all(np.diff(model50.score_std_) <= 1e-9)
    # retained variance cannot exceed the total weight variance
    W = model50.bank_.encode(corpus50.images, penalty=model50.ridge_penalty_,
                             mean=model50.mean_image_)
    total = np.trace(np.cov(W.T, ddof=1))
    assert ev.sum() <= total + 1e-9 * total


def test_project_reconstruct_identity(model50):
    rng = np.random.default_rng(8)
    S = rng.uniform(model50.score_min_, model50.score_max_, size=(16, model50.n_components_))
    back = model50.transform(model50.inverse_transform(S))
    assert np.abs(back - S).max() < 1e-6


def test_full_rank_capture_reconstructs_weights_exactly():
    # corpus whose weight matrix has exact rank 5 (5 distinct images, K=5)
    base = nv.synthesize_test_corpus(5, side=32, seed=31).images
    model = NaturalNoiseModel(n_components=5)
    # duplicate images keep corpus size >= K while the rank stays 5
    stack = np.concatenate([base, base])
    model.fit(stack)
    W = model.bank_.encode(stack, penalty=model.ridge_penalty_, mean=model.mean_image_)
    Wc = W - model.weight_mean_
    recon = (Wc @ model.components_) @ model.components_.T
    assert np.abs(recon - Wc).max() < 1e-8


def test_complete_basis_identity_on_weights():
    # K = wavelet count with a tiny bank: projection loses nothing
    corpus = nv.synthesize_test_corpus(60, side=16, seed=41)
    model = NaturalNoiseModel(n_components=40, scales=(1, 2)).fit(corpus)
    assert model.n_components_ == model.n_wavelets_
    W = model.bank_.encode(corpus.images, penalty=model.ridge_penalty_, mean=model.mean_image_)
    Wc = W - model.weight_mean_
    recon = (Wc @ model.components_) @ model.components_.T
    assert np.abs(recon - Wc).max() < 1e-8


def test_project_mean_image_is_zero(model50):
    scores = model50.transform(model50.mean_image_)
    assert np.all(np.abs(scores) < 1e-4 * np.maximum(model50.score_std_, 1e-6))


def test_fit_time_scores_within_recorded_range(model50):
    assert np.all(model50.scores_ >= model50.score_min_[None, :] - 1e-12)
    assert np.all(model50.scores_ <= model50.score_max_[None, :] + 1e-12)


def test_zero_scores_reconstruct_base_image(model50):
    img = model50.inverse_transform(np.zeros(model50.n_components_))
    assert np.abs(img - model50.base_image_).max() < 1e-10


def test_truncation_dominance_for_corpus_image(corpus50, model50):
    # keeping more components never hurts the pixel correlation, because the
    # projection is nested least squares
    x = corpus50.images[4]
    full = model50.transform(x)
    r_full = pixel_correlation(model50.inverse_transform(full), x)
    for k_prime in (1, 5, 15, 25):
        # re-solve restricted to the first k' components (nested LS, not a
        # zeroed-out full solution)
        D = model50.pixel_components_[:, :k_prime]
        s, *_ = np.linalg.lstsq(D, (x - model50.base_image_).ravel(), rcond=None)
        img = model50.base_image_ + (D @ s).reshape(32, 32)
        assert pixel_correlation(img, x) <= r_full + 1e-9


def test_truncation_ceiling_bounds_random_in_space_image(model50):
    target = nv.synthesize_test_corpus(1, side=32, seed=77).images[0]
    ceiling = model50.truncation_ceiling(target)
    rng = np.random.default_rng(5)
    S = rng.uniform(model50.score_min_, model50.score_max_, size=(200, model50.n_components_))
    imgs = model50.inverse_transform(S)
    corrs = [pixel_correlation(im, target) for im in imgs]
    assert max(corrs) <= ceiling + 1e-9


def test_invalid_k_raises():
    corpus = nv.synthesize_test_corpus(10, side=32, seed=51)
    with pytest.raises(InvalidK):
        NaturalNoiseModel(n_components=11).fit(corpus)


def test_transform_side_mismatch(model50):
    with pytest.raises(InvalidInput):
        model50.transform(np.zeros((16, 16)))


def test_inverse_transform_length_mismatch(model50):
    with pytest.raises(InvalidInput):
        model50.inverse_transform(np.zeros(model50.n_components_ + 3))


def test_save_load_bit_stable_scores(tmp_path, model50, corpus50):
    path = tmp_path / "model.bin"
    model50.save(path)
    loaded = NaturalNoiseModel.load(path)
    x = corpus50.images[7]
    assert np.array_equal(model50.transform(x), loaded.transform(x))
    assert np.array_equal(model50.components_, loaded.components_)
    assert loaded.model_id_ == model50.model_id_


def test_sign_convention_deterministic(corpus50):
    a = NaturalNoiseModel(n_components=10).fit(corpus50)
    b = NaturalNoiseModel(n_components=10).fit(corpus50)
    assert np.array_equal(a.components_, b.components_)
    idx = np.argmax(np.abs(a.components_), axis=0)
    assert np.all(a.components_[idx, np.arange(a.n_components_)] > 0)


def test_sklearn_params_round_trip():
    model = NaturalNoiseModel(n_components=12, sampling="gaussian")
    params = model.get_params()
    clone = NaturalNoiseModel(**params)
    assert clone.n_components == 12
    assert clone.sampling == "gaussian"


def test_weight_scores_route_matches_fit_scores(corpus50, model50):
    # the ridge route reproduces the fit-time corpus scores
    s = model50.weight_scores(corpus50.images[3])
    assert np.abs(s - model50.scores_[3]).max() < 1e-8
