"""Principal-component feature space over Gabor weights: the noise model.

``NaturalNoiseModel`` is a scikit-learn style transformer. ``fit`` encodes a
corpus with the wavelet bank, runs PCA on the (images x wavelets) weight
matrix and records per-component score statistics; ``inverse_transform`` maps
score vectors back to images, which is how noise is synthesized.

Two projections exist and differ for images outside the model's image span:

* ``transform`` solves least squares in pixel space against the rendered
  principal components. It is the exact inverse of ``inverse_transform`` on
  its range and yields the optimal K-component representation of arbitrary
  images (the reconstruction-fidelity ceiling).
* ``weight_scores`` goes through the ridge weight encoding (the same route
  corpus images took during ``fit``) and then projects onto the components.
  The recorded score statistics are summaries of this route's corpus scores.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import qr, solve_triangular
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .container import read_container, write_container
from .corpus import Corpus
from .errors import InvalidInput, InvalidK
from .gabor import DEFAULT_ORIENTATIONS, DEFAULT_PHASES, DEFAULT_SCALES, GaborBank, GaborBankSpec, build_bank
from .validation import as_image, as_image_batch, image_hash


class NaturalNoiseModel(BaseEstimator, TransformerMixin):
    """Gabor-encode a corpus, PCA the weights, expose score-space transforms.

    Parameters
    ----------
    n_components : retained principal components K (900 at the full 128px
        scale, 150 is a practical desk-scale choice).
    scales, orientations_deg, phases_deg, bandwidth_octaves,
    orientation_bandwidth_deg : wavelet bank layout, see gabor module.
    ridge_penalty : penalty for weight encoding; None picks the bank default
        1e-4 * trace(G'G) / n_wavelets.
    sampling : "uniform" draws noise scores from the observed per-component
        [min, max] range; "gaussian" from N(0, std_k).

    Fitted models are immutable and safe to share across threads; transforms
    and renderings never write to model state (solver factorizations are
    precomputed during fit).
    """

    def __init__(
        self,
        n_components: int = 900,
        scales=DEFAULT_SCALES,
        orientations_deg=DEFAULT_ORIENTATIONS,
        phases_deg=DEFAULT_PHASES,
        bandwidth_octaves: float = 1.0,
        orientation_bandwidth_deg: float = 41.0,
        ridge_penalty: float | None = None,
        sampling: str = "uniform",
    ):
        self.n_components = n_components
        self.scales = scales
        self.orientations_deg = orientations_deg
        self.phases_deg = phases_deg
        self.bandwidth_octaves = bandwidth_octaves
        self.orientation_bandwidth_deg = orientation_bandwidth_deg
        self.ridge_penalty = ridge_penalty
        self.sampling = sampling

    # ------------------------------------------------------------------ fit

    def fit(self, X, y=None):
        """Fit bank + PCA on a Corpus or an (n, side, side) image stack."""
        if isinstance(X, Corpus):
            X = X.images
        X = as_image_batch(X)
        n, side = X.shape[0], X.shape[1]
        if self.sampling not in ("uniform", "gaussian"):
            raise InvalidInput(f"unknown sampling mode {self.sampling!r}")
        if self.n_components > n:
            raise InvalidK(f"n_components={self.n_components} exceeds corpus size {n}")
        spec = GaborBankSpec(
            side=side,
            scales=tuple(self.scales),
            orientations_deg=tuple(self.orientations_deg),
            phases_deg=tuple(self.phases_deg),
            bandwidth_octaves=self.bandwidth_octaves,
            orientation_bandwidth_deg=self.orientation_bandwidth_deg,
        )
        bank = build_bank(spec)
        if self.n_components > bank.n_wavelets:
            raise InvalidK(
                f"n_components={self.n_components} exceeds wavelet count {bank.n_wavelets}"
            )
        self._install(bank, X.mean(axis=0), X=X)
        return self

    def _install(self, bank: GaborBank, mean_image: np.ndarray, X=None, state: dict | None = None):
        """Set fitted attributes either from corpus images or saved state."""
        self.bank_ = bank
        self.side_ = bank.side
        self.n_wavelets_ = bank.n_wavelets
        self.mean_image_ = mean_image
        if state is None:
            K = int(self.n_components)
            self.ridge_penalty_ = (
                float(self.ridge_penalty) if self.ridge_penalty is not None else bank.default_penalty()
            )
            W = bank.encode(X, penalty=self.ridge_penalty_, mean=self.mean_image_)
            self.weight_mean_ = W.mean(axis=0)
            Wc = W - self.weight_mean_
            _, svals, Vt = np.linalg.svd(Wc, full_matrices=False)
            components = Vt[:K]
            # deterministic sign: the largest-|.| entry of each component is positive
            flip = np.sign(components[np.arange(K), np.argmax(np.abs(components), axis=1)])
            components = components * flip[:, None]
            self.components_ = components.T  # (n_wavelets, K)
            self.scores_ = Wc @ self.components_
            self.explained_variance_ = (svals[:K] ** 2) / max(len(X) - 1, 1)
        else:
            K = state["n_components"]
            self.ridge_penalty_ = state["ridge_penalty"]
            self.weight_mean_ = state["weight_mean"]
            self.components_ = state["components"]
            self.scores_ = state["scores"]
            self.explained_variance_ = state["explained_variance"]
        self.n_components_ = K
        self.score_std_ = self.scores_.std(axis=0, ddof=1)
        self.score_min_ = self.scores_.min(axis=0)
        self.score_max_ = self.scores_.max(axis=0)
        # pixel-space machinery: rendered components and the base image
        self.pixel_components_ = self.bank_.basis @ self.components_  # (pixels, K)
        self.base_image_ = self.mean_image_ + self.bank_.render(self.weight_mean_, mean=0.0)
        q, r = qr(self.pixel_components_, mode="economic")
        self._proj_q, self._proj_r = q, r
        self.model_id_ = image_hash(self.components_)
        return self

    # ----------------------------------------------------------- transforms

    def transform(self, X) -> np.ndarray:
        """Scores of images: least squares onto the component image space."""
        check_is_fitted(self, "components_")
        single = _is_single_image(X, self.side_)
        imgs = as_image_batch(X, side=self.side_)
        flat = imgs.reshape(len(imgs), -1) - self.base_image_.ravel()
        S = solve_triangular(self._proj_r, self._proj_q.T @ flat.T).T
        return S[0] if single else S

    def inverse_transform(self, S) -> np.ndarray:
        """Images for score vectors (not clipped; clip only at export)."""
        check_is_fitted(self, "components_")
        S = np.asarray(S, dtype=np.float64)
        single = S.ndim == 1
        S = np.atleast_2d(S)
        if S.shape[1] != self.n_components_:
            raise InvalidInput(f"expected {self.n_components_} scores, got {S.shape[1]}")
        if not np.all(np.isfinite(S)):
            raise InvalidInput("scores contain non-finite values")
        flat = S @ self.pixel_components_.T + self.base_image_.ravel()
        out = flat.reshape(-1, self.side_, self.side_)
        return out[0] if single else out

    def render_scores(self, scores) -> np.ndarray:
        """Single-vector fast path of inverse_transform (GA hot loop)."""
        return self.base_image_ + (self.pixel_components_ @ scores).reshape(self.side_, self.side_)

    def weight_scores(self, X, penalty: float | None = None) -> np.ndarray:
        """Scores via the ridge weight route: C' (encode(x) - weight_mean).

        Uses the model's fit penalty by default; this is the encoding the
        corpus score statistics were computed from.
        """
        check_is_fitted(self, "components_")
        single = _is_single_image(X, self.side_)
        if penalty is None:
            penalty = self.ridge_penalty_
        W = self.bank_.encode(X, penalty=penalty, mean=self.mean_image_)
        S = (np.atleast_2d(W) - self.weight_mean_) @ self.components_
        return S[0] if single else S

    def truncation_ceiling(self, image) -> float:
        """Correlation of an image with its own best K-component rendering.

        transform() is the least-squares projection onto the model's image
        space, so this is the reconstruction-fidelity ceiling: an evolved
        image can exceed it only through the fixed base-image offset, whose
        centered norm is negligible next to the component span (the mean of
        a large corpus is nearly flat), and in practice never does.
        """
        from .observer import pixel_correlation

        img = as_image(image, side=self.side_)
        return pixel_correlation(self.inverse_transform(self.transform(img)), img)

    # -------------------------------------------------------------- storage

    def save(self, path) -> None:
        check_is_fitted(self, "components_")
        meta = {
            "bank_spec": self.bank_.spec.to_dict(),
            "n_components": int(self.n_components_),
            "ridge_penalty": float(self.ridge_penalty_),
            "sampling": self.sampling,
            "model_id": self.model_id_,
        }
        write_container(
            path,
            "feature-model",
            meta,
            {
                "mean_image": self.mean_image_,
                "weight_mean": self.weight_mean_,
                "components": self.components_,
                "scores": self.scores_,
                "explained_variance": self.explained_variance_,
            },
        )

    @classmethod
    def load(cls, path) -> "NaturalNoiseModel":
        _, meta, arrays = read_container(path, expect_kind="feature-model")
        spec = GaborBankSpec.from_dict(meta["bank_spec"])
        model = cls(
            n_components=meta["n_components"],
            scales=spec.scales,
            orientations_deg=spec.orientations_deg,
            phases_deg=spec.phases_deg,
            bandwidth_octaves=spec.bandwidth_octaves,
            orientation_bandwidth_deg=spec.orientation_bandwidth_deg,
            ridge_penalty=meta["ridge_penalty"],
            sampling=meta["sampling"],
        )
        bank = build_bank(spec)
        model._install(
            bank,
            arrays["mean_image"].reshape(spec.side, spec.side),
            state={
                "n_components": meta["n_components"],
                "ridge_penalty": meta["ridge_penalty"],
                "weight_mean": arrays["weight_mean"],
                "components": arrays["components"],
                "scores": arrays["scores"],
                "explained_variance": arrays["explained_variance"],
            },
        )
        return model


def _is_single_image(X, side: int) -> bool:
    if isinstance(X, (list, tuple)):
        return False
    arr = np.asarray(X)
    return arr.ndim == 2 and arr.shape == (side, side)


def fit_model(corpus, n_components: int, **kwargs) -> NaturalNoiseModel:
    """Convenience wrapper: fit a NaturalNoiseModel on a corpus."""
    model = NaturalNoiseModel(n_components=n_components, **kwargs)
    return model.fit(corpus)


__all__ = ["NaturalNoiseModel", "fit_model"]
