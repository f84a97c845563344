"""scikit-learn style estimators wrapping the functional pipeline.

``NrcEstimator`` is fitted on the two reference captures and predicts the
haze level of further captures of the same scene::

    est = NrcEstimator(dark_threshold=0.3).fit([I1, I2])
    est.predict([It])          # -> array([gamma_dot])
    est.report(It)             # -> full NrcReport

``SlicSegmenter`` exposes superpixel segmentation as a clusterer.
"""
import numpy as np
from sklearn.base import BaseEstimator, ClusterMixin, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .align import estimate_nrc_matched, global_align, identity_match, match_superpixels
from .dcp import DarkChannelParams, estimate_airlight
from .nrc import NrcParams, ReferenceSet, estimate_nrc
from .superpixel import SlicParams, segment
from .validation import check_airlight, check_image


def check_image_batch(X):
    """Accept one (H, W, 3) image or a sequence / (N, H, W, 3) array of them."""
    if isinstance(X, np.ndarray) and X.ndim == 3:
        return [check_image(X)]
    images = [check_image(x, f"X[{i}]") for i, x in enumerate(X)]
    if not images:
        raise ValueError("no images given")
    return images


class SlicSegmenter(ClusterMixin, BaseEstimator):
    """SLIC superpixels; ``fit(img)`` sets ``labels_`` and ``labeling_``."""

    def __init__(self, n_segments=400, compactness=10.0, max_iter=10, color_space="lab"):
        self.n_segments = n_segments
        self.compactness = compactness
        self.max_iter = max_iter
        self.color_space = color_space

    def _params(self):
        return SlicParams(self.n_segments, self.compactness, self.max_iter, self.color_space)

    def fit(self, X, y=None):
        self.labeling_ = segment(X, self._params())
        self.labels_ = self.labeling_.labels
        self.n_segments_ = self.labeling_.n_sp
        return self


class NrcEstimator(RegressorMixin, BaseEstimator):
    """Haze density (NRC) of captures relative to two reference captures.

    Parameters mirror the command-line flags. With ``align=True`` every test
    capture is first registered to the lighter reference (integer shift) and
    only matched superpixels contribute.
    """

    def __init__(self, dark_threshold=0.3, patch_radius=7, airlight_top_fraction=0.001,
                 sp_count=400, compactness=10.0, max_iter=10, color_space="lab",
                 eps_num=1.0 / 255.0, eps_log=1e-3, clamp=True,
                 align=False, max_shift=32, max_centroid_dist=None, max_color_dist=0.15):
        self.dark_threshold = dark_threshold
        self.patch_radius = patch_radius
        self.airlight_top_fraction = airlight_top_fraction
        self.sp_count = sp_count
        self.compactness = compactness
        self.max_iter = max_iter
        self.color_space = color_space
        self.eps_num = eps_num
        self.eps_log = eps_log
        self.clamp = clamp
        self.align = align
        self.max_shift = max_shift
        self.max_centroid_dist = max_centroid_dist
        self.max_color_dist = max_color_dist

    @property
    def nrc_params_(self):
        return NrcParams(self.dark_threshold, self.eps_num, self.eps_log, self.clamp)

    @property
    def dc_params_(self):
        return DarkChannelParams(self.patch_radius)

    def _slic_params(self):
        return SlicParams(self.sp_count, self.compactness, self.max_iter, self.color_space)

    def estimate_airlight(self, img):
        return estimate_airlight(img, self.dc_params_, self.airlight_top_fraction)

    def fit(self, X, y=None, airlights=None):
        """Fit on ``X = [I1, I2]``, the lighter reference first.

        ``airlights`` optionally gives ``(A1, A2)``; otherwise both are
        estimated from the dark channel.
        """
        images = check_image_batch(X)
        if len(images) != 2:
            raise ValueError(f"expected exactly two reference images, got {len(images)}")
        I1, I2 = images
        if airlights is None:
            A1, A2 = self.estimate_airlight(I1), self.estimate_airlight(I2)
        else:
            A1, A2 = (check_airlight(a) for a in airlights)
        self.references_ = ReferenceSet(I1, A1, I2, A2)
        self.airlights_ = np.vstack([A1, A2])
        self.labeling_ = segment(I1, self._slic_params())
        return self

    def report(self, It, At=None):
        """Full :class:`NrcReport` for a single capture."""
        check_is_fitted(self, "references_")
        It = check_image(It, "It")
        At = self.estimate_airlight(It) if At is None else check_airlight(At)
        if not self.align:
            return estimate_nrc(self.references_, It, At, self.labeling_, self.nrc_params_, self.dc_params_)
        shift = global_align(self.references_.I1, It, self.max_shift)
        if shift == (0, 0):
            # a stationary camera keeps the reference superpixels
            test_labeling = self.labeling_
            match = identity_match(test_labeling)
        else:
            test_labeling = segment(It, self._slic_params(), offset=shift)
            cap = self.max_centroid_dist or 2.0 * self.labeling_.grid_spacing()
            match = match_superpixels(self.labeling_, test_labeling, shift, cap, self.max_color_dist)
        report = estimate_nrc_matched(self.references_, It, At, match, test_labeling, shift,
                                      self.nrc_params_, self.dc_params_)
        report.diagnostics["shift_dx"], report.diagnostics["shift_dy"] = shift
        return report

    def predict(self, X, airlights=None):
        """Whole-image NRC for each capture in ``X``."""
        images = check_image_batch(X)
        if airlights is None:
            airlights = [None] * len(images)
        if len(airlights) != len(images):
            raise ValueError("need one airlight per image")
        return np.array([self.report(img, a).gamma_dot for img, a in zip(images, airlights)])
