"""Pure numpy implementations of the numeric kernels.

These mirror ``asd._core`` exactly and are used when the compiled
extension is unavailable (or when ``ASD_PURE_PYTHON=1``).
"""
import numpy as np


def reflect_index(idx, n):
    """Map arbitrary integer indices into ``[0, n)`` by mirror reflection
    without edge repetition (``np.pad(mode="reflect")`` semantics)."""
    idx = np.asarray(idx, dtype=np.int64)
    if n == 1:
        return np.zeros_like(idx)
    period = 2 * (n - 1)
    r = np.mod(idx, period)
    return np.where(r < n, r, period - r)


def _axis_weights(n_in, n_out):
    ratio = n_in / n_out
    src = (np.arange(n_out, dtype=np.float64) + 0.5) * ratio - 0.5
    src = np.clip(src, 0.0, n_in - 1)
    lo = np.floor(src).astype(np.int64)
    hi = np.minimum(lo + 1, n_in - 1)
    frac = src - lo
    return lo, hi, frac


def bilinear_resize(img, out_h, out_w):
    """Half-pixel aligned bilinear resampling of an ``H x W x B`` array."""
    img = np.ascontiguousarray(img, dtype=np.float64)
    h, w, _ = img.shape
    if out_h == h and out_w == w:
        return img.copy()
    r0, r1, fr = _axis_weights(h, out_h)
    c0, c1, fc = _axis_weights(w, out_w)
    fr = fr[:, None, None]
    fc = fc[None, :, None]
    top = img[r0][:, c0] * (1.0 - fc) + img[r0][:, c1] * fc
    bot = img[r1][:, c0] * (1.0 - fc) + img[r1][:, c1] * fc
    return top * (1.0 - fr) + bot * fr


def gather_patches(img, rows, cols, patch):
    """Cut ``patch x patch`` windows centred on ``(rows[k], cols[k])``.

    Returns an ``N x P x P x B`` array; out-of-range samples are reflected.
    """
    img = np.ascontiguousarray(img, dtype=np.float64)
    h, w, _ = img.shape
    half = patch // 2
    offs = np.arange(patch, dtype=np.int64) - half
    rr = reflect_index(np.asarray(rows, dtype=np.int64)[:, None] + offs[None, :], h)
    cc = reflect_index(np.asarray(cols, dtype=np.int64)[:, None] + offs[None, :], w)
    return img[rr[:, :, None], cc[:, None, :]]


def mahalanobis_batch(x, mean, inv_cov):
    """Row-wise ``sqrt((x - mean)^T inv_cov (x - mean))``."""
    d = np.asarray(x, dtype=np.float64) - np.asarray(mean, dtype=np.float64)
    s = np.asarray(inv_cov, dtype=np.float64)
    # Same accumulation order as the compiled loop, so results match bitwise.
    q = np.zeros(d.shape[0])
    for i in range(d.shape[1]):
        row = np.zeros(d.shape[0])
        for j in range(d.shape[1]):
            row = row + s[i, j] * d[:, j]
        q = q + d[:, i] * row
    return np.where(q > 0.0, np.sqrt(np.maximum(q, 0.0)), 0.0)


def roc_counts(degrees, labels):
    """Cumulative (tp, fp, threshold) per distinct degree, descending.

    ``degrees`` must already be sorted in descending order with ``labels``
    permuted alongside.
    """
    degrees = np.asarray(degrees, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = degrees.shape[0]
    if n == 0:
        return np.zeros(0, np.int64), np.zeros(0, np.int64), np.zeros(0)
    tp = np.cumsum(labels)
    fp = np.cumsum(1 - labels)
    last = np.r_[np.flatnonzero(degrees[1:] != degrees[:-1]), n - 1]
    return tp[last].astype(np.int64), fp[last].astype(np.int64), degrees[last].copy()
