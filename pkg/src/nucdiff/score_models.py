"""Noise-prediction models.

Three implementations of the same interface: an isotropic Gaussian prior
and a Gaussian-mixture prior, both with exact closed-form scores (the
verification instruments), and a small portable MLP denoiser loaded from
a weight file. A model maps a noisy frame x_tau at level tau to the
predicted noise eps_hat; the score of the noisy marginal is
-eps_hat / sigma_tau.

Weight file container: magic b"NDW1", u32 layer count, per layer
u32 in_dim, u32 out_dim, f32 weights row-major (out x in), f32 biases;
after all layers one u8 activation code (0 = relu, 1 = silu).
Little-endian throughout.
"""

import struct

import numpy as np
from scipy.special import expit

from .errors import FormatError, NumericalError, ShapeError

WEIGHT_MAGIC = b"NDW1"

ACTIVATIONS = ("relu", "silu")


def _arr(x):
    return np.asarray(getattr(x, "values", x), dtype=float)


class ScoreModel:
    """Interface: predict_noise plus an optional Jacobian-transpose."""

    supports_jacobian = False

    def predict_noise(self, x_tau, tau, sched):
        raise NotImplementedError

    def jacobian_vector_transpose(self, x_tau, tau, sched, v):
        raise NotImplementedError(
            f"{type(self).__name__} does not provide Jacobian products")


def _check_tau(tau, sched):
    if not (1 <= tau <= sched.total_steps):
        raise ValueError(f"tau={tau} outside [1, {sched.total_steps}]")


def gaussian_predict_noise(prior, x_tau, tau, sched):
    """Exact prediction under an isotropic Gaussian prior N(m, s^2 I).

    The noisy marginal is N(alpha m, (alpha^2 s^2 + sigma^2) I), so the
    score is -(x - alpha m) / vbar and eps_hat = -sigma * score.
    """
    _check_tau(tau, sched)
    x = _arr(x_tau)
    a, s = sched.alpha[tau], sched.sigma[tau]
    vbar = (a * prior.stddev) ** 2 + s ** 2
    return s * (x - a * _arr(prior.mean)) / vbar


class GaussianPrior(ScoreModel):
    supports_jacobian = True

    def __init__(self, mean, stddev):
        if stddev <= 0:
            raise ValueError("stddev must be positive")
        self.mean = _arr(mean)
        self.stddev = float(stddev)

    def predict_noise(self, x_tau, tau, sched):
        return gaussian_predict_noise(self, x_tau, tau, sched)

    def jacobian_vector_transpose(self, x_tau, tau, sched, v):
        # d eps_hat / dx = (sigma / vbar) I, symmetric
        _check_tau(tau, sched)
        a, s = sched.alpha[tau], sched.sigma[tau]
        vbar = (a * self.stddev) ** 2 + s ** 2
        return (s / vbar) * _arr(v)


def _gmm_parts(prior, x, tau, sched):
    """Responsibilities and per-component whitened residuals at x."""
    a, s = sched.alpha[tau], sched.sigma[tau]
    means = prior._means            # (K, n)
    vbar = (a * prior._stds) ** 2 + s ** 2      # (K,)
    diff = x[None, :] - a * means               # (K, n)
    n = x.size
    ll = (np.log(prior._weights) - 0.5 * (diff ** 2).sum(axis=1) / vbar
          - 0.5 * n * np.log(vbar))
    top = ll.max()
    if not np.isfinite(top):
        raise NumericalError("all mixture responsibilities underflowed")
    r = np.exp(ll - top)
    r /= r.sum()
    u = diff / vbar[:, None]                    # (K, n)
    return r, u, vbar, s


def gmm_predict_noise(prior, x_tau, tau, sched):
    """Responsibility-weighted mixture prediction, log-sum-exp stabilized."""
    _check_tau(tau, sched)
    x = _arr(x_tau)
    r, u, vbar, s = _gmm_parts(prior, x, tau, sched)
    return s * (r[:, None] * u).sum(axis=0)


class GmmPrior(ScoreModel):
    """Mixture of isotropic Gaussians over whole frames.

    components: sequence of (weight, mean, stddev) with the weights
    summing to one. Each mean is a full frame vector, so the mixture
    lives in frame space rather than per pixel.
    """

    supports_jacobian = True

    def __init__(self, components):
        components = list(components)
        if not components:
            raise ValueError("need at least one component")
        w = np.array([float(c[0]) for c in components])
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-9:
            raise ValueError(f"weights sum to {w.sum()}, expected 1")
        means = np.stack([_arr(c[1]) for c in components])
        stds = np.array([float(c[2]) for c in components])
        if np.any(stds <= 0):
            raise ValueError("stddevs must be positive")
        self.components = components
        self._weights = w
        self._means = means
        self._stds = stds

    def predict_noise(self, x_tau, tau, sched):
        return gmm_predict_noise(self, x_tau, tau, sched)

    def jacobian_vector_transpose(self, x_tau, tau, sched, v):
        # J = sigma [sum_k r_k / vbar_k I - sum_k r_k u_k u_k^T
        #            + ubar ubar^T], symmetric (Hessian of log marginal)
        _check_tau(tau, sched)
        x, v = _arr(x_tau), _arr(v)
        r, u, vbar, s = _gmm_parts(prior=self, x=x, tau=tau, sched=sched)
        ubar = (r[:, None] * u).sum(axis=0)
        diag = (r / vbar).sum()
        return s * (diag * v - (r * (u @ v)) @ u + ubar * (ubar @ v))


def _silu(z):
    return z * expit(z)


def _silu_grad(z):
    sig = expit(z)
    return sig * (1.0 + z * (1.0 - sig))


class MlpDenoiser(ScoreModel):
    """Small fully connected denoiser with the noise level appended as one
    extra input channel (tau / total_steps). Hidden layers use the stored
    activation, the output layer is linear.
    """

    supports_jacobian = True

    def __init__(self, weights, biases, activation):
        if activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if len(weights) != len(biases) or not weights:
            raise ValueError("need matching, non-empty weight/bias lists")
        dims = [weights[0].shape[1]]
        for i, (W, b) in enumerate(zip(weights, biases)):
            if W.ndim != 2 or b.shape != (W.shape[0],):
                raise ShapeError(f"layer {i}: bad weight/bias shapes")
            if W.shape[1] != dims[-1]:
                raise ShapeError(
                    f"layer {i}: in_dim {W.shape[1]} != previous out "
                    f"{dims[-1]}")
            if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")
            dims.append(W.shape[0])
        self.weights = [np.asarray(W, dtype=float) for W in weights]
        self.biases = [np.asarray(b, dtype=float) for b in biases]
        self.activation = activation
        self.layer_dims = dims

    @property
    def input_size(self):
        # one slot is the time channel
        return self.layer_dims[0] - 1

    def _forward(self, z):
        """Returns (output, pre-activations of hidden layers)."""
        act = _silu if self.activation == "silu" else lambda t: np.maximum(t, 0.0)
        pres = []
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = W @ z + b
            pres.append(z)
            z = act(z)
        z = self.weights[-1] @ z + self.biases[-1]
        return z, pres

    def predict_noise(self, x_tau, tau, sched):
        return mlp_predict_noise(self, x_tau, tau, sched)

    def jacobian_vector_transpose(self, x_tau, tau, sched, v):
        """Hand reverse mode over the cached forward pass; returns the
        pullback restricted to the pixel slots (time channel dropped)."""
        _check_tau(tau, sched)
        x, v = _arr(x_tau), _arr(v)
        z = np.concatenate([x, [tau / sched.total_steps]])
        _, pres = self._forward(z)
        grad = self.weights[-1].T @ v
        dact = _silu_grad if self.activation == "silu" \
            else lambda t: (t > 0).astype(float)
        for W, pre in zip(reversed(self.weights[:-1]), reversed(pres)):
            grad = W.T @ (dact(pre) * grad)
        return grad[:-1]


def mlp_predict_noise(model, x_tau, tau, sched):
    """Feed-forward evaluation with the scalar time channel appended."""
    _check_tau(tau, sched)
    x = _arr(x_tau)
    if x.size != model.input_size:
        raise ShapeError(
            f"input length {x.size} != model size {model.input_size}")
    z = np.concatenate([x, [tau / sched.total_steps]])
    out, _ = model._forward(z)
    return out


def save_weights(path, model):
    """Write an MlpDenoiser in the weight container format."""
    code = ACTIVATIONS.index(model.activation)
    with open(path, "wb") as fh:
        fh.write(WEIGHT_MAGIC)
        fh.write(struct.pack("<I", len(model.weights)))
        for W, b in zip(model.weights, model.biases):
            out_dim, in_dim = W.shape
            fh.write(struct.pack("<II", in_dim, out_dim))
            fh.write(np.ascontiguousarray(W, dtype="<f4").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f4").tobytes())
        fh.write(struct.pack("<B", code))


def load_weights(path):
    """Parse and validate a weight file into an MlpDenoiser."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if blob[:4] != WEIGHT_MAGIC:
        raise FormatError(
            f"bad magic {blob[:4]!r}, expected {WEIGHT_MAGIC!r}",
            byte_offset=0)
    if len(blob) < 8:
        raise FormatError("truncated header", byte_offset=4)
    (count,) = struct.unpack("<I", blob[4:8])
    if count < 1 or count > 1024:
        raise FormatError(f"implausible layer count {count}", byte_offset=4)
    off = 8
    weights, biases = [], []
    prev_out = None
    for i in range(count):
        if len(blob) < off + 8:
            raise FormatError(f"layer {i}: truncated dims", byte_offset=off)
        in_dim, out_dim = struct.unpack("<II", blob[off:off + 8])
        off += 8
        if in_dim == 0 or out_dim == 0 or in_dim * out_dim > 2 ** 26:
            raise FormatError(f"layer {i}: bad dims {in_dim}x{out_dim}",
                              byte_offset=off - 8)
        if prev_out is not None and in_dim != prev_out:
            raise FormatError(
                f"layer {i}: in_dim {in_dim} != previous out {prev_out}",
                byte_offset=off - 8)
        need = 4 * (in_dim * out_dim + out_dim)
        if len(blob) < off + need:
            raise FormatError(f"layer {i}: truncated payload",
                              byte_offset=off)
        W = np.frombuffer(blob, dtype="<f4", offset=off,
                          count=in_dim * out_dim)
        W = W.astype(np.float64).reshape(out_dim, in_dim)
        off += 4 * in_dim * out_dim
        b = np.frombuffer(blob, dtype="<f4", offset=off, count=out_dim)
        b = b.astype(np.float64)
        off += 4 * out_dim
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(b))):
            raise FormatError(f"layer {i}: non-finite weights",
                              byte_offset=off - need)
        weights.append(W)
        biases.append(b)
        prev_out = out_dim
    if len(blob) != off + 1:
        raise FormatError("missing or trailing bytes after layers",
                          byte_offset=off)
    code = blob[off]
    if code >= len(ACTIVATIONS):
        raise FormatError(f"unknown activation code {code}", byte_offset=off)
    return MlpDenoiser(weights, biases, ACTIVATIONS[code])
