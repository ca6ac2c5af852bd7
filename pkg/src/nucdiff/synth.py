"""Synthetic structured-noise video with planted ground truth.

Every sequence is built as observed = background + foreground + noise,
where the background is an exactly rank-r product of smooth spatial
bumps and slowly drifting temporal gains, and the foreground comes from
one of three generators: scattered sparse outliers, a temporally
correlated Gaussian field, or smooth elliptical blobs whose layout is
drawn from a small mixture and translated from frame to frame.

The blob foreground is the interesting one: its per-frame mean is a
rendered layout at a frame-dependent horizontal shift, so the exact
frame-level mixture prior over those means can be handed straight to the
score model classes. Displacement alternates between zero and
motion_level * frame_width on even/odd frames, which keeps the column
space of the foreground small (two shifts per layout) while still moving
every blob by the full displacement between consecutive frames.

Motion affects the other two kinds through temporal churn: the Gaussian
field follows an AR(1) recursion whose decorrelation rate equals
motion_level, and sparse sites are resampled with probability
motion_level per frame. Both make the mean inter-frame MSE exactly
proportional to motion_level, so sweeps are monotone by construction.
Pure translation cannot provide that over a full sweep: once the shift
exceeds the blob diameter the frame-to-frame correlation bottoms out,
and on a wrapped grid it is symmetric about half the frame width, so the
measured PSNR of the blob kind flattens at high motion instead of
falling further.
"""

from __future__ import annotations

import dataclasses
import json
import os

import numpy as np

from .errors import ShapeError
from .tensors import CasoratiMatrix, RoiMask, write_tensor

FOREGROUND_KINDS = ("sparse", "gaussian", "gmm-blobs")

# Per-kind foreground_params defaults. Unknown keys are rejected so a
# typo in a config file fails loudly instead of silently using defaults.
_SPARSE_DEFAULTS = {
    "density": 0.05,
    "amplitude": 2.0,
}
_GAUSSIAN_DEFAULTS = {
    "mean": 0.0,
    "stddev": 0.5,
}
_BLOB_DEFAULTS = {
    "num_layouts": 2,
    "blobs_per_layout": 14,
    "radius_min": 2.5,
    "radius_max": 4.5,
    "profile_sharpness": 3,
    "component_stddev": 0.12,
    # two-sided amplitude mixture; every component is far from zero so
    # blobs never fade into the background
    "amplitude_weights": (0.5, 0.5),
    "amplitude_means": (2.0, -2.0),
    "amplitude_stddevs": (0.1 ** 0.5, 0.1 ** 0.5),
}

_KIND_DEFAULTS = {
    "sparse": _SPARSE_DEFAULTS,
    "gaussian": _GAUSSIAN_DEFAULTS,
    "gmm-blobs": _BLOB_DEFAULTS,
}


@dataclasses.dataclass(frozen=True)
class SynthSpec:
    frame_height: int = 32
    frame_width: int = 32
    num_frames: int = 7
    background_rank: int = 2
    background_amplitude: float = 0.35
    foreground_kind: str = "gmm-blobs"
    foreground_params: dict | None = None
    motion_level: float = 0.1
    observation_noise_std: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.frame_height < 1 or self.frame_width < 1:
            raise ValueError("frame dimensions must be positive")
        if self.num_frames < 1:
            raise ValueError("num_frames must be positive")
        if self.background_rank < 0:
            raise ValueError("background_rank must be nonnegative")
        n = self.frame_height * self.frame_width
        if self.background_rank > min(n, self.num_frames):
            raise ValueError(
                f"background_rank {self.background_rank} exceeds "
                f"min(pixels, frames) = {min(n, self.num_frames)}")
        if not 0.0 <= self.motion_level <= 1.0:
            raise ValueError("motion_level must lie in [0, 1]")
        if self.observation_noise_std < 0:
            raise ValueError("observation_noise_std must be nonnegative")
        if self.background_amplitude < 0:
            raise ValueError("background_amplitude must be nonnegative")
        if self.foreground_kind not in FOREGROUND_KINDS:
            raise ValueError(
                f"unknown foreground_kind {self.foreground_kind!r}")
        self.resolved_params()

    def resolved_params(self):
        """Kind defaults overlaid with any user-supplied entries."""
        defaults = _KIND_DEFAULTS[self.foreground_kind]
        params = dict(defaults)
        if self.foreground_params:
            unknown = set(self.foreground_params) - set(defaults)
            if unknown:
                raise ValueError(
                    f"unknown foreground_params for {self.foreground_kind}: "
                    f"{sorted(unknown)}")
            params.update(self.foreground_params)
        return params


@dataclasses.dataclass
class SynthInstance:
    observed: CasoratiMatrix
    background: CasoratiMatrix
    foreground: CasoratiMatrix
    masks: dict  # "ventricle" (empty region), "septum" (frame-0 support)


def _render_layout(rng, params, height, width):
    """Blob geometry for one layout: centers, radii, angle, amplitude."""
    nb = params["blobs_per_layout"]
    weights = np.asarray(params["amplitude_weights"], dtype=float)
    amp_means = np.asarray(params["amplitude_means"], dtype=float)
    amp_stds = np.asarray(params["amplitude_stddevs"], dtype=float)
    comp = rng.choice(len(weights), size=nb, p=weights / weights.sum())
    amp = amp_means[comp] + amp_stds[comp] * rng.standard_normal(nb)
    geoms = []
    for b in range(nb):
        cy, cx = rng.uniform(4, height - 4), rng.uniform(4, width - 4)
        ry, rx = rng.uniform(params["radius_min"], params["radius_max"], 2)
        th = rng.uniform(0, np.pi)
        geoms.append((cy, cx, ry, rx, th, amp[b]))
    return geoms


def _render_frame(geoms, height, width, dy, dx, sharp):
    """Render a layout at displacement (dy, dx) with wraparound.

    Returns the flat frame and the support mask (profile above half
    maximum for any blob).
    """
    yy, xx = np.mgrid[0:height, 0:width]
    frame = np.zeros(height * width)
    supp = np.zeros(height * width, dtype=bool)
    for cy, cx, ry, rx, th, a in geoms:
        byy = (yy - (cy + dy) + height / 2) % height - height / 2
        bxx = (xx - (cx + dx) + width / 2) % width - width / 2
        xr = np.cos(th) * bxx + np.sin(th) * byy
        yr = -np.sin(th) * bxx + np.cos(th) * byy
        q = (xr / rx) ** 2 + (yr / ry) ** 2
        prof = np.exp(-q ** sharp)
        frame += a * prof.ravel()
        supp |= prof.ravel() > 0.5
    return frame, supp


def _background(rng, spec):
    """Exactly rank-r product of spatial Gaussian bumps and drifting gains."""
    h, w, p = spec.frame_height, spec.frame_width, spec.num_frames
    r = spec.background_rank
    n = h * w
    yy, xx = np.mgrid[0:h, 0:w]
    U = np.zeros((n, r))
    for i in range(r):
        cy, cx = rng.uniform(6, h - 6, 2)
        sy, sx = rng.uniform(6, 14, 2)
        U[:, i] = np.exp(-(((yy - cy) / sy) ** 2 + ((xx - cx) / sx) ** 2)).ravel()
    V = np.zeros((p, r))
    t = np.arange(p)
    for i in range(r):
        V[:, i] = 1.0 + 0.3 * np.sin(
            2 * np.pi * (i + 1) * t / (2 * p) + rng.uniform(0, 2 * np.pi))
    L = U @ V.T
    rms = np.sqrt(np.mean(L ** 2))
    if rms > 0:
        L *= spec.background_amplitude / rms
    return L


def _foreground_blobs(rng, spec, params):
    """Layout mixture with alternating horizontal displacement.

    Returns (X, frame0 support mask, mixture components). Component
    means are every layout rendered at every frame's shift, so the
    returned mixture is the exact per-frame prior for X's columns.
    """
    h, w, p = spec.frame_height, spec.frame_width, spec.num_frames
    n = h * w
    K = params["num_layouts"]
    sharp = params["profile_sharpness"]
    comp_std = params["component_stddev"]
    layouts = [_render_layout(rng, params, h, w) for _ in range(K)]
    dxf = spec.motion_level * w
    phase = np.arange(p) % 2
    means = np.zeros((K, p, n))
    for l in range(K):
        for tt in range(p):
            means[l, tt], _ = _render_frame(layouts[l], h, w, 0.0,
                                            dxf * phase[tt], sharp)
    X = np.zeros((n, p))
    ks = rng.integers(0, K, p)
    for tt in range(p):
        X[:, tt] = means[ks[tt], tt] + comp_std * rng.standard_normal(n)
    _, supp0 = _render_frame(layouts[ks[0]], h, w, 0.0, 0.0, sharp)
    components = [(1.0 / (K * p), means[l, tt], comp_std)
                  for l in range(K) for tt in range(p)]
    return X, supp0, components


def _foreground_gaussian(rng, spec, params):
    """AR(1) Gaussian field; motion_level is the decorrelation rate.

    Marginals are N(mean, stddev^2) at every frame; consecutive frames
    have correlation 1 - motion_level, so the expected inter-frame MSE
    is exactly 2 stddev^2 motion_level.
    """
    n = spec.frame_height * spec.frame_width
    p = spec.num_frames
    m, s = params["mean"], params["stddev"]
    rho = 1.0 - spec.motion_level
    X = np.zeros((n, p))
    X[:, 0] = m + s * rng.standard_normal(n)
    innov = s * np.sqrt(1.0 - rho ** 2)
    for t in range(1, p):
        X[:, t] = m + rho * (X[:, t - 1] - m) + innov * rng.standard_normal(n)
    return X


def _foreground_sparse(rng, spec, params):
    """Bernoulli support times Gaussian amplitudes with per-frame churn.

    Each site is resampled (fresh support coin and value) with
    probability motion_level per frame, so occupied sites persist at
    motion 0 and scatter at motion 1.
    """
    n = spec.frame_height * spec.frame_width
    p = spec.num_frames
    dens, amp = params["density"], params["amplitude"]

    def draw():
        on = rng.random(n) < dens
        return on * (amp * rng.standard_normal(n))

    X = np.zeros((n, p))
    X[:, 0] = draw()
    for t in range(1, p):
        churn = rng.random(n) < spec.motion_level
        fresh = draw()
        X[:, t] = np.where(churn, fresh, X[:, t - 1])
    return X


def _support_mask(spec, X, supp0):
    """Frame-0 support; falls back to a fixed center box when empty."""
    h, w = spec.frame_height, spec.frame_width
    if supp0 is None:
        # non-blob kinds: sites more than two deviations out, frame 0
        dev = np.abs(X[:, 0] - np.median(X[:, 0]))
        cut = 2.0 * np.std(X[:, 0])
        supp0 = dev > cut if cut > 0 else np.zeros(h * w, dtype=bool)
    if not supp0.any():
        box = np.zeros((h, w), dtype=bool)
        box[h // 2 - 2:h // 2 + 2, w // 2 - 2:w // 2 + 2] = True
        supp0 = box.ravel()
    return supp0


def _empty_mask(spec, supp0):
    """Corner box away from the frame-0 support, grown until nonempty."""
    h, w = spec.frame_height, spec.frame_width
    size = 7
    while True:
        box = np.zeros((h, w), dtype=bool)
        box[1:min(size, h), 1:min(size, w)] = True
        mask = box.ravel() & ~supp0
        if mask.any():
            return mask
        if size >= max(h, w):
            # support covers everything reachable; carve out one pixel
            mask = ~supp0
            if not mask.any():
                raise ValueError("support covers the whole frame, "
                                 "no empty region left")
            return mask
        size += 2


def _generate_arrays(spec):
    """Core generator; returns flat arrays plus the blob mixture if any."""
    rng = np.random.default_rng(spec.seed)
    n = spec.frame_height * spec.frame_width
    p = spec.num_frames
    params = spec.resolved_params()
    L = _background(rng, spec)
    supp0 = None
    components = None
    if spec.foreground_kind == "gmm-blobs":
        X, supp0, components = _foreground_blobs(rng, spec, params)
    elif spec.foreground_kind == "gaussian":
        X = _foreground_gaussian(rng, spec, params)
    else:
        X = _foreground_sparse(rng, spec, params)
    Y = L + X + spec.observation_noise_std * rng.standard_normal((n, p))
    septum = _support_mask(spec, X, supp0)
    ventricle = _empty_mask(spec, septum)
    return Y, L, X, septum, ventricle, components


def generate(spec):
    """Planted instance: observed, background, foreground, ROI masks."""
    Y, L, X, septum, ventricle, _ = _generate_arrays(spec)
    h, w = spec.frame_height, spec.frame_width
    return SynthInstance(
        observed=CasoratiMatrix(Y, h, w),
        background=CasoratiMatrix(L, h, w),
        foreground=CasoratiMatrix(X, h, w),
        masks={
            "ventricle": RoiMask(ventricle, "ventricle"),
            "septum": RoiMask(septum, "septum"),
        },
    )


def foreground_prior(spec):
    """The score-model prior matching the foreground generator.

    gmm-blobs yields the exact frame-level mixture used to draw the
    columns; gaussian yields the matching isotropic prior. The sparse
    kind has no analytic density here.
    """
    from .score_models import GaussianPrior, GmmPrior

    if spec.foreground_kind == "gmm-blobs":
        *_, components = _generate_arrays(spec)
        return GmmPrior(components)
    if spec.foreground_kind == "gaussian":
        params = spec.resolved_params()
        n = spec.frame_height * spec.frame_width
        mean = np.full(n, float(params["mean"]))
        return GaussianPrior(mean, params["stddev"])
    raise ValueError("sparse foreground has no analytic prior")


def motion_sweep(base, levels):
    """One instance per motion level, seeds derived from the base seed.

    Index 0 reuses the base seed unchanged, so a single-level sweep is
    bitwise identical to a direct generate call.
    """
    out = []
    for idx, level in enumerate(levels):
        level = float(level)
        if not 0.0 <= level <= 1.0:
            raise ValueError(f"motion level {level} outside [0, 1]")
        spec = dataclasses.replace(base, motion_level=level,
                                   seed=base.seed + 7919 * idx)
        out.append((level, generate(spec)))
    return out


def write_instance(instance, spec, directory):
    """Write tensors plus a JSON sidecar echoing the generating spec."""
    os.makedirs(directory, exist_ok=True)
    paths = {}
    for name, tensor in [("observed", instance.observed),
                         ("background", instance.background),
                         ("foreground", instance.foreground),
                         ("ventricle_mask", instance.masks["ventricle"]),
                         ("septum_mask", instance.masks["septum"])]:
        path = os.path.join(directory, name + ".ndt")
        write_tensor(path, tensor)
        paths[name] = path
    sidecar = dataclasses.asdict(spec)
    with open(os.path.join(directory, "spec.json"), "w") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
    paths["spec"] = os.path.join(directory, "spec.json")
    return paths
