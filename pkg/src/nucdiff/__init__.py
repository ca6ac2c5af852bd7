"""Low-rank plus diffusion-prior decomposition of short video clips.

The package splits an observed pixel-by-frame matrix into a low-rank
background and a structured foreground by running a reverse diffusion
chain under a foreground prior while a nuclear-norm-penalized background
estimate is updated alongside it. A convex low-rank plus sparse solver
is included as the baseline, together with the metrics, synthetic data,
and file formats needed to study both on equal footing.
"""

__version__ = "0.1.0"

from .diffusion import (
    GUIDANCE_MODES,
    SCHEDULE_KINDS,
    GuidanceConfig,
    NoiseSchedule,
    ancestral_step,
    diffuse_forward,
    guidance_gradient,
    make_schedule,
    tweedie_denoise,
)
from .errors import FormatError, NumericalError, ShapeError
from .metrics import (
    EmpiricalCdf,
    extract_roi,
    gcnr,
    ks_statistic,
    motion_psnr,
)
from .proxops import (
    SvdFactors,
    nuclear_norm,
    nuclear_subgradient,
    soft_threshold,
    svd_factors,
    svt,
)
from .rpca import (
    Decomposition,
    RpcaConfig,
    rpca_log_posterior,
    rpca_objective,
    rpca_solve,
)
from .sampler import (
    NucDiffConfig,
    SamplerTrace,
    background_update,
    dps_sample,
    nuclear_diffusion_sample,
    stacked_score,
)
from .score_models import (
    GaussianPrior,
    GmmPrior,
    MlpDenoiser,
    ScoreModel,
    gaussian_predict_noise,
    gmm_predict_noise,
    load_weights,
    mlp_predict_noise,
    save_weights,
)
from .synth import (
    SynthSpec,
    foreground_prior,
    generate,
    motion_sweep,
    write_instance,
)
from .tensors import (
    CasoratiMatrix,
    Frame,
    RoiMask,
    read_mask,
    read_tensor,
    stack_frames,
    unstack_frames,
    write_tensor,
)

__all__ = [name for name in dir() if not name.startswith("_")]
