"""Multi-skill quadruped locomotion: gait experts trained by SAC with
contact-pattern rewards, a gating network composing them multiplicatively
for goal tracking, and CMA-ES discovery of the gait-switch distances."""

__version__ = "0.1.0"

from .kernels import BACKEND as kernel_backend  # noqa: F401
