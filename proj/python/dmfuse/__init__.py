"""Two-stage diffusion-trained multimodal image fusion.

Thin wrapper over the compiled ``_dmfuse`` extension: a five-scale
denoising reconstructor (Stage I), an attention/multiscale fusion network
over multi-timestep diffusion features (Stage II), the hybrid
intensity/structure/gradient loss, and the nine-metric evaluation harness.
"""

from _dmfuse import *  # noqa: F401,F403
from _dmfuse import __doc__ as _core_doc  # noqa: F401

__version__ = "0.1.0"
