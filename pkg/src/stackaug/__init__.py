"""stackaug: stack-consistent image augmentation for pixel-based RL.

The core idea: augment observations so the random draw varies across a batch
but is held fixed across the frames stacked inside each observation.  On top
of that sit a small numpy autograd, SAC and PPO trainers, two toy pixel
environments, and analysis tools (benchmarks, ablation grids, attention maps).
"""

from .errors import ConfigError, NumericsError
from .imagecore import PixelBatch, read_batch, to_byte, to_real, write_batch
from .rng import RngStream

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "NumericsError",
    "PixelBatch",
    "RngStream",
    "read_batch",
    "to_byte",
    "to_real",
    "write_batch",
    "__version__",
]
