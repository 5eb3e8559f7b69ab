"""critpulse: learned control pulses for critical ground-state preparation.

Subpackages follow the pipeline: ``hilbert`` (operators and ground states),
``schedule`` (pulse parameterization), ``dynamics`` (closed/open propagation),
``reward`` (training signal), ``rl`` (environment + PPO), ``prune`` (field
ranking), ``analysis`` (QFI, populations, Wigner, robustness), ``cli``.
"""

from ._engine import backend_name

__version__ = "0.1.0"

__all__ = ["backend_name", "__version__"]
