"""gqnq: generative query networks for quantum measurement statistics.

A small numpy/scipy library that
  * simulates spin-chain ground states, rotated GHZ/W states and their local
    Pauli measurement statistics exactly (``gqnq.spin``),
  * simulates squeezed thermal, cat and grid states of a harmonic oscillator
    with binned homodyne statistics (``gqnq.cv``),
  * trains a representation + recurrent-latent generation network to predict
    the outcome statistics of measurements that were never performed
    (``gqnq.model``, ``gqnq.training``),
  * evaluates predictions by classical fidelity and runs the downstream
    tasks: online updating, clustering of state representations, and regime
    classification (``gqnq.evaluation``, ``gqnq.clustering``).

Command-line entry points live in ``gqnq.cli``.

Set ``GQNQ_NUM_THREADS`` to cap BLAS threading; it is forwarded to the
usual OMP/BLAS variables before numpy loads (only effective if this package
is imported before numpy).
"""

import os as _os

_threads = _os.environ.get("GQNQ_NUM_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS",
                 "NUMEXPR_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .model import HyperParams, ModelParams

__version__ = "0.1.0"

__all__ = ["HyperParams", "ModelParams", "__version__"]
