"""hqb: hybrid quantum-classical benchmark toolkit.

A from-scratch differentiable state-vector simulator, a small dense-network
engine, six classifier architectures built on both, and a reproducible
experiment harness with a command-line interface.
"""

__version__ = "0.1.0"
