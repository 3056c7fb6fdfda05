"""Bayesian sign-structure inference for non-normal continuous and mixed
binary/continuous data via Gaussian scale mixtures.

Subpackages
-----------
graph
    Decomposable graphs, junction-tree bookkeeping, edge-move proposals.
dist
    Samplers and log-densities (GIG, Polya-Gamma, hyper-inverse-Wishart,
    clique-marginal evaluation).
gsm
    MCMC engine for continuous data with per-margin random scales.
mixed
    MCMC engine for mixed binary/continuous data with Polya-Gamma scales.
sim
    Ground-truth generators and sign-detection metrics.
cli
    Command-line front end (``scalemix`` entry point).
"""

from .backend import active_backend

__all__ = ["active_backend"]
__version__ = "0.1.0"
