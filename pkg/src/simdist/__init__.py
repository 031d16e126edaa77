"""Desk-scale latent world-model pipeline: pretrain in an analytic
simulator, plan with MPPI, and adapt the latent dynamics to a perturbed
variant of the same environment."""

__version__ = "0.1.0"
