"""Noise budgets of cryogenic microwave amplification chains."""
from .chainmodel import ChainConfig, chain_added_noise, chain_added_noise_off, propagate_exact
from .fitter import fit_johnson, fit_shot
from .budget import build_budget, infer_excess_noise, infer_follower_noise
