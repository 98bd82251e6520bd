"""Loewner chains, monotone convolution and comb products of spidernets."""

from .discretize import approximant_map, bin_field, ladder_params, singleize_multislit
from .graphs import SpidernetSpec, build_spidernet, comb_ball, comb_product
from .halfplane import SlitMap, eval_map, moments_by_contour, monotone_convolve
from .loewner import measure_moments_at_time, solve_backward_f, solve_forward_g
from .walks import check_monotone_factorization, embedded_moment, root_moments

__all__ = [
    'SlitMap',
    'SpidernetSpec',
    'approximant_map',
    'bin_field',
    'build_spidernet',
    'check_monotone_factorization',
    'comb_ball',
    'comb_product',
    'embedded_moment',
    'eval_map',
    'ladder_params',
    'measure_moments_at_time',
    'moments_by_contour',
    'monotone_convolve',
    'root_moments',
    'singleize_multislit',
    'solve_backward_f',
    'solve_forward_g',
]
