"""Image encryption by chaotic parallel compressive sensing.

A picture is sparsified with a 2-D DCT, scrambled by a keyed permutation
drawn from a skew tent map, and every column is measured with one chaotic
matrix generated from a second key. Decoding solves an l1 problem per
column and undoes the permutation.
"""

from .chaos import ChaoticKey, iterate, lyapunov_exponent, sample, tent_step
from .errors import ChaosPCSError, DimensionError, DomainError, FormatError, SizeLimitError
from .imaging import best_s_term, dct2, idct2, psnr, read_pgm, test_image, write_pgm
from .permute import PermutationOrder, order_by_flags, order_by_sorting, sparsity_vector
from .pipeline import EncodeProfile, KeyBundle, decode, encode, keygen
from .recover import SolverConfig, l0_oracle, l1_solve, pcs_reconstruct
from .sense import Ciphertext, MeasurementMatrix, build_matrix, pcs_sample, rip_constant_estimate

__version__ = "0.1.0"

__all__ = [
    "ChaoticKey", "iterate", "lyapunov_exponent", "sample", "tent_step",
    "ChaosPCSError", "DimensionError", "DomainError", "FormatError", "SizeLimitError",
    "best_s_term", "dct2", "idct2", "psnr", "read_pgm", "test_image", "write_pgm",
    "PermutationOrder", "order_by_flags", "order_by_sorting", "sparsity_vector",
    "EncodeProfile", "KeyBundle", "decode", "encode", "keygen",
    "SolverConfig", "l0_oracle", "l1_solve", "pcs_reconstruct",
    "Ciphertext", "MeasurementMatrix", "build_matrix", "pcs_sample", "rip_constant_estimate",
]
