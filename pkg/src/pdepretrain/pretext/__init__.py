from .builders import (
    DERIVATIVE_FIELDS,
    PatchSpec,
    PretextBatch,
    apply_mask_token,
    build_binary,
    build_coefficient,
    build_derivative,
    build_jigsaw,
    build_masked,
    build_sort,
    coefficient_label,
    decode_sort,
    derivative_fields,
    unshuffle_patches,
)
from .permutations import hamming_distance, jigsaw_bank, lexicographic_permutations
from .picl import euler_update, gcl_loss, picl_loss, picl_theta, psi_matrix

__all__ = [
    "DERIVATIVE_FIELDS", "PatchSpec", "PretextBatch", "apply_mask_token", "build_binary",
    "build_coefficient", "build_derivative", "build_jigsaw", "build_masked", "build_sort",
    "coefficient_label", "decode_sort", "derivative_fields", "euler_update", "gcl_loss",
    "hamming_distance", "jigsaw_bank", "lexicographic_permutations", "picl_loss", "picl_theta",
    "psi_matrix", "unshuffle_patches",
]
