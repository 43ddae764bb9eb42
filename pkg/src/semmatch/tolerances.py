"""Centralized numeric tolerance constants.

All accumulation happens in float64 regardless of storage precision;
the constants below are the single source of truth for every norm and
matrix-product comparison in the package and its tests.
"""

# Unit-norm check on freshly normalized vectors.
NORM_TOL = 1e-6

# Matrix-product and score-sum agreement.
MATMUL_TOL = 1e-9

# Re-normalization drift allowed for idempotence.
IDEMPOTENCE_TOL = 1e-7

# Norm check when loading externally produced float32 files.
READ_NORM_TOL = 1e-4
