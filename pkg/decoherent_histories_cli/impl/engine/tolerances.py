# -------------------------------------------------------------------------
# STRUCTURAL CHECKS

# hermiticity of H and of computed matrices
HERMITIAN_TOL = 1e-12
# unitarity, idempotency, family completeness / orthogonality
STRUCTURAL_TOL = 1e-10
# equality assertions unless a looser bound is stated
EQUALITY_TOL = 1e-12
# a state flagged as normalized
NORMALIZED_TOL = 1e-12
# eigenvalue floor of density matrices
DENSITY_EIGEN_TOL = 1e-10


# -------------------------------------------------------------------------
# DECOHERENCE / INFERENCE

DEFAULT_EPSILON = 1e-8
# conditioning denominators below this are null events
DIVISION_EPSILON = 1e-12
# diagonal entries of D may dip below zero by rounding only
NEGATIVE_PROBABILITY_TOL = 1e-12


# -------------------------------------------------------------------------
# SIZE CAPS

DEFAULT_MAX_HISTORIES = 4096
MAX_ENUMERATED_MEMBERS = 12
# largest dimension the model zoo builds with explicit environment qubits
MAX_EXPLICIT_DIM = 2 ** 10
