"""Errors for AIODeconv."""

# Data errors
MALFORMED_HEADER = (0, "Malformed header")

NON_NUMERIC_CELL = (1, "Non-numeric value")

DUPLICATE_GENE = (2, "Duplicate gene id")

NEGATIVE_VALUE = (3, "Negative or non-finite expression value")

DUPLICATE_COLUMN = (4, "Duplicate column label")

SHAPE_MISMATCH = (5, "Matrix shape does not match its labels")

UNMAPPED_COLUMN = (6, "Reference column has no cell-type mapping")

EMPTY_GROUP = (7, "Cell-type has no reference columns")

EMPTY_INTERSECTION = (8, "Mixture and reference share no genes")

EMPTY_BASIS = (9, "No genes left after filtering")

READ_FAILED = (10, "Unable to read file")

# Solver errors
DEGENERATE_SOLUTION = (20, "Degenerate solution (zero or negative column)")

ILL_CONDITIONED = (21, "Normal equations are singular")

NOT_CONVERGED = (22, "Solver did not converge")

SOLVER_FAILED = (23, "Solver failed")

# Usage errors
INVALID_SETTING = (30, "Setting is not valid")

INVALID_SETTING_VALUE = (31, "Value for setting is not valid")

INVALID_PROBLEM = (32, "Problem does not meet the operation requirements")

NOT_ENOUGH_REPLICATES = (33, "Marker scoring needs at least two replicates per cell-type")

NOT_ENOUGH_POINTS = (34, "Not enough points")

MISSING_INPUT = (35, "Required input is missing")

# Evaluation errors
UNDEFINED_CORRELATION = (40, "Correlation is undefined for constant input")
