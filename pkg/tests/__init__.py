"""Tests for AIODeconv."""

import pathlib

FIXTURES = pathlib.Path(__file__).parent.joinpath("fixtures")

MIXTURE = "mixture.tsv"
REFERENCE = "reference.tsv"
TRUTH = "truth.tsv"
REPLICATES = "replicates.tsv"
REPLICATE_MAP = "replicate_map.tsv"

# Concentrations behind mixture.tsv, cell-types A and B by samples s1 and s2.
TRUE_CONCENTRATIONS = [[0.25, 0.6], [0.75, 0.4]]


def fixture_path(filename) -> str:
    """Return the path of a fixture."""
    return str(FIXTURES.joinpath(filename))


def load_fixture(filename) -> str:
    """Load a fixture."""
    return FIXTURES.joinpath(filename).read_text(encoding="utf8")
