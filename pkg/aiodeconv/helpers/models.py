"""Models for AIODeconv settings and run records."""

from __future__ import annotations


class DatasetSettings(dict):
    """Class for the dataset section.

    Paths to TSV inputs; empty strings mean absent.
    """

    mixture: str
    reference: str
    replicates: str
    truth: str


class FilterSettings(dict):
    """Class for the filters section."""

    sto_violation: str
    sto_scope: str
    sto_categories: str
    range: str
    range_lo: str
    range_hi: str
    range_normalization: str


class MarkerSettings(dict):
    """Class for the markers section.

    q_cut is a number or "auto" (1e-3, or 1e-5 when a range filter runs).
    """

    method: str
    q_cut: str
    step_cap: str
    combine: str


class SolverSettings(dict):
    """Class for the solver section.

    losses, nn_modes and sto_modes are comma separated lists; lambda is a
    number or "grid"; groups lists cell-types as "a,b;c".
    """

    losses: str
    nn_modes: str
    sto_modes: str
    huber_m: str
    epsilon: str
    param_search: str
    regularizer: str
    alpha: str
    groups: str
    criterion: str
    max_iters: str


class EvalSettings(dict):
    """Class for the eval section."""

    samples: str
    seed: str
    qc_threshold: str


class OutputSettings(dict):
    """Class for the output section."""

    directory: str
    workers: str


class SettingsData(dict):
    """Class for a full, merged settings tree."""

    dataset: DatasetSettings
    filters: FilterSettings
    markers: MarkerSettings
    solver: SolverSettings
    eval: EvalSettings
    output: OutputSettings


class StageCounts(dict):
    """Class for the genes left after every pipeline stage."""

    aligned: int
    after_violation: int
    after_range: int
    after_markers: int


class RunManifest(dict):
    """Class for the manifest written next to the results."""

    config_hash: str
    tool_version: str
    seed: int
    started: str
    finished: str
    stage_counts: StageCounts
