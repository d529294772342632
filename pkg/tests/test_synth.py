"""Test the synthetic data generator and the trial battery."""

from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pandas as pd
import pytest

from aiodeconv import exceptions
from aiodeconv.filters import sto_violation_filter
from aiodeconv.helpers import const as CONST
from aiodeconv.helpers.const import (
    Enforcement,
    NoiseKind,
    ScqGenes,
    ViolationCategory,
    ViolationScope,
)
from aiodeconv.solver import ConstraintMode, DeconvolutionConfig, LossKind
from aiodeconv.synth import NoiseModel, SynthSpec, generate, trial_battery

L2 = DeconvolutionConfig()
L1 = DeconvolutionConfig(loss=LossKind.absolute_l1())


def test_generate(small_synth) -> None:
    """Test the noiseless generative model."""
    dataset = small_synth
    assert dataset.reference_given.col_labels == ("type1", "type2", "type3")
    assert dataset.mixture.col_labels == ("s1", "s2", "s3", "s4")
    assert dataset.mixture.row_labels[0] == "g001"
    assert dataset.clamp_rate == 0.0
    assert dataset.concentrations.sto_satisfied and dataset.concentrations.nonneg_satisfied
    assert dataset.mixture.values == pytest.approx(
        dataset.reference_given.values @ dataset.concentrations.values, rel=1e-12
    )

    # Test the marker block layout
    reference = dataset.reference_true.values
    assert reference[0, 0] == pytest.approx(reference[0, 1] / CONST.LEAKAGE)
    assert reference[20, 1] == pytest.approx(reference[20, 2] / CONST.LEAKAGE)

    # Replicates per cell-type
    assert dataset.replicates.shape == (120, 9)
    assert dataset.grouping.columns_for("type2") == ["type2_r1", "type2_r2", "type2_r3"]

    # Seeded
    again = generate(
        SynthSpec(n_genes=120, n_types=3, n_samples=4, markers_per_type=20, replicates_per_type=3),
        seed=11,
    )
    assert np.array_equal(again.mixture.values, dataset.mixture.values)
    assert np.array_equal(again.replicates.values, dataset.replicates.values)


def test_generate_variants() -> None:
    """Test scaling, fixed designs, hidden types and perturbation."""
    spec = SynthSpec(n_genes=60, n_types=2, n_samples=2, markers_per_type=10)
    plain = generate(spec, seed=2)

    # Scaling only multiplies the mixture
    scaled = generate(
        SynthSpec(n_genes=60, n_types=2, n_samples=2, markers_per_type=10, scq_scale=1000.0),
        seed=2,
    )
    assert scaled.mixture.values == pytest.approx(1000.0 * plain.mixture.values)
    assert np.array_equal(scaled.reference_given.values, plain.reference_given.values)

    # A pure sample equals its reference column
    design = np.array([[1.0, 0.5], [0.0, 0.5]])
    fixed = generate(
        SynthSpec(n_genes=60, n_types=2, n_samples=2, markers_per_type=10, concentrations=design),
        seed=2,
    )
    assert fixed.mixture.values[:, 0] == pytest.approx(fixed.reference_given.values[:, 0])
    assert fixed.concentrations.values == pytest.approx(design)

    # Hidden types contribute to M but are not given
    hidden = generate(
        SynthSpec(n_genes=60, n_types=2, n_samples=3, markers_per_type=10, hidden_types=1),
        seed=2,
    )
    assert hidden.reference_true.col_labels == ("type1", "type2", "hidden1")
    assert hidden.reference_given.shape == (60, 2)
    assert hidden.concentrations.values.sum(axis=0) == pytest.approx(np.ones(3))

    # Perturbed reference
    perturbed = generate(
        SynthSpec(
            n_genes=60, n_types=2, n_samples=2, markers_per_type=10, reference_perturbation_sigma=0.2
        ),
        seed=2,
    )
    assert np.array_equal(perturbed.reference_true.values, plain.reference_true.values)
    assert not np.allclose(perturbed.reference_given.values, plain.reference_given.values)

    # Test the invalid recipes
    with pytest.raises(exceptions.DeconvUsageException):
        SynthSpec(n_genes=10, n_types=2, markers_per_type=10)
    with pytest.raises(exceptions.DeconvUsageException):
        SynthSpec(n_genes=60, n_types=2, n_samples=2, concentrations=np.ones((2, 2)))
    with pytest.raises(exceptions.DeconvUsageException):
        NoiseModel(NoiseKind.GAUSSIAN, 0.0)
    with pytest.raises(exceptions.DeconvUsageException):
        SynthSpec(scq_scale=0.0)


def test_noise_models() -> None:
    """Test the noise draws."""
    rng = np.random.default_rng(0)
    assert not NoiseModel().sample(rng, (3, 2)).any()
    gaussian = NoiseModel(NoiseKind.GAUSSIAN, 2.0).sample(rng, (4000, 5))
    assert gaussian.std() == pytest.approx(2.0, rel=0.05)
    laplacian = NoiseModel(NoiseKind.LAPLACIAN, 2.0).sample(rng, (4000, 5))
    assert np.mean(np.abs(laplacian)) == pytest.approx(2.0, rel=0.05)
    outliers = NoiseModel(NoiseKind.OUTLIER, 1.0, 0.1, 100.0).sample(rng, (4000, 5))
    assert np.mean(np.abs(outliers) > 10.0) == pytest.approx(0.1 * 0.92, abs=0.02)


def test_trial_battery() -> None:
    """Test seeded trials on noiseless and noisy data."""
    spec = SynthSpec(n_genes=60, n_types=3, n_samples=3, markers_per_type=10)
    battery = trial_battery(spec, 3, [L2], seed=1)
    assert battery[CONST.CONFIG_ID].tolist() == [0]
    assert battery.loc[0, "loss"] == "l2"
    assert battery.loc[0, "mad_mean"] < 0.5

    # The violation filter keeps exact recovery on noiseless data
    filtered = trial_battery(spec, 3, [L2], seed=1, sto_filter=ViolationScope.PER_SAMPLE)
    assert filtered.loc[0, "mad_mean"] < 0.5

    # Worker count does not change the numbers
    serial = trial_battery(spec, 4, [L2, L1], seed=3)
    with ThreadPoolExecutor(max_workers=2) as executor:
        parallel = trial_battery(spec, 4, [L2, L1], seed=3, executor=executor)
    pd.testing.assert_frame_equal(serial, parallel)

    with pytest.raises(exceptions.DeconvUsageException):
        trial_battery(spec, 0, [L2])


def test_trial_battery_noise() -> None:
    """Test the squared and absolute losses under two noise models."""
    base = {"n_genes": 500, "n_types": 4, "n_samples": 10, "expression_range": (8.0, 12.0)}

    # Gaussian noise favours the squared loss
    spec = SynthSpec(**base, noise=NoiseModel(NoiseKind.GAUSSIAN, 5.0))
    battery = trial_battery(spec, 50, [L2, L1], seed=7)
    assert battery.loc[0, "mad_mean"] < battery.loc[1, "mad_mean"]

    # Outliers favour the absolute loss
    spec = SynthSpec(**base, noise=NoiseModel(NoiseKind.OUTLIER, 5.0, 0.1, 100.0))
    battery = trial_battery(spec, 50, [L2, L1], seed=7)
    assert battery.loc[1, "mad_mean"] < battery.loc[0, "mad_mean"]


def test_scq_shared_genes() -> None:
    """Test that the violation filter repairs a shared-gene rescale."""
    spec = SynthSpec(500, 4, 10, scq_scale=3.0, scq_genes=ScqGenes.SHARED)
    dataset = generate(spec, seed=4)
    markers = spec.n_types * spec.markers_per_type

    # Only the shared genes move out of the reference range
    report = sto_violation_filter(dataset.reference_given, dataset.mixture)
    categories = report.categories.to_numpy()
    assert (categories[:markers] == ViolationCategory.OK.value).all()
    assert (categories[markers:] == ViolationCategory.VIOLATING_MIXTURE.value).all()

    # Filtering lowers the error for both sum-to-one modes
    configs = [
        DeconvolutionConfig(constraints=ConstraintMode(Enforcement.EXPLICIT, sto))
        for sto in (Enforcement.IMPLICIT, Enforcement.EXPLICIT)
    ]
    for noise in (NoiseModel(), NoiseModel(NoiseKind.GAUSSIAN, 5.0)):
        noisy = SynthSpec(500, 4, 10, noise=noise, scq_scale=3.0, scq_genes=ScqGenes.SHARED)
        plain = trial_battery(noisy, 20, configs, seed=0)
        filtered = trial_battery(noisy, 20, configs, seed=0, sto_filter=ViolationScope.PER_SAMPLE)
        assert (filtered["mad_mean"] < plain["mad_mean"]).all()
    assert filtered.loc[1, "sto"] == "explicit"
