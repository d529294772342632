"""Command line front end for aiodeconv."""

from __future__ import annotations

import argparse
import asyncio
import logging
from collections.abc import Sequence
from typing import Any, NoReturn

from . import Deconvolution
from . import settings as SETTINGS
from .exceptions import (
    DeconvException,
    DeconvSolverException,
    DeconvUsageException,
)
from .helpers import const as CONST
from .helpers import errors as ERROR
from .helpers.const import NoiseKind, ScqGenes
from .synth import NoiseModel, SynthSpec

_LOGGER = logging.getLogger(__name__)

_LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


class _Parser(argparse.ArgumentParser):
    """Parser raising usage exceptions instead of exiting."""

    def error(self, message: str) -> NoReturn:
        raise DeconvUsageException(ERROR.INVALID_SETTING, message)


def _setting_dest(section: str, key: str) -> str:
    return f"setting__{section}__{key}"


def _common_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", default="", help="INI settings file")
    common.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    common.add_argument("--quiet", action="store_true", help="errors only")
    group = common.add_argument_group("settings", "override a settings file key")
    for section, key, flag in SETTINGS.all_flags():
        group.add_argument(
            flag,
            dest=_setting_dest(section, key),
            default=None,
            metavar=key.upper(),
            help=f"[{section}] {key} (default: {CONST.DEFAULT_SETTINGS[section][key]!r})",
        )
    return common


def build_parser() -> argparse.ArgumentParser:
    """Build the argument parser with every subcommand."""
    common = _common_parser()
    parser = _Parser(prog="aiodeconv", description="Cell-type deconvolution toolkit")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("run", parents=[common], help="run the configuration grid")
    commands.add_parser("filter", parents=[common], help="write gene masks and reports")
    commands.add_parser("markers", parents=[common], help="write marker scores and the cut")
    commands.add_parser("losscurve", parents=[common], help="write loss curve samples")

    evaluate = commands.add_parser("eval", parents=[common], help="score an estimate")
    evaluate.add_argument("--truth", required=True)
    evaluate.add_argument("--estimate", required=True)
    evaluate.add_argument("--config-id", default=None)

    synth = commands.add_parser("synth", parents=[common], help="write a synthetic dataset")
    synth.add_argument("--genes", type=int, default=500)
    synth.add_argument("--types", type=int, default=4)
    synth.add_argument("--samples", type=int, default=10)
    synth.add_argument("--markers-per-type", type=int, default=25)
    synth.add_argument("--noise", choices=[kind.value for kind in NoiseKind], default="none")
    synth.add_argument("--noise-level", type=float, default=0.0)
    synth.add_argument("--outlier-fraction", type=float, default=0.0)
    synth.add_argument("--outlier-scale", type=float, default=1.0)
    synth.add_argument("--scq", type=float, default=1.0)
    synth.add_argument(
        "--scq-genes", choices=[genes.value for genes in ScqGenes], default=ScqGenes.ALL.value
    )
    synth.add_argument("--perturbation", type=float, default=0.0)
    synth.add_argument("--replicates", type=int, default=0)
    synth.add_argument("--hidden", type=int, default=0)
    synth.add_argument("--seed", type=int, default=0)
    return parser


def _flag_layer(args: argparse.Namespace) -> dict[str, dict[str, str]]:
    layer: dict[str, dict[str, str]] = {}
    for section, key, _ in SETTINGS.all_flags():
        value = getattr(args, _setting_dest(section, key))
        if value is not None:
            layer.setdefault(section, {})[key] = value
    return layer


def _configure_logging(args: argparse.Namespace) -> None:
    level = logging.WARNING
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.ERROR
    logging.basicConfig(level=level, format=_LOG_FORMAT)


def _synth_spec(args: argparse.Namespace) -> SynthSpec:
    return SynthSpec(
        n_genes=args.genes,
        n_types=args.types,
        n_samples=args.samples,
        markers_per_type=args.markers_per_type,
        noise=NoiseModel(
            NoiseKind(args.noise), args.noise_level, args.outlier_fraction, args.outlier_scale
        ),
        scq_scale=args.scq,
        scq_genes=ScqGenes(args.scq_genes),
        reference_perturbation_sigma=args.perturbation,
        replicates_per_type=args.replicates,
        hidden_types=args.hidden,
    )


async def async_main(args: argparse.Namespace) -> int:
    """Run one subcommand and return its exit code.

    Exceptions: DeconvException.
    """
    layers: list[Any] = []
    if args.config:
        layers.append(await SETTINGS.async_load_settings(args.config))
    layers.append(_flag_layer(args))
    settings = SETTINGS.merge_settings(*layers)

    async with Deconvolution(settings) as runner:
        if args.command == "run":
            result = await runner.async_run_grid()
            failed = result.metrics["error"] != ""
            if len(failed) and failed.all():
                _LOGGER.error("Every configuration failed")
                return CONST.EXIT_SOLVER
        elif args.command == "filter":
            await runner.async_filter_report()
        elif args.command == "markers":
            await runner.async_marker_report()
        elif args.command == "eval":
            scored = await runner.async_evaluate(args.truth, args.estimate, args.config_id)
            print("\t".join(f"{name}={value}" for name, value in scored.as_dict().items()))
        elif args.command == "synth":
            await runner.async_synth(_synth_spec(args), args.seed)
        elif args.command == "losscurve":
            await runner.async_loss_curve()
    return CONST.EXIT_OK


def exit_code(err: DeconvException) -> int:
    """Map an exception to the process exit code."""
    if isinstance(err, DeconvUsageException):
        return CONST.EXIT_USAGE
    if isinstance(err, DeconvSolverException):
        return CONST.EXIT_SOLVER
    return CONST.EXIT_DATA


def main(argv: Sequence[str] | None = None) -> int:
    """Console entry point."""
    try:
        args = build_parser().parse_args(argv)
    except DeconvUsageException as err:
        logging.basicConfig(format=_LOG_FORMAT)
        _LOGGER.error("%s", err)
        return CONST.EXIT_USAGE
    _configure_logging(args)
    try:
        return asyncio.run(async_main(args))
    except DeconvException as err:
        _LOGGER.error("%s", err)
        return exit_code(err)
