"""
Boson Sampling Born Machine - command line entry point

Commands: train, sample, evaluate, tower, oracle. Exit status is 0 on
success, 2 for configuration errors, 3 for data errors and 1 otherwise.
"""

import argparse
import csv
import io
import sys
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
from loguru import logger
from pydantic import ValidationError

from core.artifacts import (
    Checkpoint,
    RunConfig,
    build_model_readout,
    build_model_tower,
    load_checkpoint,
    load_run_config,
    metrics_csv,
    read_dataset,
    trace_csv,
    write_checkpoint,
)
from core.born_machine import BsbmSpec, dilute_gap, exact_distribution, sample_exact
from core.combinatorics import binomial, bits_to_str
from core.config import get_settings
from core.errors import BsbmError, ConfigError, DataError, EnumerationTooLarge, SpaceTooLarge
from core.interferometer import InterferometerMesh, haar_random
from core.oracles import readout_is_surjective, run_oracle_suite, tower_compatibility_violations
from core.readout import EbsbmSpec, build_tower, pushforward_exact
from core.training import (
    EmpiricalDistribution,
    KernelSpec,
    final_loss_estimate,
    lift_dataset,
    median_heuristic_sigma,
    mmd2_exact,
    spectral_sample,
    surrogate_report,
    total_variation,
    train,
)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_DATA = 3
SKIPPED = "skipped:enumeration_cap"
DILUTE_WORDS = 16


def configure_logging(level: Optional[str] = None):
    logger.remove()
    logger.add(sys.stderr, level=level or get_settings().LOG_LEVEL)


def _apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        config.run.seed = args.seed
    if getattr(args, "workers", None) is not None:
        config.run.workers = args.workers
    return config


def _model_spec(config: RunConfig, mesh: InterferometerMesh) -> EbsbmSpec:
    readout = build_model_readout(config.model)
    base = BsbmSpec(m=readout.m, k=readout.k, mesh=mesh)
    return EbsbmSpec(n=config.model.n, base=base, readout=readout)


def _initial_mesh(config: RunConfig, m: int) -> InterferometerMesh:
    if config.model.init == "identity":
        return InterferometerMesh.zeros(m)
    return haar_random(m, config.run.seed)


def _resolve_sigma(config: RunConfig, data: EmpiricalDistribution, ebsbm: EbsbmSpec) -> float:
    if config.kernel.sigma is not None:
        return config.kernel.sigma
    lifted = lift_dataset(data, ebsbm.readout, config.training.lift_mode, config.run.seed, 0)
    sigma = median_heuristic_sigma(lifted)
    logger.info(f"Kernel width from the median heuristic: sigma={sigma:.6g}")
    return sigma


def _check_bits(data: EmpiricalDistribution, n: int):
    if data.n_bits != n:
        raise DataError(f"dataset has {data.n_bits} bits, model.n is {n}")


def _write_text(text: str, out: Optional[str]):
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def cmd_train(args: argparse.Namespace) -> int:
    config = _apply_overrides(load_run_config(args.config), args)
    data = read_dataset(config.io.dataset)
    _check_bits(data, config.model.n)

    readout = build_model_readout(config.model)
    ebsbm = _model_spec(config, _initial_mesh(config, readout.m))
    sigma = _resolve_sigma(config, data, ebsbm)
    kernel = KernelSpec(m=readout.m, sigma=sigma)
    train_config = config.train_config()

    result = train(data, ebsbm, kernel, train_config)
    surrogate_report(data, ebsbm.with_mesh(result.mesh), kernel, train_config.lift_mode)

    out_dir = Path(args.out or config.io.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / config.io.trace).write_text(trace_csv(result.trace, timing=config.io.timing))

    tower = build_model_tower(config.model)
    checkpoint = Checkpoint(
        config=config,
        mesh=result.mesh,
        sigma=sigma,
        config_hash=config.config_hash(),
        final_loss=result.final_loss,
        final_stderr=result.final_stderr,
        tower=tuple(tower.describe()) if tower is not None else (),
    )
    write_checkpoint(out_dir / config.io.checkpoint, checkpoint)
    print(f"✅ Trained {train_config.steps} steps: final loss {result.final_loss:.6g} ± {result.final_stderr:.2g}")
    return EXIT_OK


def cmd_sample(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    if args.count < 0:
        raise ConfigError("--count must be nonnegative", key="--count")
    ebsbm = _model_spec(checkpoint.config, checkpoint.mesh)
    seed = args.seed if args.seed is not None else checkpoint.config.run.seed

    outcomes = sample_exact(ebsbm.base, args.count, seed) if args.count else []
    if args.raw:
        lines = [str(s) for s in outcomes]
    else:
        lines = [bits_to_str(ebsbm.readout(s)) for s in outcomes]
    _write_text("".join(f"{line}\n" for line in lines), args.out)
    logger.info(f"Sampled {len(lines)} {'raw outcomes' if args.raw else 'readouts'}")
    return EXIT_OK


def _exact_metrics(data: EmpiricalDistribution, ebsbm: EbsbmSpec, sigma: float, seed: int) -> List[tuple]:
    spec = ebsbm.base
    dist = exact_distribution(spec)
    model_table = pushforward_exact(ebsbm)
    data_table = data.table()
    readout_kernel = KernelSpec(m=ebsbm.n, sigma=sigma)

    rng = np.random.default_rng(seed)
    kernel = KernelSpec(m=spec.m, sigma=sigma)
    gap = max(abs(dilute_gap(spec, spectral_sample(kernel, rng), dist)) for _ in range(DILUTE_WORDS))
    return [
        ("tv_exact", total_variation(data_table, model_table), None),
        ("mmd2_exact", mmd2_exact(data_table, model_table, readout_kernel), None),
        ("collision_free_mass", dist.Z, None),
        ("dilute_gap_max", float(gap), None),
    ]


def cmd_evaluate(args: argparse.Namespace) -> int:
    checkpoint = load_checkpoint(args.checkpoint)
    config = _apply_overrides(checkpoint.config, args)
    if args.dataset is None:
        raise ConfigError("evaluate needs --dataset", key="--dataset")
    data = read_dataset(args.dataset)
    _check_bits(data, config.model.n)

    ebsbm = _model_spec(config, checkpoint.mesh)
    sigma = args.sigma if args.sigma is not None else checkpoint.sigma
    kernel = KernelSpec(m=ebsbm.base.m, sigma=sigma)
    train_config = config.train_config()
    value, stderr = final_loss_estimate(data, ebsbm, kernel, train_config)

    rows = [
        ("mmd2_estimate", value, stderr),
        ("recorded_final_loss", checkpoint.final_loss, checkpoint.final_stderr),
    ]
    try:
        if binomial(ebsbm.base.m, ebsbm.base.k) > get_settings().BSBM_ENUM_CAP:
            raise EnumerationTooLarge(f"C({ebsbm.base.m},{ebsbm.base.k}) exceeds the enumeration cap")
        rows += _exact_metrics(data, ebsbm, sigma, config.run.seed)
    except (EnumerationTooLarge, SpaceTooLarge) as e:
        logger.info(f"Exact metrics skipped: {e}")
        rows += [(name, SKIPPED, None) for name in ("tv_exact", "mmd2_exact", "collision_free_mass", "dilute_gap_max")]

    _write_text(metrics_csv(rows), args.out)
    return EXIT_OK


def cmd_tower(args: argparse.Namespace) -> int:
    if args.config is not None:
        model = load_run_config(args.config, require_dataset=False).model
        tower = build_model_tower(model)
        if tower is None:
            raise ConfigError("model.m and model.k describe a single readout, not a tower", key="model.m")
    elif args.n is not None:
        tower = build_tower(args.n, args.construction, photons=args.photons, levels=args.levels, strict=args.strict)
    else:
        raise ConfigError("tower needs --config or --n", key="--n")
    n = tower.n
    problems = []
    if tower.construction.value == "bleed":
        problems += tower_compatibility_violations(tower)
    for readout in tower.readouts:
        size = binomial(readout.m, readout.k)
        if size <= get_settings().BSBM_ENUM_CAP and size >= 1 << n and not readout_is_surjective(readout):
            problems.append(f"{readout.describe()} is not surjective")

    lines = ["m,k,construction,readout"] + tower.describe()
    lines += [f"# {note}" for note in tower.report]
    lines += [f"# violation: {p}" for p in problems]
    _write_text("\n".join(lines) + "\n", args.out)
    return EXIT_OK if not problems else EXIT_RUNTIME


def cmd_oracle(args: argparse.Namespace) -> int:
    results = run_oracle_suite(args.seed if args.seed is not None else 0)
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(["check", "passed", "detail"])
    for r in results:
        writer.writerow([r.name, "true" if r.passed else "false", r.detail])
    _write_text(buffer.getvalue(), args.out)
    return EXIT_OK if all(r.passed for r in results) else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bsbm", description="Boson Sampling Born Machine toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="Train a model on a dataset")
    p.add_argument("--config", required=True, help="Run config (section.key = value lines)")
    p.add_argument("--seed", type=int, help="Override run.seed")
    p.add_argument("--workers", type=int, help="Override run.workers")
    p.add_argument("--out", help="Output directory (default io.out_dir)")
    p.set_defaults(handler=cmd_train)

    p = sub.add_parser("sample", help="Draw samples from a checkpoint")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--raw", action="store_true", help="Emit m-bit Fock outcomes instead of n-bit readouts")
    p.add_argument("--out", help="Output file (default stdout)")
    p.set_defaults(handler=cmd_sample)

    p = sub.add_parser("evaluate", help="Score a checkpoint against a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--dataset")
    p.add_argument("--sigma", type=float, help="Kernel width (default: the checkpoint's)")
    p.add_argument("--seed", type=int, help="Override run.seed for the loss estimate")
    p.add_argument("--workers", type=int)
    p.add_argument("--out", help="Metrics CSV path (default stdout)")
    p.set_defaults(handler=cmd_evaluate)

    p = sub.add_parser("tower", help="Print and validate a readout tower")
    p.add_argument("--config")
    p.add_argument("--n", type=int)
    p.add_argument("--construction", choices=["bleed", "interp"], default="interp")
    p.add_argument("--photons", type=int, default=2)
    p.add_argument("--levels", type=int, default=4)
    p.add_argument("--strict", action="store_true")
    p.add_argument("--out")
    p.set_defaults(handler=cmd_tower)

    p = sub.add_parser("oracle", help="Run the brute-force cross-checks")
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(handler=cmd_oracle)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    configure_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as e:
        logger.error(f"Configuration error{f' ({e.key})' if e.key else ''}: {e}")
        return EXIT_CONFIG
    except ValidationError as e:
        loc = ".".join(str(part) for part in e.errors()[0]["loc"])
        logger.error(f"Configuration error ({loc}): {e.errors()[0]['msg']}")
        return EXIT_CONFIG
    except DataError as e:
        logger.error(f"Data error: {e}")
        return EXIT_DATA
    except EnumerationTooLarge as e:
        logger.error(f"Exact sampling infeasible: {e}")
        return EXIT_RUNTIME
    except (BsbmError, OSError) as e:
        logger.error(f"{args.command} failed: {e}")
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
