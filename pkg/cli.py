"""Command-line entry point: generate, spectrum, embed, cluster, evaluate, plot
and replay.

Every subcommand writes its outputs atomically and drops a run manifest next
to its primary output. `run` is the single place where errors become exit
codes and `error[CODE]:` lines on stderr.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional, Sequence
import argparse
import logging
import sys

import numpy as np

import config
from errors import DataError, NumericalError, SpectralError, UsageError
from fs_utils import cleanup_stale_temp_files, file_digest, require_file
from graph_core import (
    Graph, Partition, PlantedModel, complete_graph, cycle_graph, generate_planted,
    knn_graph, load_edge_list, path_graph, petersen_graph, read_partition, read_points,
    save_edge_list, two_triangles_bridge, write_partition,
)
from greedy_cluster import GreedyConfig, RadiusMode, fast_cluster, greedy_cluster, kmeans_baseline
from partition_metrics import (
    Verdict, concentration_check, concentration_residuals, gap_report, guarantee_report,
    pairsum_check, partition_distance, strength_report,
)
from report_schema import EvaluationReport, TraceFile
from report_utils import (
    build_manifest, emit_spectrum_plot, json_float, read_manifest, write_embedding_csv,
    write_json, write_manifest, write_spectrum_csv,
)
from spectral import compute_spectrum, embed

logger = logging.getLogger(__name__)

# Values that may come from the environment; the manifest argv pins them.
_PINNED_FLAGS = (('seed', '--seed'), ('tol', '--tol'),
                 ('dense_cutoff', '--dense-cutoff'), ('exact_limit', '--exact-limit'))
_DEFAULT_BLOCKS = (40, 40, 40, 40, 40)
_DEFAULT_GROUPS = ((0, 1), (2, 3, 4))

_EXIT_CODES_HELP = """exit codes:
  0  success
  1  usage error (bad flags, out-of-range parameters)
  2  data error (missing or malformed input files)
  3  numerical error (solver did not converge)
  4  internal bug (unexpected exception)"""


class CliParser(argparse.ArgumentParser):
    """ArgumentParser that raises UsageError instead of exiting."""

    def error(self, message):
        raise UsageError(message)


@dataclass
class CommandResult:
    outputs: list[Path]
    inputs: list[Path] = field(default_factory=list)
    params: dict[str, Any] = field(default_factory=dict)
    seed: Optional[int] = None


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(',') if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _groups(text: str) -> tuple[tuple[int, ...], ...]:
    return tuple(_int_list(chunk) for chunk in text.split('|'))


def _version_string() -> str:
    formats = ', '.join(f"{name} v{ver}" for name, ver in config.FORMAT_VERSIONS.items())
    return f"{config.TOOL_NAME} {config.TOOL_VERSION} (formats: {formats})"


def _solver_flags() -> CliParser:
    parent = CliParser(add_help=False)
    parent.add_argument('--graph', type=Path, required=True, help='edge-list file')
    parent.add_argument('--tol', type=float, default=None,
                        help='eigensolver residual tolerance (env SPECTRAL_TOL)')
    parent.add_argument('--max-iter', type=int, default=None,
                        help='eigensolver matvec budget (default 10*n)')
    parent.add_argument('--dense-cutoff', type=int, default=None,
                        help='largest n solved densely (env SPECTRAL_DENSE_CUTOFF)')
    parent.add_argument('--force', action='store_true',
                        help=f'lift the k <= {config.MAX_K} and n <= {config.MAX_N} guards')
    return parent


def build_parser() -> CliParser:
    parser = CliParser(prog=config.TOOL_NAME,
                       description='Greedy spectral k-clustering with quality diagnostics.',
                       epilog=_EXIT_CODES_HELP,
                       formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument('--version', action='version', version=_version_string())
    parser.add_argument('--log-level', default=None,
                        help='logging level (env SPECTRAL_LOG_LEVEL, default INFO)')
    sub = parser.add_subparsers(dest='command', metavar='COMMAND')
    sub.required = True
    solver = _solver_flags()

    gen = sub.add_parser('generate', help='write a synthetic graph')
    gen.add_argument('--model', default='planted',
                     choices=['planted', 'knn', 'complete', 'cycle', 'path', 'petersen', 'bridge'])
    gen.add_argument('--block-sizes', type=_int_list, default=_DEFAULT_BLOCKS)
    gen.add_argument('--p-in', type=float, default=0.5)
    gen.add_argument('--p-mid', type=float, default=0.05)
    gen.add_argument('--p-out', type=float, default=0.005)
    gen.add_argument('--supergroups', type=_groups, default=None,
                     help="blocks per supergroup, e.g. '0,1|2,3,4'")
    gen.add_argument('--n', type=int, default=None, help='vertex count for complete/cycle/path')
    gen.add_argument('--points', type=Path, default=None, help='point-cloud CSV for knn')
    gen.add_argument('--neighbors', type=int, default=10)
    gen.add_argument('--seed', type=int, default=None)
    gen.add_argument('--out', type=Path, required=True)
    gen.add_argument('--partition-out', type=Path, default=None,
                     help='planted blocks as a partition CSV')
    gen.add_argument('--supergroup-out', type=Path, default=None,
                     help='planted supergroups as a partition CSV')
    gen.set_defaults(handler=_cmd_generate)

    spec = sub.add_parser('spectrum', parents=[solver], help='lowest eigenvalues of L')
    spec.add_argument('--k', type=int, required=True)
    spec.add_argument('--out', type=Path, required=True)
    spec.add_argument('--plot', type=Path, default=None, help='also write an SVG plot')
    spec.add_argument('--gap-k', type=int, default=None,
                      help='gap to highlight in --plot (default k-1)')
    spec.set_defaults(handler=_cmd_spectrum)

    emb = sub.add_parser('embed', parents=[solver], help='spectral embedding CSV')
    emb.add_argument('--k', type=int, required=True)
    emb.add_argument('--out', type=Path, required=True)
    emb.set_defaults(handler=_cmd_embed)

    clu = sub.add_parser('cluster', parents=[solver], help='partition the embedding')
    clu.add_argument('--k', type=int, required=True)
    clu.add_argument('--method', default='greedy', choices=['greedy', 'fast', 'kmeans'])
    clu.add_argument('--epsilon', type=float, default=0.1)
    radius = clu.add_mutually_exclusive_group()
    radius.add_argument('--radius-scale', type=float, default=None,
                        help='R = G times the worst-case radius')
    radius.add_argument('--radius', type=float, default=None, help='explicit R')
    clu.add_argument('--seed', type=int, default=None)
    clu.add_argument('--kmeans-iter', type=int, default=300)
    clu.add_argument('--out', type=Path, required=True)
    clu.add_argument('--trace', type=Path, default=None)
    clu.set_defaults(handler=_cmd_cluster)

    ev = sub.add_parser('evaluate', parents=[solver], help='score a partition')
    ev.add_argument('--partition', type=Path, required=True)
    ev.add_argument('--reference', type=Path, default=None)
    ev.add_argument('--k', type=int, default=None)
    ev.add_argument('--exact-limit', type=int, default=None,
                    help='largest cluster scored by enumeration (env SPECTRAL_BRUTE_LIMIT)')
    ev.add_argument('--alpha-in', type=float, default=None)
    ev.add_argument('--alpha-out', type=float, default=None)
    ev.add_argument('--epsilon', type=float, default=None,
                    help='also check the sampled variant hypothesis')
    ev.add_argument('--out', type=Path, required=True)
    ev.set_defaults(handler=_cmd_evaluate)

    plot = sub.add_parser('plot', parents=[solver], help='SVG of the spectrum')
    plot.add_argument('--k', type=int, required=True)
    plot.add_argument('--out', type=Path, required=True)
    plot.set_defaults(handler=_cmd_plot)

    rep = sub.add_parser('replay', help='re-run a command from its manifest')
    rep.add_argument('--manifest', type=Path, required=True)
    rep.set_defaults(handler=_cmd_replay)
    return parser


def _configure_logging(level_name: Optional[str]) -> None:
    name = (level_name or config.LOG_LEVEL).upper()
    level = logging.getLevelName(name)
    if not isinstance(level, int):
        raise UsageError(f"unknown log level {name!r}")
    logging.basicConfig(level=level, format='%(levelname)s %(name)s: %(message)s')
    logging.getLogger().setLevel(level)


def _guard_k(k: int, force: bool) -> None:
    if k > config.MAX_K and not force:
        raise UsageError(f"k={k} exceeds the guard {config.MAX_K}; pass --force to override")


def _load_graph(args) -> Graph:
    return load_edge_list(args.graph, max_n=None if args.force else config.MAX_N)


def _solver_params(args, g: Graph) -> dict[str, Any]:
    args.tol = config.SOLVER_TOL if args.tol is None else args.tol
    args.dense_cutoff = config.DENSE_CUTOFF if args.dense_cutoff is None else args.dense_cutoff
    return {'tol': args.tol, 'dense_cutoff': args.dense_cutoff,
            'max_iter': 10 * g.n if args.max_iter is None else args.max_iter}


def _spectrum(args, g: Graph, pairs: int):
    params = _solver_params(args, g)
    return compute_spectrum(g, pairs, tol=params['tol'], max_iter=params['max_iter'],
                            dense_cutoff=params['dense_cutoff']), params


def _cmd_generate(args) -> CommandResult:
    args.seed = config.env_seed() if args.seed is None else args.seed
    inputs: list[Path] = []
    extra: dict[str, Any] = {}
    planted: Optional[PlantedModel] = None
    if args.model == 'planted':
        groups = args.supergroups
        if groups is None and tuple(args.block_sizes) == _DEFAULT_BLOCKS:
            groups = _DEFAULT_GROUPS
        planted = PlantedModel(block_sizes=args.block_sizes, p_in=args.p_in, p_mid=args.p_mid,
                               p_out=args.p_out, supergroups=groups, seed=args.seed)
        g, blocks = generate_planted(planted)
        extra['supergroups'] = [list(grp) for grp in planted.supergroups]
    elif args.model == 'knn':
        if args.points is None:
            raise UsageError("--model knn needs --points")
        inputs.append(require_file(args.points, 'points'))
        g = knn_graph(read_points(args.points), args.neighbors)
    elif args.model in ('complete', 'cycle', 'path'):
        if args.n is None:
            raise UsageError(f"--model {args.model} needs --n")
        g = {'complete': complete_graph, 'cycle': cycle_graph, 'path': path_graph}[args.model](args.n)
    elif args.model == 'petersen':
        g = petersen_graph()
    else:
        g = two_triangles_bridge()
    if planted is None and (args.partition_out or args.supergroup_out):
        raise UsageError("--partition-out and --supergroup-out need --model planted")
    outputs = [save_edge_list(g, args.out)]
    if planted is not None and args.partition_out:
        outputs.append(write_partition(blocks, args.partition_out))
    if planted is not None and args.supergroup_out:
        groups = Partition(labels=planted.supergroup_labels(), k=len(planted.supergroups))
        outputs.append(write_partition(groups, args.supergroup_out))
    return CommandResult(outputs, inputs, extra, args.seed)


def _cmd_spectrum(args) -> CommandResult:
    _guard_k(args.k, args.force)
    g = _load_graph(args)
    spec, params = _spectrum(args, g, args.k)
    outputs = [write_spectrum_csv(spec, args.out)]
    if args.plot:
        gap_k = args.gap_k if args.gap_k is not None else max(args.k - 1, 1)
        outputs.append(emit_spectrum_plot(spec, gap_k, args.plot))
        params['gap_k'] = gap_k
    params['method'] = spec.method
    return CommandResult(outputs, [args.graph], params)


def _cmd_embed(args) -> CommandResult:
    _guard_k(args.k, args.force)
    g = _load_graph(args)
    spec, params = _spectrum(args, g, args.k)
    emb = embed(g, spec, args.k)
    return CommandResult([write_embedding_csv(emb, args.out)], [args.graph], params)


def _cmd_cluster(args) -> CommandResult:
    if args.k < 2:
        raise UsageError(f"cluster needs k >= 2, got {args.k}")
    _guard_k(args.k, args.force)
    args.seed = config.env_seed() if args.seed is None else args.seed
    if args.method == 'kmeans' and args.trace:
        raise UsageError("--trace applies to the greedy and fast methods")
    g = _load_graph(args)
    spec, params = _spectrum(args, g, args.k)
    emb = embed(g, spec, args.k)
    outputs: list[Path] = []
    if args.method == 'kmeans':
        partition = kmeans_baseline(emb, args.k, args.seed, max_iter=args.kmeans_iter)
    else:
        if args.radius is not None:
            mode, value = RadiusMode.EXPLICIT, args.radius
        elif args.radius_scale is not None:
            mode, value = RadiusMode.SCALED, args.radius_scale
        else:
            mode, value = RadiusMode.THEORY, None
        cfg = GreedyConfig(k=args.k, radius_mode=mode, radius_value=value,
                           epsilon=args.epsilon, seed=args.seed)
        run_method = fast_cluster if args.method == 'fast' else greedy_cluster
        partition, trace = run_method(g, emb, cfg)
        params.update(radius_mode=mode.value, radius=trace.radius, ball_radius=trace.ball_radius,
                      empty_clusters=trace.empty_clusters)
        if args.method == 'fast':
            params['sample_constant'] = cfg.sample_constant
        if args.trace:
            records = TraceFile.validate_python(trace.to_records())
            outputs.append(write_json(TraceFile.dump_python(records, mode='json',
                                                            exclude_defaults=True), args.trace))
    outputs.insert(0, write_partition(partition, args.out))
    return CommandResult(outputs, [args.graph], params, args.seed)


def _cmd_evaluate(args) -> CommandResult:
    if (args.alpha_in is None) != (args.alpha_out is None):
        raise UsageError("--alpha-in and --alpha-out go together")
    args.exact_limit = config.BRUTE_LIMIT if args.exact_limit is None else args.exact_limit
    inputs = [args.graph, require_file(args.partition, 'partition')]
    if args.reference:
        inputs.append(require_file(args.reference, 'reference partition'))
    g = _load_graph(args)
    p = read_partition(args.partition, n=g.n, k=args.k)
    k = p.k
    _guard_k(k, args.force)
    if k + 1 > g.n:
        raise UsageError(f"evaluate needs k+1 <= n eigenpairs, got k={k} and n={g.n}")

    strength = strength_report(g, p, mode='auto', brute_limit=args.exact_limit)
    spec, params = _spectrum(args, g, k + 1)
    emb = embed(g, spec, k)
    gap = gap_report(spec, k, strength)
    payload: dict[str, Any] = {
        'format_version': config.FORMAT_VERSIONS['report'],
        'n': g.n,
        'k': k,
        'per_cluster': [],
        'alpha_out': strength.alpha_out,
        'alpha_in': {'lower': strength.alpha_in_lower, 'upper': strength.alpha_in_upper},
        'lambda': spec.eigenvalues.tolist(),
        'gap': {'k': k, 'lambda_k': gap.lambda_k, 'lambda_k1': gap.lambda_k1,
                'ratio': json_float(gap.ratio), 'cheeger_bound_ok': gap.cheeger_bound_ok},
        'concentration': list(concentration_residuals(emb, p)),
        'pairsum': [],
        'diagnostics': strength.diagnostics,
    }
    clusters = p.clusters()
    for entry in strength.clusters:
        b = entry.bounds
        phi_in = {} if b is None else {'lower': b.phi_in_lower, 'upper': b.phi_in_upper,
                                       'exact': b.phi_in_exact}
        payload['per_cluster'].append({'id': entry.cluster, 'size': entry.size,
                                       'phi_out': entry.phi_out, 'phi_in': phi_in,
                                       'diagnostic': entry.diagnostic})
        if b is not None and b.phi_in_lower > 0:
            check = pairsum_check(g, emb, clusters[entry.cluster], b.phi_in_lower)
            payload['pairsum'].append({'cluster': entry.cluster, 'volume': check.volume,
                                       'bound': check.bound, 'pair_sums': list(check.pair_sums),
                                       'holds': check.holds})
    if strength.alpha_in_lower:
        conc = concentration_check(g, emb, p, spec, strength.alpha_in_lower)
        payload['concentration_bounds'] = {
            'alpha_in': conc.alpha_in, 'lambda_k': conc.lambda_k, 'd_max': conc.d_max,
            'statement_bound': conc.statement_bound, 'proof_bound': conc.proof_bound,
            'holds_statement': conc.holds_statement, 'holds_proof': conc.holds_proof}

    observed = None
    if args.reference:
        q = read_partition(args.reference, n=g.n)
        observed, sigma = partition_distance(p, q)
        payload['distance_to_reference'] = observed
        payload['optimal_sigma'] = list(sigma)
    guarantee = guarantee_report(g, spec, k, strength, args.epsilon)
    payload['guarantee'] = {
        'required_alpha_in': guarantee.required_alpha_in,
        'required_alpha_in_fast': guarantee.required_alpha_in_fast,
        'hypothesis_met': guarantee.hypothesis_met,
        'fast_hypothesis_met': guarantee.fast_hypothesis_met,
        'error_scale': guarantee.error_scale,
        'observed_distance': observed,
    }
    if args.alpha_in is not None:
        verdict = strength.verdict(args.alpha_in, args.alpha_out)
        if verdict is Verdict.UNKNOWN:
            logger.warning("strength verdict is unknown: certified bounds straddle alpha_in=%g",
                           args.alpha_in)
        payload['verdict'] = {'alpha_in': args.alpha_in, 'alpha_out': args.alpha_out,
                              'verdict': verdict.value}
    report = EvaluationReport.model_validate(payload)
    params['exact_limit'] = args.exact_limit
    return CommandResult([write_json(report, args.out)], inputs, params)


def _cmd_plot(args) -> CommandResult:
    _guard_k(args.k, args.force)
    g = _load_graph(args)
    if not 1 <= args.k < g.n:
        raise UsageError(f"plot needs 1 <= k < n={g.n}, got k={args.k}")
    pairs = min(args.k + 5, g.n)
    spec, params = _spectrum(args, g, pairs)
    params['pairs'] = pairs
    return CommandResult([emit_spectrum_plot(spec, args.k, args.out)], [args.graph], params)


def _cmd_replay(args) -> None:
    manifest = read_manifest(require_file(args.manifest, 'manifest'))
    if manifest.subcommand == 'replay' or not manifest.argv:
        raise UsageError("manifest does not describe a replayable command")
    if manifest.tool_version != config.TOOL_VERSION:
        logger.warning("manifest written by %s %s, replaying with %s",
                       manifest.tool, manifest.tool_version, config.TOOL_VERSION)
    for path, digest in manifest.inputs.items():
        if file_digest(require_file(Path(path), 'manifest input')) != digest:
            raise DataError(f"input {path} changed since the manifest was written")
    _execute(manifest.argv)
    changed = [path for path, digest in manifest.outputs.items()
               if file_digest(Path(path)) != digest]
    if changed:
        raise NumericalError(f"replay produced different bytes for {', '.join(changed)}")
    logger.info("Replay of %s reproduced %d outputs", manifest.subcommand, len(manifest.outputs))


def _pinned_argv(argv: Sequence[str], args) -> list[str]:
    pinned = list(argv)
    for dest, flag in _PINNED_FLAGS:
        value = getattr(args, dest, None)
        if value is not None and flag not in argv:
            pinned += [flag, repr(value) if isinstance(value, float) else str(value)]
    return pinned


def _manifest_params(args, extra: dict[str, Any]) -> dict[str, Any]:
    params: dict[str, Any] = {}
    for key, value in sorted(vars(args).items()):
        if key == 'handler':
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, tuple):
            value = [list(v) if isinstance(v, tuple) else v for v in value]
        params[key] = value
    params.update(extra)
    return params


def _execute(argv: Sequence[str]) -> None:
    argv = list(argv)
    args = build_parser().parse_args(argv)
    _configure_logging(args.log_level)
    handler: Callable = args.handler
    result = handler(args)
    if result is None:
        return
    primary = result.outputs[0]
    manifest = build_manifest(args.command, _pinned_argv(argv, args),
                              _manifest_params(args, result.params),
                              result.inputs, result.outputs, result.seed)
    write_manifest(manifest, primary)
    for directory in sorted({path.parent for path in result.outputs}):
        cleanup_stale_temp_files(directory)


def _fail(code: str, err: BaseException) -> None:
    message = ' '.join(str(err).split()) or type(err).__name__
    print(f"error[{code}]: {message}", file=sys.stderr)


def run(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        _execute(argv)
        return 0
    except SystemExit as exc:
        # --help and --version
        return int(exc.code or 0)
    except SpectralError as err:
        logger.debug("Command failed", exc_info=True)
        _fail(err.code, err)
        return err.exit_code
    except OSError as err:
        _fail(DataError.code, err)
        return DataError.exit_code
    except Exception as err:  # pylint: disable=broad-exception-caught
        logger.exception("Unexpected failure")
        _fail(SpectralError.code, err)
        return SpectralError.exit_code


def main() -> None:
    sys.exit(run())


if __name__ == '__main__':
    main()
