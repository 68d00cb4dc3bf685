#!/usr/bin/env python3
"""
Hybrid Indexing Benchmark - Main Entry Point

This script provides a command-line interface to generate synthetic corpora,
run the indexing pipeline in ACL-only or hybrid mode, and compare the results.
"""

import argparse
import logging
import os
import sys

from src.bench.corpus import generate_corpus
from src.bench.errors import BenchError
from src.bench.experiment import ExperimentConfig, run_experiment
from src.bench.report import RESULTS_FILE, load_metrics, report, write_csv
from src.pipeline.agents import Mode
from src.utils.common_utils import setup_logging
from src.utils.env_loader import load_env_variables, log_level_override
from src.utils.settings import load_settings

logger = logging.getLogger('hybrid-indexer.cli')


def parse_overrides(pairs):
    """['W=12', 'H=2.5'] -> {'W': '12', 'H': '2.5'}"""
    overrides = {}
    for pair in pairs or []:
        key, sep, value = pair.partition('=')
        if not sep or not key:
            raise argparse.ArgumentTypeError(f"Expected key=value, got {pair!r}")
        overrides[key.strip()] = value.strip()
    return overrides


def parse_arguments(argv=None):
    """Parse command line arguments"""
    parser = argparse.ArgumentParser(description='Hybrid agent/component indexing benchmark')
    parser.add_argument('--config', type=str, help='Config file (default: config/config.yaml or HYBRID_CONFIG)')

    subparsers = parser.add_subparsers(dest='command', help='Command to run')

    # Experiment command
    run_parser = subparsers.add_parser('run', help='Run one mode at one node count')
    run_parser.add_argument('--mode', type=str, choices=['acl', 'hybrid'], required=True, help='Data transfer mode')
    run_parser.add_argument('--nodes', type=int, default=1, help='Number of node processes (1-4)')
    run_parser.add_argument('--docs', type=int, default=3000, help='Documents to index per repeat')
    run_parser.add_argument('--seed', type=int, default=7, help='Corpus seed')
    run_parser.add_argument('--repeats', type=int, help='Repeats (default from config)')
    run_parser.add_argument('--out', type=str, help='Output directory (default from config)')
    run_parser.add_argument('--corpus', type=str, help='Existing corpus directory to use')
    run_parser.add_argument('--set', dest='overrides', action='append', metavar='KEY=VALUE',
                            help='Override a setting, e.g. W=12 or pipeline.batch_size=8')

    # Corpus command
    corpus_parser = subparsers.add_parser('corpus', help='Generate a synthetic corpus')
    corpus_parser.add_argument('--n', type=int, required=True, help='Number of documents')
    corpus_parser.add_argument('--seed', type=int, default=7, help='Generator seed')
    corpus_parser.add_argument('--out', type=str, required=True, help='Corpus directory')

    # Report command
    report_parser = subparsers.add_parser('report', help='Compare saved runs')
    report_parser.add_argument('--in', dest='in_dir', type=str, required=True, help='Directory holding run metrics')

    return parser.parse_args(argv)


def run_benchmark(args, settings):
    """Run one configuration, rewrite results.csv and print the comparison when both modes are present"""
    out_dir = args.out or settings.bench.output_dir
    config = ExperimentConfig(
        mode=Mode.parse(args.mode),
        nodes=args.nodes,
        doc_target=args.docs,
        corpus_seed=args.seed,
        repeats=args.repeats or settings.bench.repeats,
        out_dir=out_dir,
        settings=settings,
        corpus_dir=args.corpus,
    )
    metrics = run_experiment(config)
    print(f"{config.label}: mean wall time {metrics.mean_wall_time:.3f}s, "
          f"mean ACL messages {metrics.mean_acl_msgs:.1f}, "
          f"mean backchannel bytes {metrics.mean_backchannel_bytes:.1f}")
    saved = load_metrics(out_dir)
    if len({m.mode for m in saved}) > 1:
        print(report(saved, out_dir))
    else:
        path = write_csv(saved, os.path.join(out_dir, RESULTS_FILE))
        logger.info(f"Wrote {path}")


def run_report(in_dir):
    """Print the comparison of every run saved in a directory and rewrite its results.csv"""
    metrics = load_metrics(in_dir)
    print(report(metrics, in_dir))


def main(argv=None):
    args = parse_arguments(argv)
    load_env_variables()
    try:
        overrides = parse_overrides(getattr(args, 'overrides', None))
        settings = load_settings(args.config, overrides)
    except (argparse.ArgumentTypeError, KeyError) as e:
        print(f"Error: {e.args[0]}", file=sys.stderr)
        return 2

    log_file = None
    if args.command == 'run':
        out_dir = args.out or settings.bench.output_dir
        os.makedirs(out_dir, exist_ok=True)
        log_file = os.path.join(out_dir, 'bench.log')
    setup_logging(log_level_override() or settings.logging.level, log_file or settings.logging.file)

    try:
        if args.command == 'run':
            run_benchmark(args, settings)
        elif args.command == 'corpus':
            path = generate_corpus(args.n, args.seed, args.out)
            print(f"Generated {args.n} documents in {path}")
        elif args.command == 'report':
            run_report(args.in_dir)
        else:
            parse_arguments(['--help'])
    except BenchError as e:
        logger.error(f"{type(e).__name__}: {str(e)}")
        return 1
    except ValueError as e:
        logger.error(f"Invalid arguments: {str(e)}")
        return 2
    return 0


if __name__ == '__main__':
    sys.exit(main())
