import argparse
import sys
import time
from .errors import DeepBFError, UsageError
from .logger import logger

class ArgumentParser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f'{self.prog}: {message}')

def parse_argument(argv):
    parser = ArgumentParser(prog = 'deepbf', description = 'DeepBF: Bayes factor estimation between simulator-defined models by classification')
    subparsers = parser.add_subparsers(dest = 'command', parser_class = ArgumentParser)

    p = subparsers.add_parser('simulate', help = 'simulate datasets from one model of the pair')
    p.add_argument('--config', type = str, required = True, help = 'run configuration JSON file')
    p.add_argument('--o',      type = str, required = True, help = 'output CSV file path')
    p.add_argument('--model',  type = int, default  = 1,    choices = (1, 2), help = 'model to simulate from, 1 by default')
    p.add_argument('--count',  type = int, default  = 100,  help = 'number of datasets, 100 by default')
    p.add_argument('--n',      type = int,                  help = 'dataset length, taken from the config by default')

    p = subparsers.add_parser('train', help = 'train a discriminator and write a checkpoint')
    p.add_argument('--config',    type = str, required = True, help = 'run configuration JSON file')
    p.add_argument('--o',         type = str, required = True, help = 'output checkpoint path')
    p.add_argument('--n',         type = int,                  help = 'dataset length, taken from the config by default')
    p.add_argument('--direction', type = int, choices = (1, 2), help = '1 to estimate BF_12, 2 for BF_21, taken from the config by default')

    p = subparsers.add_parser('estimate', help = 'estimate Bayes factors of observed datasets')
    p.add_argument('--checkpoint',     type = str,   required = True, help = 'checkpoint over the full data')
    p.add_argument('--data',           type = str,   required = True, help = 'observed-data CSV, one dataset per row')
    p.add_argument('--o',              type = str,   required = True, help = 'output CSV file path')
    p.add_argument('--eps',            type = float,                  help = 'transform offset, taken from the checkpoint by default')
    p.add_argument('--reference_sims', type = int,   default  = 1000, help = 'simulated datasets per model for the surprise tails, 1000 by default')
    p.add_argument('--partial',        type = str,                    help = 'reverse-direction checkpoint over the training portion; adds PBF, ABF and GBF')
    p.add_argument('--split',          type = str,                    help = 'comma-separated training-portion indices for PBF, the first n_x by default')
    p.add_argument('--subset_limit',   type = int,   default  = 1000, help = 'maximum number of training subsets for ABF/GBF, 1000 by default')
    p.add_argument('--double',         type = str,                    help = 'checkpoint over the doubled data; adds the posterior BF')
    p.add_argument('--reverse',        type = str,                    help = 'reverse-direction checkpoint over the full length, used with --double')

    p = subparsers.add_parser('abc', help = 'stratified rank-based ABC estimates')
    p.add_argument('--config', type = str, required = True, help = 'run configuration JSON file')
    p.add_argument('--data',   type = str, required = True, help = 'query CSV, one dataset per row')
    p.add_argument('--o',      type = str, required = True, help = 'output CSV file path')

    p = subparsers.add_parser('evaluate', help = 'estimation and inference metrics on simulated datasets')
    p.add_argument('--config',     type = str, required = True, help = 'run configuration JSON file')
    p.add_argument('--o',          type = str, required = True, help = 'output directory')
    p.add_argument('--checkpoint', type = str,                  help = 'checkpoint to evaluate with --method deepbf')
    p.add_argument('--method',     type = str, choices = ('deepbf', 'abc'), help = 'estimator to evaluate, taken from the config by default')
    p.add_argument('--n',          type = int,                  help = 'dataset length for --method abc, taken from the config by default')

    p = subparsers.add_parser('criticize', help = 'posterior-predictive model criticism')
    p.add_argument('--config',  type = str, required = True, help = 'run configuration JSON file')
    p.add_argument('--o',       type = str, required = True, help = 'output directory')
    p.add_argument('--data',    type = str,                  help = 'observed-data CSV')
    p.add_argument('--row',     type = int, default  = 0,    help = 'row of --data to criticize, 0 by default')
    p.add_argument('--outlier', action = 'store_true',       help = 'criticize the planted outlier dataset of the pair instead of --data')
    p.add_argument('--model',   type = int, choices = (1, 2), help = 'model to criticize, taken from the config by default')
    p.add_argument('--n',       type = int,                  help = 'outlier dataset length, taken from the config by default')

    p = subparsers.add_parser('report', help = 'render KDE, ROC and scatter figures as SVG')
    p.add_argument('--samples', type = str, required = True, help = 'samples.csv written by evaluate')
    p.add_argument('--o',       type = str, required = True, help = 'output directory')

    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_help(sys.stderr)
        raise UsageError('no command given')
    return args

def run_command(argv = None) -> int:
    '''Run one subcommand; returns the process exit code.'''
    try:
        args = parse_argument(sys.argv[1:] if argv is None else list(argv))
    except UsageError as error:
        logger.error(error.reason)
        return error.code
    except SystemExit as exit_:
        # --help
        return exit_.code or 0

    from .commands import COMMANDS
    time0 = time.time()
    try:
        COMMANDS[args.command](args)
    except DeepBFError as error:
        logger.error(f'deepbf-{args.command} failed: {error.reason}')
        return error.code
    except FileNotFoundError as error:
        logger.error(f'deepbf-{args.command} failed: {error}')
        return 2
    time1 = time.time()
    logger.info(f'Execute deepbf-{args.command} successfully in {time1 - time0:.2f}s')
    return 0

def main():
    sys.exit(run_command())

if __name__ == '__main__':
    main()
