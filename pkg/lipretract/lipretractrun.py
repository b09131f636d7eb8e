#! /usr/bin/env python

import os
import sys
import json
import argparse
import logging
from logging import config

import lipretract
from lipretract import experiment
from lipretract.exceptions import SchemaError


logger = logging.getLogger(__name__)

LIPRETRACT_MODULE = 'lipretract'

LOG_FORMAT = "%(asctime)-15s %(levelname)s %(relativeCreated)dms " \
             "%(filename)s::%(funcName)s():%(lineno)d %(message)s"


class Formatter(argparse.ArgumentDefaultsHelpFormatter,
                argparse.RawDescriptionHelpFormatter):
    pass


def _parse_arguments(desc, args):
    """
    Parses command line arguments
    :param desc:
    :param args:
    :return:
    """
    parser = argparse.ArgumentParser(description=desc,
                                     formatter_class=Formatter)
    parser.add_argument('--config', required=True,
                        help='Experiment configuration file, an INI file '
                             'whose section named by --profile holds '
                             'the experiment')
    parser.add_argument('--profile', default=experiment.DEFAULT_PROFILE,
                        help='Section of the configuration file to run, '
                             'which means configuration under [XXX] '
                             'will be used')
    parser.add_argument('--seed', type=int,
                        help='If set, overrides seed in configuration')
    parser.add_argument('--out',
                        help='Directory where report.json and CSV series '
                             'are written. Overrides output in '
                             'configuration. Directory is created if it '
                             'does not exist')
    parser.add_argument('--workers', type=int,
                        help='If set, overrides workers in configuration. '
                             'Reports do not depend on this value')
    parser.add_argument('--dry-run', dest='dry_run', action='store_true',
                        help='If set, prints resolved parameters of the '
                             'experiment as json and exits without '
                             'running it or writing any file')
    parser.add_argument('--disable_tqdm', action='store_true',
                        help='If set, disables tqdm progress bars')
    parser.add_argument('--logconf', default=None,
                        help='Path to python logging configuration file in '
                             'this format: https://docs.python.org/3/library/'
                             'logging.config.html#logging-config-fileformat '
                             'Setting this overrides -v parameter which uses '
                             ' default logger.')
    parser.add_argument('--verbose', '-v', action='count', default=1,
                        help='Increases verbosity of logger to standard '
                             'error for log messages in this module and'
                             'in ' + LIPRETRACT_MODULE + '. Messages are '
                             'output at these python logging levels '
                             '-v = ERROR, -vv = WARNING, -vvv = INFO, '
                             '-vvvv = DEBUG, -vvvvv = NOTSET (default no '
                             'logging)')
    parser.add_argument('--version', action='version',
                        version=('%(prog)s ' +
                                 lipretract.__version__))

    return parser.parse_args(args)


def _setup_logging(args):
    """
    Sets up logging based on parsed command line arguments.
    If args.logconf is set use that configuration otherwise look
    at args.verbose and set logging for this module and the
    package named by LIPRETRACT_MODULE constant
    :param args: parsed command line arguments from argparse
    :raises AttributeError: If args is None or args.logconf is None
    :return: None
    """

    if args.logconf is None:
        level = (50 - (10 * args.verbose))
        logging.basicConfig(format=LOG_FORMAT,
                            level=level)
        logging.getLogger(LIPRETRACT_MODULE).setLevel(level)
        logger.setLevel(level)
        return

    # logconf was set use that file
    logging.config.fileConfig(args.logconf,
                              disable_existing_loggers=False)


class LipRetractRunner(object):
    """
    Class to run experiments
    """

    def __init__(self, args, out_stream=sys.stdout):
        """

        :param args: parsed command line arguments
        :param out_stream: where --dry-run writes the plan
        """
        self._args = args
        self._out = out_stream
        self._config = None

    def _load_config(self):
        """
        Loads configuration and applies command line overrides
        :return:
        """
        conf = experiment.load_config(self._args.config,
                                      profile=self._args.profile)
        self._config = conf.with_overrides(seed=self._args.seed,
                                           workers=self._args.workers,
                                           output=self._args.out)

    def run(self):
        """
        Runs the configured experiment

        :raises SchemaError: if configuration is invalid
        :return: 0 if every asserted bound passed, 1 otherwise
        """
        self._load_config()
        if self._args.dry_run is True:
            plan = experiment.describe(self._config)
            plan = experiment.finite_or_none(plan)
            self._out.write(json.dumps(plan, indent=2, sort_keys=True,
                                       allow_nan=False,
                                       default=experiment.to_json) + '\n')
            return 0

        logger.info('Running ' + self._config.kind + ' with seed ' +
                    str(self._config.seed))
        result = experiment.run_experiment(
            self._config, disable_tqdm=self._args.disable_tqdm)
        outdir = os.path.abspath(self._config.output)
        experiment.write_report(result, self._config, outdir=outdir)
        if result.passed is True:
            logger.info(self._config.kind + ' PASS')
            return 0
        logger.error(self._config.kind + ' FAIL, see ' + outdir)
        return 1


def main(args):
    """
    Main entry point for program
    :param args:
    :return:
    """
    desc = """
    Version {version}

    Runs Lipschitz retraction experiments described in a
    configuration file passed in via --config.

    The configuration file should be formatted as follows:

    [<value in --profile (default {profile})>]

    kind = <one of {kinds}>
    seed = <integer>

    # Optional keys, see documentation for the full list
    dims = 1,1,1,1
    schedule = default

    Exit code is 0 if all asserted bounds pass, 1 if the
    experiment fails (report is still written) and 2 if the
    configuration is invalid or an unexpected error occurred.
    A counterexample-audit passes when the candidate fixes K
    and every block estimate is finite, it is evidence and
    not a bound. Non-finite report values are written as null.
    """.format(profile=experiment.DEFAULT_PROFILE,
               kinds=', '.join(experiment.KINDS),
               version=lipretract.__version__)
    theargs = _parse_arguments(desc, args[1:])
    theargs.program = args[0]
    theargs.version = lipretract.__version__

    try:
        _setup_logging(theargs)
        runner = LipRetractRunner(theargs)
        return runner.run()
    except SchemaError as e:
        logger.error('Invalid configuration: ' + str(e))
        return 2
    except Exception as e:
        logger.exception('Caught exception: ' + str(e))
        return 2
    finally:
        logging.shutdown()


if __name__ == '__main__':  # pragma: no cover
    sys.exit(main(sys.argv))
