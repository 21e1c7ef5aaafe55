"""``mrqsim <field|gate|purify|bell|t1had> --scenario PATH [--out DIR] [--seed N] [--threads N]``

Exit codes: 0 success, 2 configuration error, 3 numerical-invariant
violation. Errors are reported as a single JSON record on stderr.
"""

import argparse
import json
import os
import sys

COMMANDS = ("field", "gate", "purify", "bell", "t1had")
EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


class _UsageError(Exception):
    pass


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be >= 1")
    return v


def build_parser():
    p = _Parser(prog="mrqsim", description="MRI-based quantum computing simulator.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--scenario", required=True, help="scenario file (YAML or JSON)")
    p.add_argument("--out", help="directory for result JSON and CSV trajectories")
    p.add_argument("--seed", type=_u64, help="override ensemble.seed")
    p.add_argument("--threads", type=_positive, help="worker threads for ensemble kernels")
    return p


def _emit_error(record):
    sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
    return record["exit_code"]


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except _UsageError as exc:
        return _emit_error({"schema": "mrqsim.error/1", "exit_code": EXIT_CONFIG,
                            "kind": "usage_error", "message": str(exc)})
    if args.threads and "numba" not in sys.modules:
        # numba fixes its maximum pool size when first imported
        os.environ["NUMBA_NUM_THREADS"] = str(args.threads)

    from .. import _accel
    from ..errors import ConfigurationError, MrqsimError, NumericalInvariantError
    from .commands import PREPARE
    from .results import RunResult, error_record, write_outputs
    from .scenario import input_digest, load_scenario

    try:
        scenario, document = load_scenario(args.scenario)
        seed = scenario.ensemble.seed if args.seed is None else args.seed
        run = PREPARE[args.command](scenario, seed)
        _accel.set_threads(args.threads)
        result, artifacts = run()
    except ConfigurationError as exc:
        return _emit_error(error_record(EXIT_CONFIG, "configuration_error", str(exc),
                                        key=exc.key, line=exc.line))
    except NumericalInvariantError as exc:
        return _emit_error(error_record(EXIT_INVARIANT, "numerical_invariant_violation",
                                        str(exc), details=exc.details))
    except MrqsimError as exc:
        # domain/compilation errors surfaced by a valid-looking scenario
        return _emit_error(error_record(EXIT_CONFIG, type(exc).__name__, str(exc)))

    rr = RunResult(args.command, input_digest(document, seed), seed, scenario.name,
                   result, artifacts)
    if args.out:
        write_outputs(rr, args.out)
    sys.stdout.write(rr.to_json())
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
