import json
import os
import sys

import click

from src.Exceptions import *
from src.ITEConfig import RunConfig
from src.ITERunner import EXIT_ERROR, EXIT_FAIL, EXIT_PASS, ITERunner
from src.LoggingSetup import *


def print_header(config: RunConfig):
    print(f"\n{Colors.CYAN}{Colors.BOLD}itespec - interior transmission eigenvalue toolkit{Colors.RESET}")
    print(f"{Colors.CYAN}task: {config.task}   seed: {config.seed}   output: {config.output_dir}{Colors.RESET}\n")


def print_separator():
    print("=" * 60)


def print_error(e: ITEError):
    print(f"\n{Colors.RED}❌ {e.__class__.__name__}: {e.message}{Colors.RESET}")
    print(json.dumps(e.to_dict(), indent=2, default=str))


def cmd_run(config: RunConfig) -> int:
    """Run the configured task and write its artifacts"""
    print_header(config)
    runner = ITERunner(config)
    result = runner.run()

    print_separator()
    if result.passed:
        print(f"{Colors.GREEN}{Colors.BOLD}✅ {result.task} PASSED{Colors.RESET}")
    else:
        print(f"{Colors.YELLOW}{Colors.BOLD}⚠️ {result.task} FAILED its acceptance checks{Colors.RESET}")
    print_separator()
    print(f"Output: {result.output_dir}")
    print(f"Files: summary.json + {len(result.files)} artifacts")
    for key, value in sorted(result.metrics.items()):
        if not isinstance(value, (dict, list)):
            print(f"  {key}: {value}")
    print_separator()
    print()
    return result.exit_code


def cmd_verify(config: RunConfig) -> int:
    """Re-check the written artifacts of a finished run"""
    print_header(config)
    ok, problems = ITERunner(config).verify()

    print_separator()
    if ok:
        print(f"{Colors.GREEN}{Colors.BOLD}✅ ARTIFACTS VERIFIED{Colors.RESET}")
    else:
        print(f"{Colors.RED}{Colors.BOLD}❌ VERIFICATION FAILED{Colors.RESET}")
        for problem in problems:
            print(f"  - {problem}")
    print_separator()
    print()
    return EXIT_PASS if ok else EXIT_FAIL


@click.command()
@click.argument("config_path", type=click.Path(dir_okay=False))
@click.option("--threads", type=int, default=os.cpu_count() or 1, show_default=True,
              help="Worker threads for grid scans and batches")
@click.option("--verify", "verify_only", is_flag=True, help="Re-check the acceptance assertions from written artifacts")
@click.option("--log-file", type=click.Path(dir_okay=False), default=None, help="Also log to this file")
@click.option("--progress/--no-progress", default=False, help="Progress bars on long scans")
def main(config_path, threads, verify_only, log_file, progress):
    """Run one itespec task described by CONFIG_PATH (YAML or JSON)"""
    setup_logging(log_file=log_file)
    try:
        config = RunConfig.from_file(config_path)
        setup_logging(level=config.log_level, log_file=log_file)
        config.solver.threads = max(1, threads)
        config.solver.progress = progress
        code = cmd_verify(config) if verify_only else cmd_run(config)
    except ITEError as e:
        print_error(e)
        code = EXIT_ERROR
    except OSError as e:
        print(f"\n{Colors.RED}❌ Cannot read or write artifacts: {e}{Colors.RESET}")
        code = EXIT_ERROR
    except KeyboardInterrupt:
        print("\n\nInterrupted by user")
        code = 130
    sys.exit(code)


if __name__ == "__main__":
    main()
