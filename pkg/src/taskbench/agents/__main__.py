"""Run a bundled agent as a submission: ``python -m taskbench.agents [name]``."""
import sys

from . import run_bundled

if __name__ == "__main__":
    sys.exit(run_bundled(sys.argv[1] if len(sys.argv) > 1 else "passive_mapper"))
