"""Module entry point: ``python -m qonnlab <subcommand> ...``."""

import sys

from .cli import main

sys.exit(main())
