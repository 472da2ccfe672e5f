# This is the main entry point that ties everything together.
import sys

from api.cli import cli_main

if __name__ == "__main__":
    sys.exit(cli_main())
