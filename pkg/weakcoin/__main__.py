"""weakcoin - bounds, certificates and cheating searches for weak coin-flipping protocols."""

import sys

from weakcoin.cli import main


if __name__ == "__main__":
    sys.exit(main())
