import sys

from lattice_addressing.cli import main

sys.exit(main())
