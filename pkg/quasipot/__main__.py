import sys

from quasipot.cli import main

sys.exit(main())
