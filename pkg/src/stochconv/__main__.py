import sys

from stochconv.cli import main

sys.exit(main())
