import sys

from hhjax.cli import main

sys.exit(main())
