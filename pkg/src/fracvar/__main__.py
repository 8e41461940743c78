import sys

from fracvar.cli import main

sys.exit(main())
