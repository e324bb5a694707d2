import sys

from fbnc.cli import main

sys.exit(main())
