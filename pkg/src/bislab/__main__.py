import sys

from bislab.cli import main

sys.exit(main())
