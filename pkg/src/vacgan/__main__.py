import sys

from vacgan.cli import main

sys.exit(main())
