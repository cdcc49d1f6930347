import sys

from pufferfish.cli import main

sys.exit(main())
