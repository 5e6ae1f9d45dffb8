import sys

from htaa.harness.cli import main

sys.exit(main())
