import sys

from cotest.harness.cli import main

sys.exit(main())
