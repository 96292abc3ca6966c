import sys

from faithcheck.cli import main

sys.exit(main())
