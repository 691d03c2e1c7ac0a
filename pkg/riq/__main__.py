import sys

from riq.cli import main

sys.exit(main())
