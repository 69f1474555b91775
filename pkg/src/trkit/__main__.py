import sys

from trkit.cli import main

sys.exit(main())
