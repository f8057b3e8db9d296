import sys

from callrate.cli import main

sys.exit(main())
