import sys

from mccb.cli import main

sys.exit(main())
