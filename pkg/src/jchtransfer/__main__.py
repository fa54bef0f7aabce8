import sys

from jchtransfer.cli import main

sys.exit(main())
