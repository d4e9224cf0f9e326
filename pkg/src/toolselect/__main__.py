import sys

from toolselect.cli import main

sys.exit(main())
