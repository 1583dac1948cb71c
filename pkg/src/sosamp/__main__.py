import sys

from sosamp.cli import main

sys.exit(main())
