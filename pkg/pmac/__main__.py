import sys

from pmac.cli import main

sys.exit(main())
