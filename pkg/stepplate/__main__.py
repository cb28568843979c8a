import sys

from stepplate.cli import main

sys.exit(main())
