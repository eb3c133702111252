import sys

from twrsim.cli import main

sys.exit(main())
