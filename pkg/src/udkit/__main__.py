import sys

from udkit.cli import main

sys.exit(main())
