import sys

from casimir_worldline._cli import main

sys.exit(main())
