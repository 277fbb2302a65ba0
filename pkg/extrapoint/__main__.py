"""Allow ``python -m extrapoint``."""

import sys

from extrapoint.main import main

sys.exit(main())
