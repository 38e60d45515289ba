"""``python -m afkp``."""

import sys

from .cli import main

sys.exit(main())
