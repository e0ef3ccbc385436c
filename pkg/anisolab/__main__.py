"""Allow ``python -m anisolab``."""
import sys

from anisolab.main import main

sys.exit(main())
