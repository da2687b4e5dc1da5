import sys

from mros.main import main

sys.exit(main())
