import sys

from multibaker.cli import main

sys.exit(main())
