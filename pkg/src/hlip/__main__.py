import sys

from hlip.cli import main

sys.exit(main())
