import sys

from bellcert.cli import main

sys.exit(main())
