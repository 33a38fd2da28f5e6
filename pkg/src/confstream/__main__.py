import sys

from confstream.cli import main

sys.exit(main())
