import sys

from unfoldpr.harness.cli import main


sys.exit(main())
