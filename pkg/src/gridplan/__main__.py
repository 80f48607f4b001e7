from gridplan.cli import main
import sys

sys.exit(main())
