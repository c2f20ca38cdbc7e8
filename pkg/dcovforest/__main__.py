import sys

from dcovforest.cli import main

sys.exit(main())
