from .cli import scan_main
import sys

sys.exit(scan_main())
