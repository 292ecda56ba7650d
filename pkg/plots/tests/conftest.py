import os
import sys

# The plotting scripts are standalone files, not an installed package.
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))
