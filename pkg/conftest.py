import os
import sys

# flat top-level packages (agents, config, ...) import from the repo root
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))
