import sys
from pathlib import Path

# allow importing the shared oracles module from any test file
sys.path.insert(0, str(Path(__file__).parent))
