from .config import RunConfig, SCENARIOS
from .runner import Runner
from .verify import verify_all
from .main import main

__all__ = ['RunConfig', 'SCENARIOS', 'Runner', 'verify_all', 'main']
