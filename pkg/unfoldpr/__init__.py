"""
This module builds shared parts for other modules.
"""

# --------------------------------------------------------------------------------
# Imports
# --------------------------------------------------------------------------------

import logging


# --------------------------------------------------------------------------------
# Package Metadata
# --------------------------------------------------------------------------------

__version__ = "0.1.0"


# --------------------------------------------------------------------------------
# Environment and Defaults
# --------------------------------------------------------------------------------

default_config_path = "config.json"
seed_env_var = "PR_SEED"
config_env_var = "PR_CONFIG"


# --------------------------------------------------------------------------------
# Logging
# --------------------------------------------------------------------------------

logging.getLogger(__name__).addHandler(logging.NullHandler())
