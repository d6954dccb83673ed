#!/usr/bin/env python3
"""
Run the mock chat-completion endpoint
"""
import sys
from pathlib import Path

# Add the project root to Python path
project_root = Path(__file__).parent.parent
sys.path.insert(0, str(project_root))

from config import logging_config
from src.logging_setup import configure_logging
from src.mock_endpoint import main

if __name__ == "__main__":
    configure_logging(logging_config)
    main()
