import logging
import os
import sys
from logging.handlers import RotatingFileHandler

from src.core.config import settings

# Ensure log directory exists
os.makedirs(settings.LOG_DIR, exist_ok=True)

LOG_FILE_PATH = os.path.join(settings.LOG_DIR, "siegelflow.log")

logger = logging.getLogger()
logger.setLevel(settings.LOG_LEVEL)

formatter = logging.Formatter(
    "[%(asctime)s] [%(levelname)s] - %(message)s", datefmt="%Y-%m-%d %H:%M:%S"
)

# Console handler: stdout carries JSON reports, so logs go to stderr
console_handler = logging.StreamHandler(sys.stderr)
console_handler.setFormatter(formatter)
console_handler.setLevel(settings.LOG_LEVEL)

file_handler = RotatingFileHandler(
    LOG_FILE_PATH,
    maxBytes=5_000_000,
    backupCount=3,
    encoding="utf-8",
)
file_handler.setFormatter(formatter)
file_handler.setLevel(settings.LOG_LEVEL)

# Add handlers only if they haven't been added
if not logger.hasHandlers():
    logger.addHandler(console_handler)
    logger.addHandler(file_handler)

logging = logger
