import os
import yaml
import logging

LOGGER_NAME = 'hybrid-indexer'
LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

logger = logging.getLogger(LOGGER_NAME)


def setup_logging(level='INFO', log_file=None):
    """
    Configure the project logger once per process

    Args:
        level (str): Log level name
        log_file (str, optional): Additional file to log to

    Returns:
        logging.Logger: The configured project logger
    """
    logger.setLevel(getattr(logging, str(level).upper(), logging.INFO))
    if not logger.handlers:
        stream = logging.StreamHandler()
        stream.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(stream)
    if log_file:
        os.makedirs(os.path.dirname(os.path.abspath(log_file)), exist_ok=True)
        file_handler = logging.FileHandler(log_file)
        file_handler.setFormatter(logging.Formatter(LOG_FORMAT))
        logger.addHandler(file_handler)
    logger.propagate = False
    return logger


def load_config(config_path):
    """
    Load configuration from a YAML file

    Args:
        config_path (str): Path to the configuration file

    Returns:
        dict: Configuration as a dictionary
    """
    if not os.path.exists(config_path):
        logger.warning(f"Config file not found: {config_path}")
        return {}

    try:
        with open(config_path, 'r') as file:
            config = yaml.safe_load(file)
        logger.info(f"Loaded configuration from {config_path}")
        return config or {}
    except Exception as e:
        logger.error(f"Error loading config: {str(e)}")
        return {}


def parse_scalar(text):
    """
    Parse a command-line value the way YAML would ('5' -> 5, 'true' -> True)

    Args:
        text (str): Raw value

    Returns:
        The parsed scalar, or the original string
    """
    try:
        value = yaml.safe_load(text)
    except yaml.YAMLError:
        return text
    if isinstance(value, (str, int, float, bool)):
        return value
    return text
