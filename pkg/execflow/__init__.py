from execflow import utils

config = utils.read_config_file()
utils.start_logger(config)

__version__ = "0.1.0"
