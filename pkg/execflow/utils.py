"""
General utilities and convenience functions.
"""
import copy
import hashlib
import json
import logging
import os
import configparser
from pathlib import Path

import chevron

# logger
logger = logging.getLogger("execflow")


################################################################################
# Validation
################################################################################
def check_valid_fields(obj: dict, valid_fields: list) -> None:
    """
    Checks whether the fields in the specified dict are valid, according to the list of valid fields. If not, raises a ValueError.
    """
    for key in obj:
        if key not in valid_fields:
            raise ValueError(f"Invalid key {key} in dictionary. Valid keys are: {valid_fields}")


################################################################################
# Rendering
################################################################################
def render_template(template_name: str, rendering_configs: dict) -> str:
    """
    Renders one of the mustache templates shipped in the `templates` folder of the package.
    """
    template_path = os.path.join(os.path.dirname(__file__), f'templates/{template_name}')
    with open(template_path, 'r', encoding="utf-8") as f:
        return chevron.render(f.read(), rendering_configs)


def format_number(value, float_format: str = ".12g", na: str = "NA") -> str:
    """
    Formats a scalar for tab-separated output. None, NaN and infinities become the NA marker.
    """
    if value is None:
        return na
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, (int,)) and not isinstance(value, bool):
        return str(value)
    try:
        value = float(value)
    except (TypeError, ValueError):
        return str(value)
    if value != value or value in (float("inf"), float("-inf")):
        return na
    return format(value, float_format)


################################################################################
# IO and startup utilities
################################################################################
_config = None

def read_config_file(use_cache=True, verbose=False) -> configparser.ConfigParser:
    global _config
    if use_cache and _config is not None:
        # if we have a cached config and accept that, return it
        return _config

    else:
        config = configparser.ConfigParser()

        # Read the default values in the module directory.
        config_file_path = Path(__file__).parent.absolute() / 'config.ini'
        print(f"Looking for default config on: {config_file_path}") if verbose else None
        if config_file_path.exists():
            config.read(config_file_path)
            _config = config
        else:
            raise ValueError(f"Failed to find default config on: {config_file_path}")

        # Now, let's override any specific default value, if there's a custom .ini config.
        # Try the directory of the current main program
        config_file_path = Path.cwd() / "config.ini"
        if config_file_path.exists():
            print(f"Found custom config on: {config_file_path}") if verbose else None
            config.read(config_file_path) # this only overrides the values that are present in the custom config
            _config = config
            return config
        else:
            print(f"No custom config on: {config_file_path}, using defaults only.") if verbose else None

        return config

def pretty_print_config(config):
    print()
    print("=================================")
    print("Current execflow configuration   ")
    print("=================================")
    for section in config.sections():
        print(f"[{section}]")
        for key, value in config.items(section):
            print(f"{key} = {value}")
        print()

def start_logger(config: configparser.ConfigParser):
    # create logger
    logger = logging.getLogger("execflow")
    log_level = config['Logging'].get('LOGLEVEL', 'INFO').upper()
    logger.setLevel(level=log_level)

    # avoid duplicated handlers when the package is reloaded
    if any(getattr(handler, "_execflow_handler", False) for handler in logger.handlers):
        return

    # create console handler and set level
    ch = logging.StreamHandler()
    ch.setLevel(log_level)
    ch._execflow_handler = True

    # create formatter
    formatter = logging.Formatter('%(asctime)s - %(name)s - %(levelname)s - %(message)s')

    # add formatter to ch
    ch.setFormatter(formatter)

    # add ch to logger
    logger.addHandler(ch)


################################################################################
# Serialization
################################################################################
class JsonSerializableRegistry:
    """
    A mixin for records that are saved as JSON and restored later.

    Subclasses list the attributes they save in `serializable_attributes` and are
    registered by class name, so that `from_json` rebuilds the class that was saved.
    """

    class_mapping = {}
    serializable_attributes = []

    def __init_subclass__(cls, **kwargs):
        super().__init_subclass__(**kwargs)
        JsonSerializableRegistry.class_mapping[cls.__name__] = cls

    def to_json(self, suppress: list = None) -> dict:
        """
        Returns the saved attributes as a JSON-compatible dict, tagged with the class name.
        """
        suppress = set(suppress or [])
        result = {"json_serializable_class_name": self.__class__.__name__}
        for attr in self.serializable_attributes:
            if attr not in suppress:
                result[attr] = copy.deepcopy(getattr(self, attr, None))
        return result

    @classmethod
    def from_json(cls, json_dict_or_path):
        """
        Rebuilds a record from a dict or from a JSON file written with `to_json`.

        Raises:
            ValueError: when the saved class is unknown or not a `cls`, or when the
                data carries attributes the class does not save.
        """
        if isinstance(json_dict_or_path, (str, os.PathLike)):
            with open(json_dict_or_path, 'r', encoding="utf-8") as f:
                json_dict = json.load(f)
        else:
            json_dict = dict(json_dict_or_path)

        if not isinstance(json_dict, dict):
            raise ValueError(f"Expected a JSON object, got {type(json_dict).__name__}.")

        class_name = json_dict.pop("json_serializable_class_name", cls.__name__)
        target_class = cls.class_mapping.get(class_name)
        if target_class is None or not issubclass(target_class, cls):
            raise ValueError(f"Cannot restore a '{class_name}' record as {cls.__name__}.")
        check_valid_fields(json_dict, target_class.serializable_attributes)

        # __init__ is bypassed; _post_deserialization_init completes the instance
        instance = target_class.__new__(target_class)
        for attr in target_class.serializable_attributes:
            setattr(instance, attr, copy.deepcopy(json_dict.get(attr)))
        instance._post_deserialization_init()
        return instance

    def _post_deserialization_init(self) -> None:
        pass


################################################################################
# Other
################################################################################
def file_digest(file_path: str) -> str:
    """
    Returns the sha256 digest of the file contents.
    """
    digest = hashlib.sha256()
    with open(file_path, 'rb') as f:
        for chunk in iter(lambda: f.read(1 << 20), b''):
            digest.update(chunk)
    return digest.hexdigest()
