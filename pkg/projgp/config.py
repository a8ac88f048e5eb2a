from __future__ import annotations

import os
import pathlib
from typing import TYPE_CHECKING, Any

import yaml

from .utils.files import get_base_dir

if TYPE_CHECKING:
    from _typeshed import StrPath

__all__ = (
    "CONFIG",
    "Config",
    "load_config",
    "load_global_config",
)


BASE_DIR = get_base_dir()


def env_var_constructor(loader: yaml.Loader, node: yaml.ScalarNode) -> str | None:
    if node.id != "scalar":
        raise TypeError("Expected a string")

    value = loader.construct_scalar(node)
    key = str(value)

    return os.getenv(key)


class Config(yaml.YAMLObject):
    yaml_tag = "!Config"

    def __init__(self, **kwargs: Any) -> None:
        for name, value in kwargs.items():
            setattr(self, name, value)

    def update(self, other: Config) -> None:
        for key in other.__dict__:
            mine = self.__dict__.get(key)
            theirs = other.__dict__[key]
            if isinstance(theirs, Config) and isinstance(mine, Config):
                mine.update(theirs)
                other.__dict__[key] = mine

        self.__dict__ |= other.__dict__

    def get(self, name: str, default: Any = None) -> Any:
        value = getattr(self, name, default)
        return default if value is None else value

    def __or__(self, other: Config) -> Config:
        config = Config()
        config.__dict__ |= self.__dict__ | other.__dict__
        return config

    def __repr__(self) -> str:
        return f'<Config {" ".join(f"{key}={repr(value)}" for key, value in self.__dict__.items())}>'


CONFIG: Any = Config()


def load_config(file: StrPath) -> Config:
    with open(file, encoding="utf-8") as f:
        return yaml.load(f, Loader=yaml.FullLoader)


def update_config(config: Config, file: StrPath) -> None:
    with open(file, encoding="utf-8") as f:
        config.update(yaml.load(f, Loader=yaml.FullLoader))


def load_global_config(*override_files: StrPath) -> Any:
    update_config(CONFIG, BASE_DIR / "res/config.yml")

    for override_file in sorted(pathlib.Path().glob("config*.yml")):
        update_config(CONFIG, override_file)

    for override_file in override_files:
        update_config(CONFIG, override_file)

    return CONFIG


yaml.FullLoader.add_constructor("!Config", Config.from_yaml)
yaml.FullLoader.add_constructor("!ENV", env_var_constructor)

load_global_config()
