import pathlib
import types

__all__ = (
    "get_base_dir",
    "prepare_output",
)


def get_base_dir(module: types.ModuleType | None = None) -> pathlib.Path:
    if module is None:
        file = pathlib.Path(__file__).parent
    else:
        file = module.__file__
    if file is None:
        raise RuntimeError("Could not determine the base directory.")
    return pathlib.Path(file).resolve().parent


def prepare_output(path: str | pathlib.Path) -> pathlib.Path:
    """Returns ``path`` as a Path, creating its parent directory if needed."""
    path = pathlib.Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return path
