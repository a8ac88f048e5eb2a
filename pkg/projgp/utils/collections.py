from collections.abc import Callable, Hashable, Iterable
from typing import TypeVar

__all__ = (
    "summarise_list",
    "deduplicate",
)


T = TypeVar("T")
H = TypeVar("H", bound=Hashable)


def summarise_list(
    *list: T,
    func: Callable[[T], str] = str,
    max_items: int = 10,
    skip_first: bool = False,
) -> str:
    count = len(list)
    if count <= skip_first:
        return "None"

    max_items += skip_first
    info = ", ".join(func(item) for item in list[skip_first:max_items])
    if count > max_items:
        info += f" (+{count - max_items} More)"
    return info


def deduplicate(items: Iterable[H]) -> tuple[list[H], list[H]]:
    """Returns the items in first-seen order with repeats removed, and the removed repeats."""
    seen: dict[H, None] = {}
    repeats: list[H] = []
    for item in items:
        if item in seen:
            repeats.append(item)
        else:
            seen[item] = None
    return list(seen), repeats
