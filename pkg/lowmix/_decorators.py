from functools import wraps
from typing import Any, Callable, TypeVar

from lowmix._common import check_finite, field_arrays

R = TypeVar("R")


def finite_output(stage: str) -> Callable[[Callable[..., R]], Callable[..., R]]:
    def decorator(func: Callable[..., R]) -> Callable[..., R]:
        @wraps(func)
        def wrapped_fx(*args: Any, **kwargs: Any) -> Any:
            result = func(*args, **kwargs)
            check_finite(stage, *field_arrays(result))
            return result

        return wrapped_fx

    return decorator
