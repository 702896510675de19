from __future__ import annotations

from abc import ABC
import sys
from typing import TYPE_CHECKING

from wdnse.errors import NetworkValidationError

if TYPE_CHECKING:
    from typing import Optional


class NetworkElement(ABC):

    def validate(self) -> bool:
        # Inheriting classes check their own field invariants here and call
        # `throw` on violations.
        raise NotImplementedError()

    def describe(self) -> str:
        # Used for debugging and in error output on STDERR.
        raise NotImplementedError()

    def throw(self, desc: str,
              context_exception: Optional[Exception] = None) -> None:
        sys.stderr.write(self.describe())
        sys.stderr.write("\n")
        if context_exception:
            raise NetworkValidationError(desc) from context_exception
        raise NetworkValidationError(desc)
