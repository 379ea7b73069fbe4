from __future__ import annotations

from types import MappingProxyType
from typing import Any
from typing import Callable
from typing import MutableMapping
from typing import Sequence

from rotorfsi.config import conditions
from rotorfsi.errors import ConfigError


class _Empty:
    def __repr__(self) -> str:
        return "empty"

    def __bool__(self) -> bool:
        return False


empty = _Empty()


class ValidationError(ConfigError):
    """Raised when a validation fails.

    ``details`` holds one ``(field, message)`` pair per failure.
    """


def get_dotted(settings: MutableMapping, name: str, default: Any = empty):
    node: Any = settings
    for part in name.split("."):
        if not isinstance(node, MutableMapping) or part not in node:
            return default
        node = node[part]
    return node


def set_dotted(settings: MutableMapping, name: str, value: Any) -> None:
    *parents, key = name.split(".")
    node = settings
    for part in parents:
        node = node.setdefault(part, {})
    node[key] = value


class Validator:
    """Conditions attached to dotted setting names::

        Validator('loop.dt', must_exist=True, gt=0)

    The above ensures ``[loop] dt`` is given and positive.

    `names` are one or more dotted names::

        Validator('geometry.length', 'geometry.width', must_exist=True)

    The `operations` are resolved by name in
    :mod:`rotorfsi.config.conditions`::

        gt: value > other
        gte: value >= other
        lte: value <= other
        is_type_of: isinstance(value, type)
        is_in: value in sequence
        len_eq: len(value) == other
        len_min: len(value) >= other

    A missing name only fails with `must_exist`; otherwise its checks
    are skipped.

    `condition` is a callable run after `cast` and before operations::

       Validator('materials.poisson_ratio', condition=lambda v: v < 0.5)
    """

    default_messages = MappingProxyType(
        {
            "must_exist_true": "{name} is required",
            "cast": "{name} cannot be read from {value!r}",
            "condition": "{name} invalid for {function}({value})",
            "operations": (
                "{name} must {operation} {op_value} but it is {value}"
            ),
            "combined": "combined validators failed {errors}",
        }
    )

    def __init__(
        self,
        *names: str,
        must_exist: bool = False,
        condition: Callable[[Any], bool] | None = None,
        messages: dict[str, str] | None = None,
        cast: Callable[[Any], Any] | None = None,
        **operations: Any,
    ) -> None:
        self.messages = dict(self.default_messages)
        if messages:
            self.messages.update(messages)

        if condition is not None and not callable(condition):
            raise TypeError("condition must be callable")

        for op_name in operations:
            if not hasattr(conditions, op_name):
                raise TypeError(f"unknown validator operation {op_name!r}")

        self.names = names
        self.must_exist = must_exist
        self.condition = condition
        self.cast = cast or (lambda value: value)
        self.operations = operations

    def __or__(self, other: Validator) -> OrValidator:
        return OrValidator(self, other)

    def validate(self, settings: MutableMapping) -> None:
        """Raise ValidationError listing every failing name"""
        details: list[tuple[str, str]] = []
        for name in self.names:
            message = self._validate_item(settings, name)
            if message is not None:
                details.append((name, message))
        if details:
            raise ValidationError(
                "; ".join(message for _, message in details),
                details=details,
            )

    def _validate_item(self, settings: MutableMapping, name: str):
        value = get_dotted(settings, name)

        # is name required but not exists?
        if value is empty:
            if self.must_exist:
                return self.messages["must_exist_true"].format(name=name)
            return None

        try:
            value = self.cast(value)
        except (TypeError, ValueError):
            return self.messages["cast"].format(name=name, value=value)
        set_dotted(settings, name, value)

        # is there a callable condition?
        if self.condition is not None and not self.condition(value):
            return self.messages["condition"].format(
                name=name,
                function=getattr(self.condition, "__name__", "condition"),
                value=value,
            )

        for op_name, op_value in self.operations.items():
            op_function = getattr(conditions, op_name)
            try:
                op_succeeded = op_function(value, op_value)
            except TypeError:
                op_succeeded = False
            if not op_succeeded:
                return self.messages["operations"].format(
                    name=name,
                    operation=op_function.__name__,
                    op_value=op_value,
                    value=value,
                )
        return None


class OrValidator(Validator):
    """Evaluates on Validator() | Validator()"""

    def __init__(
        self,
        validator_a: Validator,
        validator_b: Validator,
        **kwargs: Any,
    ) -> None:
        self.validators = (validator_a, validator_b)
        super().__init__(
            *validator_a.names, *validator_b.names, **kwargs
        )

    def validate(self, settings: MutableMapping) -> None:
        """Ensure at least one of the validators is valid"""
        errors = []
        for validator in self.validators:
            try:
                validator.validate(settings)
            except ValidationError as e:
                errors.append(e)
                continue
            else:
                return

        _message = self.messages["combined"].format(
            errors=" or ".join(
                str(e).replace("combined validators failed ", "")
                for e in errors
            )
        )
        name = " | ".join(
            ", ".join(validator.names) for validator in self.validators
        )
        raise ValidationError(_message, details=[(name, _message)])


class ValidatorList(list):
    def __init__(
        self,
        settings: MutableMapping,
        validators: Sequence[Validator] | None = None,
        *args: Validator,
    ) -> None:
        if isinstance(validators, (list, tuple)):
            args = tuple(args) + tuple(validators)
        super().__init__(args)
        self.settings = settings

    def validate_all(self) -> None:
        errors = []
        details: list[tuple[str, str]] = []
        for validator in self:
            try:
                validator.validate(self.settings)
            except ValidationError as e:
                errors.append(e)
                details.extend(e.details)
                continue

        if errors:
            raise ValidationError(
                "; ".join(str(e) for e in errors), details=details
            )
