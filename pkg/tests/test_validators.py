from __future__ import annotations

from types import MappingProxyType

import pytest

from rotorfsi.config import ValidationError
from rotorfsi.config import Validator
from rotorfsi.config import ValidatorList


@pytest.fixture
def settings():
    return {
        "loop": {"dt": 0.01, "t_end": 2.0, "max_sweeps": 50},
        "materials": {"poisson_ratio": 0.384, "young_modulus": "2.5e6"},
        "rotation": {"schedule": []},
        "output": {"directory": "out"},
    }


def test_dotted_validators(settings):
    ValidatorList(
        settings,
        [
            Validator("loop.dt", "loop.t_end", must_exist=True, gt=0),
            Validator("loop.max_sweeps", is_type_of=int, gte=1),
            Validator("output.directory", is_in=("out", "results")),
        ],
    ).validate_all()


def test_validation_error(settings):
    with pytest.raises(ValidationError) as excinfo:
        Validator("loop.dt", lte=0.001).validate(settings)
    assert "loop.dt must lte 0.001 but it is 0.01" in excinfo.value.message
    assert excinfo.value.details == [
        ("loop.dt", "loop.dt must lte 0.001 but it is 0.01")
    ]


def test_missing_names(settings):
    with pytest.raises(ValidationError, match="loop.relaxation is required"):
        Validator("loop.relaxation", must_exist=True).validate(settings)
    Validator("loop.relaxation", gt=0).validate(settings)
    assert "relaxation" not in settings["loop"]


def test_every_failing_name_is_listed(settings):
    with pytest.raises(ValidationError) as excinfo:
        Validator("loop.dt", "loop.t_end", gt=5).validate(settings)
    assert [name for name, _ in excinfo.value.details] == [
        "loop.dt",
        "loop.t_end",
    ]


def test_validator_custom_message(settings):
    custom_msg = "You cannot set {name} to {value}"
    validator = Validator(
        "loop.t_end", lte=1, messages={"operations": custom_msg}
    )
    with pytest.raises(ValidationError) as excinfo:
        validator.validate(settings)
    assert excinfo.value.message == "You cannot set loop.t_end to 2.0"


def test_validate_all(settings):
    validators = ValidatorList(
        settings,
        [
            Validator("loop.dt", gt=1),
            Validator("loop.dt", gt=0),
            Validator("loop.bogus", must_exist=True),
        ],
    )
    with pytest.raises(ValidationError) as excinfo:
        validators.validate_all()
    assert "loop.bogus" in excinfo.value.message
    assert [name for name, _ in excinfo.value.details] == [
        "loop.dt",
        "loop.bogus",
    ]


def test_validator_subclass_messages(settings):
    class StrictValidator(Validator):
        default_messages = MappingProxyType(
            {
                **Validator.default_messages,
                "must_exist_true": "{name} is missing from the run",
            }
        )

    with pytest.raises(ValidationError) as excinfo:
        StrictValidator("loop.relaxation", must_exist=True).validate(
            settings
        )
    assert excinfo.value.message == "loop.relaxation is missing from the run"


def test_positive_or_validator(settings):
    validator = Validator(
        "rotation.angular_velocity", must_exist=True
    ) | Validator("loop.dt", must_exist=True)
    validator.validate(settings)
    assert validator.names == ("rotation.angular_velocity", "loop.dt")


def test_negative_or_validator(settings):
    validator = Validator(
        "rotation.angular_velocity", must_exist=True
    ) | Validator("rotation.schedule", len_min=1)
    with pytest.raises(ValidationError) as excinfo:
        validator.validate(settings)
    name, message = excinfo.value.details[0]
    assert name == "rotation.angular_velocity | rotation.schedule"
    assert message.startswith("combined validators failed")


def test_cast_on_validate_transforms_value(settings):
    Validator("materials.young_modulus", cast=float, gt=0).validate(settings)
    assert settings["materials"]["young_modulus"] == 2.5e6


def test_failed_cast(settings):
    settings["loop"]["dt"] = "fast"
    with pytest.raises(ValidationError, match="cannot be read from"):
        Validator("loop.dt", cast=float).validate(settings)


def test_condition(settings):
    validator = Validator(
        "materials.poisson_ratio", condition=lambda value: value < 0.3
    )
    with pytest.raises(ValidationError, match="invalid for <lambda>"):
        validator.validate(settings)


def test_booleans_are_not_integers(settings):
    settings["loop"]["max_sweeps"] = True
    with pytest.raises(ValidationError):
        Validator("loop.max_sweeps", is_type_of=int).validate(settings)
    Validator("loop.max_sweeps", is_type_of=bool).validate(settings)


@pytest.mark.parametrize(
    "removed", ["when", "default", "description", "required", "lt", "eq"]
)
def test_unsupported_keywords(removed):
    with pytest.raises(TypeError):
        Validator("loop.dt", **{removed: 1})


def test_invalid_condition():
    with pytest.raises(TypeError):
        Validator("loop.dt", condition=1)
