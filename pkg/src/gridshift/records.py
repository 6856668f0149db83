# region Imports


# To allow backwards compatibility with type hints
from __future__ import annotations

# Data containers
from dataclasses import dataclass, field

# Check types in validation
from typing import get_origin, get_args, get_type_hints, Any, Union, Literal, TypeAlias, ClassVar
from collections.abc import Callable, Iterable, Mapping
import types

# Evaluate regex
import re

# Check function signatures
import inspect

# Stable hashing of serialized records
import json

from .errors import GridshiftError


# endregion
# region Global Registers & Defaults



# Global type category registers
_record_types: dict[Any, RecordType] = {}

# Global info registers (metadata)
_record_info_registry: dict[type, RecordInfo] = {}

# Global function registers, used to skip inspecting record hooks
#   True is advanced, False is simple
_record_functions: dict[Callable, bool] = {}
_record_init_functions: dict[Callable, bool] = {}



# endregion
# region Record Types



## Errors
#########

def _str_depth(depth: int) -> str:
    return "   " * depth

class RecordError(GridshiftError):
    """Base class for all record errors"""

class RecordModelError(RecordError):
    """Model-related errors, accumulated over one processing phase"""
    def __init__(self, model_name: str, process: str, field_errors: list):
        self.model_name = model_name
        self.process = process
        self.field_errors = field_errors
        super().__init__(self.__repr__())

    def __repr__(self, depth: int = 0) -> str:
        errors = "\n" if depth == 0 else ""
        for field_error in self.field_errors:
            errors += _str_depth(depth + 1)  # Add 1 level of indentation for child errors
            if isinstance(field_error, RecordModelError):
                errors += field_error.__repr__(depth + 1)
            else:
                errors += f"{field_error!r}"
            errors += "\n"
        return f"{self.model_name}: encountered {len(self.field_errors)} errors during {self.process}:\n{errors}"

class RecordFieldError(RecordError):
    """Field-related errors"""
    def __init__(self, field_name: str, msg: str):
        self.field_name = field_name
        self.field_msg = msg
        super().__init__(f"{field_name}: {msg}")

class RecordTypeMismatchError(RecordError):
    """Raised when a value cannot be brought to the annotated type"""



## Metadata
###########

class Missing:
    """Sentinel class to check for missing values"""
    def __repr__(self):
        return 'Missing'
    def __bool__(self) -> bool:
        return False

@dataclass
class RecordConfig:
    """Configuration for record processing

    Attributes:
        fail_fast (bool): If True, processing stops on the first error encountered; Default: False
        coerce_numbers (bool): If True, ints are accepted for float fields and integral floats for int fields; Default: True
        frozen (bool): If True, fields cannot be reassigned after init (use evolve); Default: True
        allow_extra_fields (bool): If True, unknown keys in the input data are ignored instead of rejected; Default: False
        include_default_fields_in_serialization (bool): If True, fields equal to their default are serialized (used in repr too); Default: False
    """
    fail_fast: bool = False
    coerce_numbers: bool = True
    frozen: bool = True
    allow_extra_fields: bool = False
    include_default_fields_in_serialization: bool = False

DEFAULT_RECORD_CONFIG = RecordConfig()

@dataclass
class RecordFieldInfo:
    """Data class for storing one field during processing

    Attributes:
        name (str): Name of the field
        typ (Any): Type hint of the field; Default: Missing
        val (Any): Value of the field; Default: Missing
        default (Any): Default value of the field, or the RecordField declaring it; Default: Missing
    """
    name: str
    typ: Any = Missing
    val: Any = Missing
    default: Any = Missing

    def __repr__(self) -> str:
        return f'RecordFieldInfo for `{self.name}` of type `{self.typ}`'

    def get_default(self) -> Any:
        if isinstance(self.default, RecordField):
            return self.default.get_default()
        return self.default

@dataclass
class RecordInfo:
    """Data class for storing processing info of one record instance

    Attributes:
        instance (Any): The record being built
        model_name (str): Name of the record class
        config (RecordConfig): Config governing processing
        fields (list[RecordFieldInfo]): Fields with their incoming values
        transformers (dict[str, RecordTransformer]): Field names to transformer hooks
        validators (dict[str, RecordValidator]): Field names to validator hooks
        data (dict[str, Any]): The incoming keyword data
        errors (list[RecordError]): Errors accumulated during the current phase
    """
    instance: Any
    model_name: str
    config: RecordConfig
    fields: list[RecordFieldInfo]
    transformers: dict[str, RecordTransformer]
    validators: dict[str, RecordValidator]
    data: dict[str, Any] = field(default_factory=dict)
    errors: list[RecordError] = field(default_factory=list)

    def __repr__(self) -> str:
        return f'RecordInfo for `{self.model_name}`'

@dataclass
class RecordField:
    """Class for simple inline validation checks

    Attributes:
        default (Any): Default value of the field; Default: Missing
        default_factory (Callable[[], Any]): Default factory function; Default: None
        ge (Any): val >= ge; Default: None
        le (Any): val <= le; Default: None
        gt (Any): val > gt; Default: None
        lt (Any): val < lt; Default: None
        min_len (int): Minimum length of the field; Default: None
        max_len (int): Maximum length of the field; Default: None
        pattern (str): Regex pattern match; Default: None
        check (Callable[[Any], bool]): A simple validator that only receives the value; Default: None
    """
    default: Any = Missing
    default_factory: Callable[[], Any] | None = None
    ge: Any = None
    le: Any = None
    gt: Any = None
    lt: Any = None
    min_len: int | None = None
    max_len: int | None = None
    pattern: str | None = None
    check: Callable[[Any], bool] | None = None

    def __hash__(self) -> int:
        return id(self)

    def get_default(self) -> Any:
        """Get the default value, calling factory if needed"""
        if self.default is not Missing:
            return self.default
        elif self.default_factory is not None:
            return self.default_factory()
        return Missing

    def validate(self, val: Any) -> list[str]:
        """Check the value against the constraints; None skips the bound checks"""
        errors = []
        if val is None:
            return errors

        if self.ge is not None:
            try:
                if val < self.ge:
                    errors.append(f"must be >= {self.ge}, got {val}")
            except TypeError:
                errors.append("ge was set, but val could not be compared to ge")
        if self.le is not None:
            try:
                if val > self.le:
                    errors.append(f"must be <= {self.le}, got {val}")
            except TypeError:
                errors.append("le was set, but val could not be compared to le")
        if self.gt is not None:
            try:
                if val <= self.gt:
                    errors.append(f"must be > {self.gt}, got {val}")
            except TypeError:
                errors.append("gt was set, but val could not be compared to gt")
        if self.lt is not None:
            try:
                if val >= self.lt:
                    errors.append(f"must be < {self.lt}, got {val}")
            except TypeError:
                errors.append("lt was set, but val could not be compared to lt")
        if self.min_len is not None:
            try:
                if len(val) < self.min_len:
                    errors.append(f"len(val) must be >= {self.min_len}")
            except TypeError:
                errors.append("min_len was set, but len(val) could not be compared to min_len")
        if self.max_len is not None:
            try:
                if len(val) > self.max_len:
                    errors.append(f"len(val) must be <= {self.max_len}")
            except TypeError:
                errors.append("max_len was set, but len(val) could not be compared to max_len")
        if self.pattern is not None:
            if not re.match(self.pattern, str(val)):
                errors.append(f"`{val}` must match the pattern {self.pattern}")

        if self.check is not None:
            try:
                if not self.check(val):
                    errors.append("val failed custom check")
            except Exception as e:
                errors.append(f"check raised {type(e).__name__}: {e}")

        return errors



## Type Aliases
###############

RecordSimpleTransformer: TypeAlias = Callable[[Any, Any], Any]
RecordAdvancedTransformer: TypeAlias = Callable[[Any, RecordFieldInfo, RecordInfo], Any]
RecordTransformer: TypeAlias = RecordSimpleTransformer | RecordAdvancedTransformer

RecordSimpleValidator: TypeAlias = Callable[[Any, Any], bool]
RecordAdvancedValidator: TypeAlias = Callable[[Any, RecordFieldInfo, RecordInfo], bool]
RecordValidator: TypeAlias = RecordSimpleValidator | RecordAdvancedValidator



## Record Type Class & Functions
################################

@dataclass
class RecordType:
    """Coercion and serialization pair for one category of annotations

    Attributes:
        transformer (Callable[[Any, Any, RecordInfo], Any]): Brings a raw value to the annotated type or raises RecordTypeMismatchError
        serializer (Callable[[Any, Any], Any]): Turns a typed value back into plain JSON-ready data
    """
    transformer: Callable[[Any, Any, RecordInfo], Any]
    serializer: Callable[[Any, Any], Any]

def get_record_type(typ: Any) -> RecordType | None:
    if typ is Any:
        return _record_types[Any]
    if typ is None or typ is type(None):
        return _record_types[type(None)]

    origin = get_origin(typ)
    if origin is Literal:
        return _record_types[Literal]
    if origin is Union or origin is types.UnionType:
        return _record_types[Union]
    if origin in _record_types:
        return _record_types[origin]

    try:
        if issubclass(typ, Record):
            return _record_types[Record]
    except TypeError:
        pass

    if typ in _record_types:
        return _record_types[typ]
    return None



# endregion
# region Decorators



# noinspection PyTypeChecker
def record_transformer(*fields: str) -> Callable[[RecordTransformer], RecordTransformer]:
    """Decorator to mark a method as a transformer run after type coercion of the given fields"""

    def decorator(func):
        func.__record_transformer_for__ = fields
        return func
    return decorator

# noinspection PyTypeChecker
def record_validator(*fields: str) -> Callable[[RecordValidator], RecordValidator]:
    """Decorator to mark a method as a validator of the given fields"""

    def decorator(func):
        func.__record_validator_for__ = fields
        return func
    return decorator



# endregion
# region Wrappers



def record_function_wrapper(field_info: RecordFieldInfo, info: RecordInfo, func: Callable) -> Any:
    """Call a field hook with the simple (self, val) or advanced (self, field, info) signature"""
    if func in _record_functions:
        if _record_functions[func]:
            return func(info.instance, field_info, info)
        return func(info.instance, field_info.val)

    sig = inspect.signature(func)
    if len(sig.parameters) == 2:
        _record_functions[func] = False
        return func(info.instance, field_info.val)
    if len(sig.parameters) == 3:
        _record_functions[func] = True
        return func(info.instance, field_info, info)
    raise RecordFieldError(field_info.name, f"invalid signature for hook `{func.__name__}`")

def record_init_function_wrapper(info: RecordInfo, func: Callable) -> None:
    """Call __post_init__ with the simple (self) or advanced (self, info) signature"""
    if func in _record_init_functions:
        if _record_init_functions[func]:
            return func(info.instance, info)
        return func(info.instance)

    sig = inspect.signature(func)
    if len(sig.parameters) == 1:
        _record_init_functions[func] = False
        return func(info.instance)
    if len(sig.parameters) == 2:
        _record_init_functions[func] = True
        return func(info.instance, info)
    raise RecordFieldError(info.model_name, f"invalid signature for `{func.__name__}`")



# endregion
# region Builtin Type Functions

## Misc
#######

def _get_type_name(val: Any) -> str:
    if isinstance(val, type):
        return val.__name__
    return type(val).__name__

def _coerce(typ: Any, val: Any, info: RecordInfo) -> Any:
    record_type = get_record_type(typ)
    if record_type is None:
        raise RecordTypeMismatchError(f"unsupported annotation `{typ}`")
    return record_type.transformer(typ, val, info)

def serialize_value(typ: Any, val: Any) -> Any:
    """Serialize a typed value to plain data, following the annotation"""
    if val is None:
        return None
    record_type = get_record_type(typ)
    if record_type is None:
        return val
    return record_type.serializer(typ, val)



## Transform
############

def record_any_type_transformer(typ: Any, val: Any, info: RecordInfo) -> Any:
    return val

def record_none_type_transformer(typ: Any, val: Any, info: RecordInfo) -> Any:
    if val is not None:
        raise RecordTypeMismatchError(f"expected None, got `{_get_type_name(val)}`")
    return val

def record_base_type_transformer(typ: Any, val: Any, info: RecordInfo) -> Any:
    """Exact match for bool/int/float/str, with the numeric coercions the config allows"""
    # bool is a subclass of int but never accepted as a number
    if typ is bool:
        if isinstance(val, bool):
            return val
        raise RecordTypeMismatchError(f"expected `bool`, got `{_get_type_name(val)}`")
    if isinstance(val, bool):
        raise RecordTypeMismatchError(f"expected `{_get_type_name(typ)}`, got `bool`")

    if isinstance(val, typ):
        return val
    if info.config.coerce_numbers:
        if typ is float and isinstance(val, int):
            return float(val)
        if typ is int and isinstance(val, float) and val.is_integer():
            return int(val)
        # numpy scalars and similar
        if typ in (int, float) and hasattr(val, '__float__') and not isinstance(val, str):
            as_float = float(val)
            if typ is float:
                return as_float
            if as_float.is_integer():
                return int(as_float)
    raise RecordTypeMismatchError(f"expected `{_get_type_name(typ)}`, got `{_get_type_name(val)}`")

def record_literal_type_transformer(typ: Any, val: Any, info: RecordInfo) -> Any:
    args = get_args(typ)
    if val not in args:
        raise RecordTypeMismatchError(f"expected one of values `{args}`, got `{val}`")
    return val

def record_union_type_transformer(typ: Any, val: Any, info: RecordInfo) -> Any:
    args = get_args(typ)
    # Exact None first so Optional fields never coerce None
    if val is None:
        if type(None) in args:
            return None
        raise RecordTypeMismatchError(f"expected one of types `{args}`, got `None`")
    for arg in args:
        if arg is type(None):
            continue
        try:
            return _coerce(arg, val, info)
        except RecordError:
            pass
    raise RecordTypeMismatchError(f"expected one of types `{args}`, got `{_get_type_name(val)}`")

def record_list_type_transformer(typ: Any, val: Any, info: RecordInfo) -> Any:
    if isinstance(val, (str, bytes, Mapping)) or not isinstance(val, Iterable):
        raise RecordTypeMismatchError(f"expected value to be list-like, got `{_get_type_name(val)}`")
    args = get_args(typ)
    if not args:
        return list(val)
    result = []
    for i, item in enumerate(val):
        try:
            result.append(_coerce(args[0], item, info))
        except RecordError as e:
            raise RecordTypeMismatchError(f"at index {i}: {e}")
    return result

def record_tuple_type_transformer(typ: Any, val: Any, info: RecordInfo) -> Any:
    if isinstance(val, (str, bytes, Mapping)) or not isinstance(val, Iterable):
        raise RecordTypeMismatchError(f"expected value to be tuple-like, got `{_get_type_name(val)}`")
    items = list(val)
    args = get_args(typ)
    if not args:
        return tuple(items)

    # tuple[T, ...]
    if len(args) == 2 and args[1] is Ellipsis:
        args = (args[0],) * len(items)
    if len(items) != len(args):
        raise RecordTypeMismatchError(f"expected {len(args)} values, got {len(items)}")
    result = []
    for i, (item, arg) in enumerate(zip(items, args)):
        try:
            result.append(_coerce(arg, item, info))
        except RecordError as e:
            raise RecordTypeMismatchError(f"at index {i}: {e}")
    return tuple(result)

def record_dict_type_transformer(typ: Any, val: Any, info: RecordInfo) -> Any:
    if not isinstance(val, Mapping):
        raise RecordTypeMismatchError(f"expected value to be dict-like, got `{_get_type_name(val)}`")
    args = get_args(typ)
    if not args:
        return dict(val)
    result = {}
    for key, item in val.items():
        try:
            result[_coerce(args[0], key, info)] = _coerce(args[1], item, info)
        except RecordError as e:
            raise RecordTypeMismatchError(f"at key `{key}`: {e}")
    return result

def record_record_type_transformer(typ: Any, val: Any, info: RecordInfo) -> Any:
    if isinstance(val, typ):
        return val
    if isinstance(val, Mapping):
        return typ(**val)
    raise RecordTypeMismatchError(f"expected `{_get_type_name(typ)}` or a dict, got `{_get_type_name(val)}`")



## Serialize
############

def record_plain_type_serializer(typ: Any, val: Any) -> Any:
    return val

def record_union_type_serializer(typ: Any, val: Any) -> Any:
    if isinstance(val, Record):
        return val.serialize()
    if isinstance(val, (list, tuple)):
        return [serialize_value(Any, item) for item in val]
    if isinstance(val, dict):
        return {key: serialize_value(Any, item) for key, item in val.items()}
    return val

def record_any_type_serializer(typ: Any, val: Any) -> Any:
    return record_union_type_serializer(typ, val)

def record_list_type_serializer(typ: Any, val: Any) -> Any:
    args = get_args(typ)
    item_typ = args[0] if args else Any
    return [serialize_value(item_typ, item) for item in val]

def record_tuple_type_serializer(typ: Any, val: Any) -> Any:
    args = get_args(typ)
    if len(args) == 2 and args[1] is Ellipsis:
        args = (args[0],) * len(val)
    if not args:
        args = (Any,) * len(val)
    return [serialize_value(arg, item) for arg, item in zip(args, val)]

def record_dict_type_serializer(typ: Any, val: Any) -> Any:
    args = get_args(typ)
    item_typ = args[1] if args else Any
    return {key: serialize_value(item_typ, item) for key, item in val.items()}

def record_record_type_serializer(typ: Any, val: Any) -> Any:
    return val.serialize()



# endregion
# region Record Processing Functions



def _build_field_error(field_name: str, error: Exception) -> RecordError | Exception:
    if isinstance(error, (RecordFieldError, RecordModelError)):
        return error
    if isinstance(error, RecordError):
        return RecordFieldError(field_name, str(error))
    return error

def _record_or_raise(info: RecordInfo, field_name: str, error: Exception) -> None:
    error = _build_field_error(field_name, error)
    if info.config.fail_fast:
        raise error
    info.errors.append(error)



## Transform
############

def _transform_field(field_info: RecordFieldInfo, info: RecordInfo) -> None:
    if field_info.val is Missing:
        field_info.val = field_info.get_default()
        if field_info.val is Missing:
            raise RecordFieldError(field_info.name, "missing required field")
    field_info.val = _coerce(field_info.typ, field_info.val, info)

    if field_info.name in info.transformers:
        field_info.val = record_function_wrapper(field_info, info, info.transformers[field_info.name])

def _transform(info: RecordInfo) -> None:
    for field_info in info.fields:
        try:
            _transform_field(field_info, info)
        except (RecordError, RecordModelError) as e:
            _record_or_raise(info, field_info.name, e)

    if not info.config.allow_extra_fields:
        known = {f.name for f in info.fields}
        for key in info.data:
            if key not in known:
                _record_or_raise(info, key, RecordFieldError(key, "unknown field"))



## Validate
###########

def _validate_field(field_info: RecordFieldInfo, info: RecordInfo) -> None:
    if isinstance(field_info.default, RecordField):
        messages = field_info.default.validate(field_info.val)
        if messages:
            raise RecordFieldError(field_info.name, "; ".join(messages))

    if field_info.name in info.validators:
        if not record_function_wrapper(field_info, info, info.validators[field_info.name]):
            raise RecordFieldError(field_info.name, "failed validation")

def _validate(info: RecordInfo) -> None:
    for field_info in info.fields:
        try:
            _validate_field(field_info, info)
        except RecordError as e:
            _record_or_raise(info, field_info.name, e)



## Set
######

def _set(info: RecordInfo) -> None:
    for field_info in info.fields:
        object.__setattr__(info.instance, field_info.name, field_info.val)



# endregion
# region Record Classes



## Class Init Functions
#######################

def get_record_config(cls: Any) -> RecordConfig:
    config = getattr(cls, "__record_config__", None)
    if config is None:
        return DEFAULT_RECORD_CONFIG
    if not isinstance(config, RecordConfig):
        raise RecordFieldError(cls.__name__, "`__record_config__` must be a RecordConfig instance")
    return config

def get_field_hooks(cls: Any) -> tuple[dict[str, RecordTransformer], dict[str, RecordValidator]]:
    transformers: dict[str, RecordTransformer] = {}
    validators: dict[str, RecordValidator] = {}

    # Walk the MRO base-first so subclasses override hooks of the same field
    for klass in reversed(cls.__mro__):
        for val in vars(klass).values():
            if not callable(val):
                continue
            for field_name in getattr(val, '__record_transformer_for__', ()):
                transformers[field_name] = val
            for field_name in getattr(val, '__record_validator_for__', ()):
                validators[field_name] = val
    return transformers, validators

def get_fields(cls: Any) -> list[RecordFieldInfo]:
    """Annotated public fields, in declaration order, base classes first"""
    fields: list[RecordFieldInfo] = []
    try:
        hints = get_type_hints(cls, localns={cls.__name__: cls})
    except NameError as e:
        raise RecordError(f"{cls.__name__}: could not resolve field annotations: {e}")
    for field_name, field_type in hints.items():
        # Skip private, magic and class-level names
        if field_name.startswith("_"):
            continue
        if get_origin(field_type) is ClassVar or field_type is ClassVar:
            continue
        default = getattr(cls, field_name, Missing)
        fields.append(RecordFieldInfo(name=field_name, typ=field_type, default=default))
    return fields

def get_record_info(cls: Any, instance: Any, data: dict) -> RecordInfo:
    # Cached class-level info, copied so per-instance values are not kept
    if cls not in _record_info_registry:
        transformers, validators = get_field_hooks(cls)
        _record_info_registry[cls] = RecordInfo(
            instance=None,
            model_name=cls.__name__,
            config=get_record_config(cls),
            fields=get_fields(cls),
            transformers=transformers,
            validators=validators,
        )
    cached = _record_info_registry[cls]
    return RecordInfo(
        instance=instance,
        model_name=cached.model_name,
        config=cached.config,
        fields=[RecordFieldInfo(name=f.name, typ=f.typ, val=data.get(f.name, Missing), default=f.default) for f in cached.fields],
        transformers=cached.transformers,
        validators=cached.validators,
        data=data,
    )



## Classes
##########

class Record:
    """Base class for validated, immutable data records

    Subclasses declare annotated fields; defaults are plain values or RecordField instances.
    Init runs transform (type coercion and transformer hooks), validate (RecordField checks and
    validator hooks) and set, raising RecordModelError with every error of the failing phase.
    """

    def __init__(self, **data):
        info = get_record_info(self.__class__, self, data)

        _transform(info)
        if info.errors:
            raise RecordModelError(info.model_name, 'transform', info.errors)

        _validate(info)
        if info.errors:
            raise RecordModelError(info.model_name, 'validation', info.errors)

        _set(info)

        for klass in self.__class__.__mro__:
            if "__post_init__" in klass.__dict__:
                try:
                    record_init_function_wrapper(info, klass.__dict__["__post_init__"])
                except RecordModelError:
                    raise
                except RecordError as e:
                    raise RecordModelError(info.model_name, 'post init', [e])
                break

        object.__setattr__(self, "_record_ready", True)



    def __setattr__(self, key: str, value: Any) -> None:
        if getattr(self, "_record_ready", False) and get_record_config(self.__class__).frozen and not key.startswith("_"):
            raise RecordError(f"{self.__class__.__name__} is frozen; use evolve() to change `{key}`")
        object.__setattr__(self, key, value)

    @classmethod
    def record_fields(cls) -> list[str]:
        return [f.name for f in get_record_info(cls, None, {}).fields]

    def evolve(self, **changes) -> Any:
        """Return a validated copy with the given fields replaced"""
        data = {name: getattr(self, name) for name in self.record_fields()}
        data.update(changes)
        return type(self)(**data)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Any:
        return cls(**dict(data))

    def serialize(self) -> dict[str, Any]:
        info = get_record_info(self.__class__, self, {})
        result: dict[str, Any] = {}
        for field_info in info.fields:
            val = getattr(self, field_info.name)
            if not info.config.include_default_fields_in_serialization:
                default = field_info.get_default()
                if default is not Missing and val == default:
                    continue
            result[field_info.name] = serialize_value(field_info.typ, val)
        return result

    def __repr__(self) -> str:
        parts = [f"{key}={val!r}" for key, val in self.serialize().items()]
        return f"{self.__class__.__name__}({', '.join(parts)})"

    def __eq__(self, other: Any) -> bool:
        if not isinstance(other, self.__class__):
            return False
        return self.serialize() == other.serialize()

    def __ne__(self, other: Any) -> bool:
        return not self == other

    def __hash__(self) -> int:
        return hash(json.dumps(self.serialize(), sort_keys=True, default=str))

    def __copy__(self) -> Any:
        return self.evolve()



# endregion
# region Utilities



def register_record_type(typ: Any, record_type: RecordType) -> None:
    _record_types[typ] = record_type

def clear_record_info_registry() -> None:
    _record_info_registry.clear()

def reset_record_globals() -> None:
    """Reset caches; mainly for tests that redefine classes under the same name"""
    _record_info_registry.clear()
    _record_functions.clear()
    _record_init_functions.clear()

def serialize(instance: Any) -> Any:
    """Serialize a record, or pass through plain data"""
    if isinstance(instance, Record):
        return instance.serialize()
    return serialize_value(Any, instance)



_base_type = RecordType(record_base_type_transformer, record_plain_type_serializer)
register_record_type(Any, RecordType(record_any_type_transformer, record_any_type_serializer))
register_record_type(type(None), RecordType(record_none_type_transformer, record_plain_type_serializer))
register_record_type(bool, _base_type)
register_record_type(int, _base_type)
register_record_type(float, _base_type)
register_record_type(str, _base_type)
register_record_type(Literal, RecordType(record_literal_type_transformer, record_plain_type_serializer))
register_record_type(Union, RecordType(record_union_type_transformer, record_union_type_serializer))
register_record_type(list, RecordType(record_list_type_transformer, record_list_type_serializer))
register_record_type(tuple, RecordType(record_tuple_type_transformer, record_tuple_type_serializer))
register_record_type(dict, RecordType(record_dict_type_transformer, record_dict_type_serializer))
register_record_type(Record, RecordType(record_record_type_transformer, record_record_type_serializer))


# endregion
