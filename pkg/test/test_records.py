import pytest
import sys
import os
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..', 'src')))
from gridshift import *
from typing import Literal



InvalidType = object()

@pytest.fixture(autouse=True)
def reset_records():
    reset_record_globals()
    yield
    reset_record_globals()



## Types
########

def test_base_types():
    class Test(Record):
        name: str
        count: int
        weight: float
        flag: bool

    test = Test(name='a', count=1, weight=2.5, flag=True)
    assert (test.name, test.count, test.weight, test.flag) == ('a', 1, 2.5, True)

def test_int_coerced_to_float():
    class Test(Record):
        val: float

    test = Test(val=3)
    assert test.val == 3.0
    assert isinstance(test.val, float)

def test_integral_float_coerced_to_int():
    class Test(Record):
        val: int

    assert Test(val=4.0).val == 4
    with pytest.raises(RecordModelError):
        Test(val=4.5)

def test_no_coercion_when_disabled():
    class Test(Record):
        __record_config__ = RecordConfig(coerce_numbers=False)
        val: float

    with pytest.raises(RecordModelError):
        Test(val=3)

def test_bool_is_not_a_number():
    class Test(Record):
        val: int

    with pytest.raises(RecordModelError):
        Test(val=True)

def test_invalid_type():
    class Test(Record):
        val: str

    with pytest.raises(RecordModelError):
        Test(val=InvalidType)

def test_optional():
    class Test(Record):
        val: float | None = None

    assert Test().val is None
    assert Test(val=2).val == 2.0

def test_literal():
    class Test(Record):
        kind: Literal['renewable', 'controllable']

    assert Test(kind='renewable').kind == 'renewable'
    with pytest.raises(RecordModelError):
        Test(kind='nuclear')

def test_containers():
    class Test(Record):
        values: list[float]
        table: dict[str, list[float]]
        pair: tuple[str, int]

    test = Test(values=(1, 2), table={'a': [1, 2.5]}, pair=['x', 3])
    assert test.values == [1.0, 2.0]
    assert test.table == {'a': [1.0, 2.5]}
    assert test.pair == ('x', 3)

def test_container_item_mismatch():
    class Test(Record):
        values: list[float]

    with pytest.raises(RecordModelError):
        Test(values=[1.0, 'two'])
    with pytest.raises(RecordModelError):
        Test(values='12')

def test_nested_records():
    class Child(Record):
        val: int

    class Parent(Record):
        child: Child
        children: list[Child] = RecordField(default_factory=list)

    parent = Parent(child={'val': 1}, children=[{'val': 2}, Child(val=3)])
    assert isinstance(parent.child, Child)
    assert [c.val for c in parent.children] == [2, 3]

def test_nested_record_error():
    class Child(Record):
        val: int

    class Parent(Record):
        child: Child

    with pytest.raises(RecordModelError):
        Parent(child={'val': 'x'})

def test_register_record_type():
    class Percent:
        def __init__(self, value: float):
            self.value = value

    register_record_type(Percent, RecordType(
        lambda typ, val, info: val if isinstance(val, Percent) else Percent(float(val)),
        lambda typ, val: val.value,
    ))

    class Test(Record):
        share: Percent

    test = Test(share=0.4)
    assert test.share.value == 0.4
    assert test.serialize() == {'share': 0.4}
    assert get_record_type(Percent) is not None



## Fields
#########

def test_missing_field():
    class Test(Record):
        val: int

    with pytest.raises(RecordModelError):
        Test()

def test_defaults():
    class Test(Record):
        val: int = 42
        items: list[int] = RecordField(default_factory=list)

    a, b = Test(), Test()
    assert a.val == 42
    assert a.items == [] and a.items is not b.items

def test_record_field_bounds():
    class Test(Record):
        val: float = RecordField(ge=0, le=1)
        strict: float = RecordField(default=0.5, gt=0, lt=1)

    assert Test(val=1).val == 1
    with pytest.raises(RecordModelError):
        Test(val=-0.1)
    with pytest.raises(RecordModelError):
        Test(val=0.5, strict=1)

def test_record_field_len_and_pattern():
    class Test(Record):
        name: str = RecordField(pattern=r'^[A-Z]+$')
        items: list[int] = RecordField(default_factory=list, min_len=1, max_len=2)

    assert Test(name='ME', items=[1]).name == 'ME'
    with pytest.raises(RecordModelError):
        Test(name='me', items=[1])
    with pytest.raises(RecordModelError):
        Test(name='ME', items=[])
    with pytest.raises(RecordModelError):
        Test(name='ME', items=[1, 2, 3])

def test_record_field_check():
    class Test(Record):
        val: int = RecordField(check=lambda v: v % 2 == 0)

    assert Test(val=2).val == 2
    with pytest.raises(RecordModelError):
        Test(val=3)

def test_none_skips_bounds():
    class Test(Record):
        val: float | None = RecordField(default=None, gt=0)

    assert Test().val is None

def test_unknown_field():
    class Test(Record):
        val: int

    with pytest.raises(RecordModelError):
        Test(val=1, other=2)

def test_allow_extra_fields():
    class Test(Record):
        __record_config__ = RecordConfig(allow_extra_fields=True)
        val: int

    test = Test(val=1, other=2)
    assert not hasattr(test, 'other')

def test_errors_accumulate():
    class Test(Record):
        a: int
        b: int

    with pytest.raises(RecordModelError) as e:
        Test(a='x', b='y')
    assert len(e.value.field_errors) == 2

def test_fail_fast():
    class Test(Record):
        __record_config__ = RecordConfig(fail_fast=True)
        a: int
        b: int

    with pytest.raises(RecordFieldError) as e:
        Test(a='x', b='y')
    assert e.value.field_name == 'a'

def test_invalid_config():
    class Test(Record):
        __record_config__ = {'fail_fast': True}
        val: int

    with pytest.raises(RecordError):
        Test(val=1)

def test_private_and_classvar_fields_skipped():
    from typing import ClassVar

    class Test(Record):
        val: int
        _cache: dict
        kinds: ClassVar[tuple] = ('a',)

    assert Test.record_fields() == ['val']



## Hooks
########

def test_simple_validator():
    class Test(Record):
        val: int

        @record_validator('val')
        def _positive(self, val: int) -> bool:
            return val > 0

    assert Test(val=1).val == 1
    with pytest.raises(RecordModelError):
        Test(val=0)

def test_advanced_validator():
    class Test(Record):
        low: float
        high: float

        @record_validator('high')
        def _ordered(self, field: RecordFieldInfo, info: RecordInfo) -> bool:
            low = next(f.val for f in info.fields if f.name == 'low')
            if field.val < low:
                raise RecordFieldError(field.name, f"must be at least low ({low})")
            return True

    assert Test(low=1, high=2).high == 2
    with pytest.raises(RecordModelError):
        Test(low=2, high=1)

def test_transformer():
    class Test(Record):
        name: str

        @record_transformer('name')
        def _upper(self, val: str) -> str:
            return val.upper()

    assert Test(name='me').name == 'ME'

def test_invalid_hook_signature():
    class Test(Record):
        val: int

        @record_validator('val')
        def _bad(self) -> bool:
            return True

    with pytest.raises(RecordModelError):
        Test(val=1)

def test_subclass_inherits_hooks_and_fields():
    class Base(Record):
        val: int

        @record_validator('val')
        def _positive(self, val: int) -> bool:
            return val > 0

    class Child(Base):
        extra: str = ''

    assert Child.record_fields() == ['val', 'extra']
    with pytest.raises(RecordModelError):
        Child(val=-1)

def test_post_init_domain_error_propagates():
    class Test(Record):
        low: float
        high: float

        def __post_init__(self):
            if self.low > self.high:
                raise GridDataError("low above high")

    with pytest.raises(GridDataError):
        Test(low=2, high=1)

def test_post_init_record_error_wrapped():
    class Test(Record):
        val: int

        def __post_init__(self):
            raise RecordFieldError('val', 'rejected')

    with pytest.raises(RecordModelError) as e:
        Test(val=1)
    assert e.value.process == 'post init'



## Behaviour
############

def test_frozen():
    class Test(Record):
        val: int

    test = Test(val=1)
    with pytest.raises(RecordError):
        test.val = 2
    assert test.val == 1

def test_unfrozen():
    class Test(Record):
        __record_config__ = RecordConfig(frozen=False)
        val: int

    test = Test(val=1)
    test.val = 2
    assert test.val == 2

def test_evolve_validates():
    class Test(Record):
        val: int = RecordField(ge=0)
        name: str = 'a'

    test = Test(val=1)
    changed = test.evolve(val=2)
    assert changed.val == 2 and changed.name == 'a'
    assert test.val == 1
    with pytest.raises(RecordModelError):
        test.evolve(val=-1)

def test_from_dict():
    class Test(Record):
        val: int

    assert Test.from_dict({'val': 3}) == Test(val=3)

def test_serialize_omits_defaults():
    class Child(Record):
        val: int
        tag: str = ''

    class Test(Record):
        val: int = 1
        child: Child
        children: list[Child] = RecordField(default_factory=list)

    test = Test(child={'val': 2}, children=[{'val': 3, 'tag': 'x'}])
    assert test.serialize() == {'child': {'val': 2}, 'children': [{'val': 3, 'tag': 'x'}]}
    assert serialize(test) == test.serialize()
    assert serialize([1, 2]) == [1, 2]

def test_serialize_with_defaults():
    class Test(Record):
        __record_config__ = RecordConfig(include_default_fields_in_serialization=True)
        val: int = 1

    assert Test().serialize() == {'val': 1}

def test_equality_and_hash():
    class Test(Record):
        val: int
        table: dict[str, float] = RecordField(default_factory=dict)

    a = Test(val=1, table={'x': 1.0})
    b = Test(val=1, table={'x': 1})
    c = Test(val=2)
    assert a == b
    assert a != c
    assert hash(a) == hash(b)
    assert len({a, b, c}) == 2

def test_repr():
    class Test(Record):
        val: int
        name: str = 'a'

    assert repr(Test(val=1)) == 'Test(val=1)'

def test_copy():
    import copy

    class Test(Record):
        val: int

    test = Test(val=1)
    duplicate = copy.copy(test)
    assert duplicate == test and duplicate is not test

def test_model_error_repr():
    class Test(Record):
        a: int

    with pytest.raises(RecordModelError) as e:
        Test(a='x')
    assert 'Test' in repr(e.value)
    assert 'transform' in str(e.value)

def test_errors_are_gridshift_errors():
    assert issubclass(RecordError, GridshiftError)
    assert issubclass(RecordModelError, RecordError)
    assert issubclass(RecordFieldError, RecordError)
