import json
import random

import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import instances, random_instance
from hierdialog.corpus import (
    Instance,
    Query,
    Schema,
    Turn,
    dump_corpus,
    dump_schema,
    load_schema,
    parse_corpus,
    validate_instance,
)
from hierdialog.errors import DataError

SCHEMA = Schema(("per:friends", "per:boss", "unanswerable"), neutral_class=2)


def record(rid="a", label="per:friends", **over):
    rec = {
        "id": rid,
        "turns": [{"speaker": "Speaker 1", "text": "hi Frank"}, {"speaker": "Frank", "text": "hello there"}],
        "arguments": ["Speaker 1", "Frank"],
        "label": label,
    }
    rec.update(over)
    return json.dumps(rec)


def codes(inst, c=3):
    return {v.code for v in validate_instance(inst, c)}


def test_parse_single_record():
    corpus = parse_corpus(record().encode(), SCHEMA)
    assert len(corpus) == 1
    inst = corpus.instances[0]
    assert (inst.m, inst.k, inst.label) == (2, 2, 0)
    assert corpus.neutral_class == 2


def test_unknown_class():
    with pytest.raises(DataError) as err:
        parse_corpus(record(label="per:enemy"), SCHEMA)
    assert err.value.code == "UNKNOWN_CLASS"


def test_malformed_line_57_names_the_line_and_returns_nothing():
    lines = [record(rid=f"i{i}") for i in range(100)]
    lines[56] = '{"id": "broken", "turns": ['
    with pytest.raises(DataError) as err:
        parse_corpus("\n".join(lines).encode(), SCHEMA)
    assert err.value.code == "MALFORMED_LINE"
    assert "line 57" in err.value.message


def test_duplicate_id():
    with pytest.raises(DataError) as err:
        parse_corpus(record() + "\n" + record(), SCHEMA)
    assert err.value.code == "DUPLICATE_ID"
    assert "line 2" in err.value.message


def test_missing_field_is_malformed():
    rec = json.loads(record())
    del rec["arguments"]
    with pytest.raises(DataError) as err:
        parse_corpus(json.dumps(rec), SCHEMA)
    assert err.value.code == "MALFORMED_LINE"


def test_invalid_instance_reports_its_code():
    with pytest.raises(DataError) as err:
        parse_corpus(record(arguments=["Speaker 1", "Joey"]), SCHEMA)
    assert err.value.code == "ARG_NOT_MENTIONED"


def test_blank_lines_skipped_but_counted():
    text = record("a") + "\n\n" + '{"oops"\n'
    with pytest.raises(DataError) as err:
        parse_corpus(text, SCHEMA)
    assert "line 3" in err.value.message


def test_argument_not_mentioned():
    inst = Instance("x", (Turn("Speaker 1", "hello there"),), Query(("Speaker 1", "Frank")), 0)
    assert "ARG_NOT_MENTIONED" in codes(inst)


def test_single_turn_speaker_argument_is_valid():
    inst = Instance("x", (Turn("Speaker 1", "hello"),), Query(("Speaker 1",)), 0)
    assert validate_instance(inst, 3) == []


def test_label_out_of_range():
    inst = Instance("x", (Turn("Speaker 1", "hello"),), Query(("Speaker 1",)), 3)
    assert codes(inst) == {"LABEL_OUT_OF_RANGE"}


@pytest.mark.parametrize(
    "turns, args, code",
    [
        ((), ("a",), "NO_TURNS"),
        ((Turn("", "hi"),), ("hi",), "EMPTY_SPEAKER"),
        ((Turn("A", "   "),), ("A",), "EMPTY_TEXT"),
        ((Turn("A", "b c"),), ("A", "b", "c"), "ARG_COUNT"),
        ((Turn("A", "b"),), (), "ARG_COUNT"),
        ((Turn("A", "b"),), ("A", " "), "EMPTY_ARGUMENT"),
    ],
)
def test_violation_codes(turns, args, code):
    assert code in codes(Instance("x", turns, Query(args), 0))


def test_mention_is_whole_token():
    inst = Instance("x", (Turn("A", "Franklin said hi"),), Query(("A", "Frank")), 0)
    assert "ARG_NOT_MENTIONED" in codes(inst)


def test_multi_token_argument_matches_contiguous_run():
    ok = Instance("x", (Turn("A", "I saw Mona Lisa"),), Query(("A", "Mona Lisa")), 0)
    split = Instance("x", (Turn("A", "Mona and Lisa"),), Query(("A", "Mona Lisa")), 0)
    assert validate_instance(ok, 3) == []
    assert "ARG_NOT_MENTIONED" in codes(split)


def test_schema_round_trip_and_neutral_by_index():
    schema = Schema(("a", "b"), neutral_class=1, class_groups={"a": "sym", "b": "asym"})
    assert load_schema(dump_schema(schema)) == schema
    assert load_schema('{"class_names": ["a", "b"], "neutral_class": 0}').neutral_class == 0


@pytest.mark.parametrize(
    "text",
    [
        '{"class_names": ["a", "a"]}',
        '{"class_names": ["a"], "neutral_class": "z"}',
        '{"class_names": ["a"], "neutral_class": 3}',
        '{"neutral_class": 0}',
        "[1, 2]",
        "not json",
    ],
)
def test_bad_schema(text):
    with pytest.raises(DataError) as err:
        load_schema(text)
    assert err.value.code == "MALFORMED_SCHEMA"


@given(st.lists(instances(), min_size=1, max_size=6))
def test_round_trip(items):
    items = [Instance(f"id{i}", x.dialogue, x.query, x.label) for i, x in enumerate(items)]
    names = ["c0", "c1", "c2"]
    first = parse_corpus(dump_corpus(items, names).encode(), Schema(tuple(names)))
    again = parse_corpus(dump_corpus(first.instances, names), Schema(tuple(names)))
    assert first.instances == items
    assert again.instances == first.instances


def test_parse_is_order_preserving():
    rng = random.Random(5)
    items = [random_instance(rng, idx=i) for i in range(30)]
    parsed = parse_corpus(dump_corpus(items, ["a", "b", "c"]), Schema(("a", "b", "c")))
    assert [x.id for x in parsed.instances] == [x.id for x in items]
