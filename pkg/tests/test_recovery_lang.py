"""Strategy language: grammar, includes, selector rules, formatting."""

from pathlib import Path

import pytest

from votingfarm.recovery.lang import (
    Action,
    And,
    COMPLEMENT,
    EntityRef,
    Faulty,
    FULFILLED,
    GROUP,
    GuardedRule,
    NODE,
    Not,
    Or,
    PhaseEq,
    RlProgram,
    RlSyntaxError,
    THREAD,
    UndefinedName,
    UnknownEntity,
    format_program,
    load_definitions,
    parse_rl,
    tokenize,
)

SCEN = Path(__file__).resolve().parents[1] / "src" / "votingfarm" / "scenarios"

T1 = EntityRef(THREAD, 1)
T2 = EntityRef(THREAD, 2)
T3 = EntityRef(THREAD, 3)
T4 = EntityRef(THREAD, 4)
G1 = EntityRef(GROUP, 1)
AT = EntityRef(FULFILLED)
TILDE = EntityRef(COMPLEMENT)


def parse(text, **kw):
    return parse_rl(text, **kw)


def test_replace_with_spare_strategy_parses_to_expected_tree():
    program = parse((SCEN / "table4.rl").read_text(), include_dirs=(str(SCEN),))
    assert program.includes == ("vf_phases.h",)
    assert program.default is None
    (rule,) = program.rules
    assert rule.condition == Or(Faulty(T1), PhaseEq(T1, 4))
    assert rule.actions == (
        Action("KILL", (T1,)),
        Action("START", (T4,)),
        Action("WARN", (T2, T3)),
    )


def test_degradation_strategy_uses_group_selectors():
    program = parse((SCEN / "table5.rl").read_text(), include_dirs=(str(SCEN),))
    (rule,) = program.rules
    assert rule.condition == Or(Faulty(G1), PhaseEq(G1, 4))
    assert rule.actions == (Action("KILL", (AT,)), Action("WARN", (TILDE,)))


def test_and_binds_tighter_than_or():
    program = parse(
        "IF [ -FAULTY THREAD1 OR -FAULTY THREAD2 AND -FAULTY THREAD3 ]\n"
        "THEN KILL THREAD1 FI"
    )
    assert program.rules[0].condition == Or(Faulty(T1), And(Faulty(T2), Faulty(T3)))


def test_not_binds_tighter_than_and():
    program = parse(
        "IF [ NOT -FAULTY THREAD1 AND -FAULTY THREAD2 ] THEN KILL THREAD1 FI"
    )
    assert program.rules[0].condition == And(Not(Faulty(T1)), Faulty(T2))


def test_parentheses_override_precedence():
    program = parse(
        "IF [ ( -FAULTY THREAD1 OR -FAULTY THREAD2 ) AND -FAULTY THREAD3 ]\n"
        "THEN KILL THREAD1 FI"
    )
    assert program.rules[0].condition == And(Or(Faulty(T1), Faulty(T2)), Faulty(T3))


def test_newlines_inside_condition_brackets_are_insignificant():
    program = parse(
        "IF [ -FAULTY THREAD1\n     OR\n     -FAULTY THREAD2 ]\nTHEN KILL THREAD1 FI"
    )
    assert program.rules[0].condition == Or(Faulty(T1), Faulty(T2))


def test_actions_split_by_newline_and_by_and_are_equivalent():
    by_nl = parse("IF [ -FAULTY THREAD1 ] THEN\nKILL THREAD1\nWARN THREAD2\nFI")
    by_and = parse("IF [ -FAULTY THREAD1 ] THEN KILL THREAD1 AND WARN THREAD2 FI")
    assert by_nl.rules[0].actions == by_and.rules[0].actions


def test_warn_target_list_stays_one_action():
    program = parse("IF [ -FAULTY THREAD1 ] THEN WARN THREAD2, THREAD3, THREAD4 FI")
    assert program.rules[0].actions == (Action("WARN", (T2, T3, T4)),)


def test_node_verbs_take_node_numbers():
    program = parse(
        "IF [ -FAULTY THREAD1 ] THEN REBOOT 3 AND SHUTDOWN 1 AND PURGE FI"
    )
    assert program.rules[0].actions == (
        Action("REBOOT", (EntityRef(NODE, 3),)),
        Action("SHUTDOWN", (EntityRef(NODE, 1),)),
        Action("PURGE"),
    )


def test_default_block_and_duplicate_default():
    program = parse("DEFAULT\nWARN THREAD1\nFI")
    assert program.rules == ()
    assert program.default == (Action("WARN", (T1,)),)
    with pytest.raises(RlSyntaxError, match="more than one DEFAULT"):
        parse("DEFAULT\nPURGE\nFI\nDEFAULT\nPURGE\nFI")


def test_empty_source_is_rejected():
    with pytest.raises(RlSyntaxError, match="no rules and no DEFAULT"):
        parse("   \n# only a comment\n")


def test_empty_action_block_is_rejected():
    with pytest.raises(RlSyntaxError, match="empty action block"):
        parse("IF [ -FAULTY THREAD1 ] THEN FI")


def test_undefined_deref_carries_position():
    src = "IF [ -PHASE THREAD1 == {UNDEF} ] THEN KILL THREAD1 FI"
    with pytest.raises(UndefinedName) as exc:
        parse(src)
    assert exc.value.line == 1
    assert exc.value.col == src.index("{UNDEF}") + 1
    assert "UNDEF" in str(exc.value)


def test_seeded_definitions_avoid_includes():
    program = parse(
        "IF [ -PHASE THREAD1 == {VFP_FAILURE} ] THEN KILL THREAD1 FI",
        definitions={"VFP_FAILURE": 4},
    )
    assert program.rules[0].condition == PhaseEq(T1, 4)


def test_malformed_entity_token():
    with pytest.raises(UnknownEntity, match="THREADX"):
        tokenize("IF [ -FAULTY THREADX ]")
    with pytest.raises(UnknownEntity, match="GROUPA"):
        tokenize("KILL GROUPA")


def test_selectors_forbidden_in_conditions():
    with pytest.raises(RlSyntaxError, match="cannot appear in a condition"):
        parse("IF [ -FAULTY THREAD@ ] THEN KILL THREAD1 FI")


def test_selector_requires_exactly_one_group():
    with pytest.raises(RlSyntaxError, match="exactly one group"):
        parse("IF [ -FAULTY THREAD1 ] THEN KILL THREAD@ FI")
    with pytest.raises(RlSyntaxError, match="exactly one group"):
        parse("IF [ -FAULTY GROUP1 OR -FAULTY GROUP2 ] THEN KILL THREAD@ FI")
    # one group among thread predicates is fine
    program = parse("IF [ -FAULTY GROUP2 AND -FAULTY THREAD1 ] THEN KILL THREAD~ FI")
    assert program.rules[0].actions == (Action("KILL", (TILDE,)),)


def test_selector_forbidden_in_default():
    with pytest.raises(RlSyntaxError, match="DEFAULT block cannot use"):
        parse("IF [ -FAULTY GROUP1 ] THEN KILL THREAD1 FI\nDEFAULT\nWARN THREAD@\nFI")


def test_include_resolution_and_missing_include(tmp_path):
    hdr = tmp_path / "limits.h"
    hdr.write_text("// thresholds\n#define LIMIT 7  /* inline */\nnot a define\n")
    program = parse(
        'INCLUDE "limits.h"\nIF [ -PHASE THREAD1 == {LIMIT} ] THEN KILL THREAD1 FI',
        include_dirs=(str(tmp_path),),
    )
    assert program.includes == ("limits.h",)
    assert program.rules[0].condition == PhaseEq(T1, 7)

    with pytest.raises(RlSyntaxError, match="not found") as exc:
        parse('INCLUDE "no_such.h"\nDEFAULT\nPURGE\nFI')
    assert exc.value.line == 1


def test_load_definitions_parses_only_define_lines(tmp_path):
    hdr = tmp_path / "mixed.h"
    hdr.write_text(
        "#define A 1\n"
        "# define B -2\n"
        "// #define C 3\n"
        "#define D 4 trailing junk\n"
        "int x = 5;\n"
    )
    assert load_definitions(str(hdr)) == {"A": 1, "B": -2}


def test_syntax_errors_carry_line_and_column():
    with pytest.raises(RlSyntaxError) as exc:
        parse("IF [ -FAULTY THREAD1 ]\nTHEN\n    FROB THREAD1\nFI")
    assert exc.value.line == 3
    with pytest.raises(RlSyntaxError, match="unexpected character"):
        parse("IF [ -FAULTY THREAD1 ] THEN KILL THREAD1 FI $")


def test_format_round_trip_preserves_structure():
    for name in ("table4.rl", "table5.rl"):
        first = parse((SCEN / name).read_text(), include_dirs=(str(SCEN),))
        text = format_program(first)
        second = parse(text, include_dirs=(str(SCEN),))
        assert second == first


def test_format_parenthesizes_only_where_needed():
    program = parse(
        "IF [ ( -FAULTY THREAD1 OR -FAULTY THREAD2 ) AND NOT -FAULTY THREAD3 ]\n"
        "THEN KILL THREAD1 FI"
    )
    text = format_program(program)
    assert "( -FAULTY THREAD1 OR -FAULTY THREAD2 )" in text
    assert parse(text) == program
