import sys

import pytest
from hypothesis import given, strategies as st

from bumpfix.apidiff import (
    TRUNCATION_SENTINEL,
    ChangeKind,
    DiffSource,
    Visibility,
    cache_path,
    excerpt_for_symbols,
    filter_relevant,
    flatten,
    m2_jar_path,
    obtain_diff,
    parse_diff,
    render_for_prompt,
    run_differ,
    split_params,
)
from bumpfix.errors import DifferFailed

from .conftest import FIXTURES, EXCERPTS

GEO_DIFF = FIXTURES / "cache" / "apidiff" / "com.acme__acme-geo__1.0__2.0.txt"


def test_fop_diff_structure():
    changes = parse_diff((EXCERPTS / "fop_apidiff.txt").read_text())
    assert [c.kind for c in changes] == [ChangeKind.REMOVED_METHOD] + [ChangeKind.NEW_METHOD] * 4
    assert all(c.member_name == "newInstance" and c.is_static for c in changes)
    assert all(c.visibility is Visibility.PUBLIC for c in changes)
    assert changes[0].signature == []
    assert changes[4].signature == ["java.net.URI", "java.io.InputStream"]
    assert [len(c.children) for c in changes] == [0, 0, 2, 0, 2]
    kids = [k for c in changes for k in c.children]
    assert all(k.kind is ChangeKind.NEW_EXCEPTION for k in kids)
    assert [k.declaring_type for k in kids[:2]] == ["org.xml.sax.SAXException", "java.io.IOException"]


def test_jasperreports_sentences():
    changes = parse_diff((EXCERPTS / "jasperreports_apidiff.txt").read_text())
    assert render_for_prompt(changes) + "\n" == (EXCERPTS / "jasperreports_expected.txt").read_text()


def test_class_context_and_nesting():
    changes = parse_diff(GEO_DIFF.read_text())
    top = [(c.kind, c.qualified_name) for c in changes]
    assert (ChangeKind.REMOVED_METHOD, "com.acme.geo.Pen.setLineWidth") in top
    assert (ChangeKind.REMOVED_CLASS, "com.acme.geo.legacy.Plugin") in top
    removed_cls = next(c for c in changes if c.kind is ChangeKind.REMOVED_CLASS)
    assert [c.member_name for c in removed_cls.children if c.kind is ChangeKind.REMOVED_METHOD] == ["Plugin", "getName"]
    assert any(c.kind is ChangeKind.NEW_EXCEPTION for c in flatten(changes))


def test_filtering_keeps_replacements():
    changes = parse_diff(GEO_DIFF.read_text())
    kept = filter_relevant(changes, {"newInstance"})
    assert [c.kind for c in kept] == [ChangeKind.REMOVED_METHOD, ChangeKind.NEW_METHOD, ChangeKind.NEW_METHOD]
    both = filter_relevant(changes, {"Plugin"})
    assert {c.declaring_type for c in both} == {"com.acme.geo.Plugin", "com.acme.geo.legacy.Plugin"}
    assert filter_relevant(changes, set()) == changes


def test_excerpt_modes():
    changes = parse_diff(GEO_DIFF.read_text())
    filtered = excerpt_for_symbols(changes, {"setLineWidth"})
    assert filtered.rendered_text == (
        "- Method com.acme.geo.Pen.setLineWidth(float) has been removed in the new version of the dependency."
    )
    fallback = excerpt_for_symbols(changes, {"nothingMatches"})
    assert len(fallback.changes) == len(changes)
    full = excerpt_for_symbols(changes, {"getName"}, mode="full")
    assert full.changes[0].kind is ChangeKind.REMOVED_CLASS
    raw = excerpt_for_symbols(changes, {"newInstance"}, style="raw").rendered_text
    assert "\t+++  NEW EXCEPTION: java.io.IOException" in raw
    with pytest.raises(ValueError):
        excerpt_for_symbols(changes, set(), mode="bogus")


def test_truncation_at_change_boundary():
    changes = parse_diff(GEO_DIFF.read_text())
    ex = excerpt_for_symbols(changes, set(), max_chars=250)
    assert ex.truncated
    assert ex.rendered_text.endswith(TRUNCATION_SENTINEL)
    assert len(ex.rendered_text) <= 250
    assert all(line.startswith("- ") for line in ex.rendered_text.splitlines()[:-1])


def test_constructor_and_raw_lines():
    text = (
        "***! MODIFIED CLASS: PUBLIC a.B\n"
        "\t---! REMOVED CONSTRUCTOR: PUBLIC(-) B(int)\n"
        "\t---! REMOVED FIELD: PUBLIC(-) int SIZE\n"
        "\t***  MODIFIED ANNOTATION: x.Y\n"
    )
    out = render_for_prompt(parse_diff(text))
    assert out.splitlines() == [
        "- Constructor a.B(int) has been removed in the new version of the dependency.",
        "- Field a.B.SIZE has been removed in the new version of the dependency.",
    ]


def test_split_params_generics():
    assert split_params("java.util.Map<java.lang.String, java.util.List<a.B>>, int") == [
        "java.util.Map<java.lang.String, java.util.List<a.B>>",
        "int",
    ]
    assert split_params("") == []


def test_obtain_diff_sources(tmp_path, cases):
    case = cases["geo-report-acme-geo"]
    assert obtain_diff(case, DiffSource(), cache_dir=FIXTURES / "cache") == GEO_DIFF.read_text()
    assert obtain_diff(case, DiffSource(precomputed_file=str(GEO_DIFF))) == GEO_DIFF.read_text()
    with pytest.raises(FileNotFoundError):
        obtain_diff(case, DiffSource(), cache_dir=tmp_path)

    old, new = tmp_path / "old.jar", tmp_path / "new.jar"
    old.write_text("o")
    new.write_text("n")
    differ = f"{sys.executable} -c \"import sys; print('+++  NEW METHOD: PUBLIC(+) void f()', sys.argv[1:])\" {{old_jar}} {{new_jar}}"
    got = obtain_diff(case, DiffSource(old_jar=str(old), new_jar=str(new)), differ, tmp_path)
    assert "NEW METHOD" in got and str(old) in got
    assert cache_path(tmp_path, "com.acme", "acme-geo", "1.0", "2.0").read_text() == got
    assert m2_jar_path("/m2", "com.acme", "geo", "1.0").as_posix() == "/m2/com/acme/geo/1.0/geo-1.0.jar"


def test_differ_failure(tmp_path):
    jar = tmp_path / "a.jar"
    jar.write_text("x")
    with pytest.raises(DifferFailed) as info:
        run_differ(f"{sys.executable} -c \"import sys; sys.stderr.write('boom'); sys.exit(4)\"", jar, jar)
    assert info.value.stderr == "boom"
    with pytest.raises(DifferFailed):
        run_differ("no-such-differ-binary {old_jar}", jar, jar)


_ident = st.from_regex(r"[a-z][a-zA-Z0-9]{0,8}", fullmatch=True)


@given(st.lists(st.tuples(st.sampled_from(["+++ ", "---!"]), _ident, st.lists(_ident, max_size=3)), max_size=10))
def test_method_lines_roundtrip(entries):
    text = "***! MODIFIED CLASS: PUBLIC p.Q\n" + "".join(
        f"\t{m} {'NEW' if m.startswith('+') else 'REMOVED'} METHOD: PUBLIC void {name}({', '.join('p.' + a for a in args)})\n"
        for m, name, args in entries
    )
    changes = parse_diff(text)
    assert [(c.member_name, c.signature) for c in changes] == [
        (name, ["p." + a for a in args]) for _, name, args in entries
    ]
    assert all(c.declaring_type == "p.Q" for c in changes)
