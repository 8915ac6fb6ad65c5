import itertools
import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vgp import align, corpus
from vgp.align import NULL, SentencePair, TranslationTable

TOY = [(("x",), ("u",)), (("x", "y"), ("u", "v"))]


def test_pseudo_parallel_pair_counts():
    def rec(n):
        caps = [corpus.RawCaption("i", k, "a b", ("a", "b")) for k in range(n)]
        return corpus.ImageRecord("i", caps, [])

    for n, want in ((5, 10), (2, 1), (1, 0)):
        assert len(align.build_pseudo_parallel({"i": rec(n)})) == want


def test_pseudo_parallel_spans_are_trimmed():
    stops = corpus.load_stopwords()
    caps, ents = corpus.parse_annotations([
        "i\t0\t[/EN#1/people A man] runs",
        "i\t1\tthere is [/EN#1/people the tall man]",
    ])
    ents = [corpus.normalize_entity(e, stops) for e in ents]
    (p,) = align.build_pseudo_parallel({"i": corpus.ImageRecord("i", caps, ents)})
    assert p.src[0] == "a"
    assert p.src_spans == (((1, 2), "man"),)
    assert p.tgt_spans == (((3, 5), "tall man"),)
    assert p.reversed().src_spans == p.tgt_spans


def test_ibm1_toy_without_null():
    lex = align.train_ibm1(TOY, iterations=20, null=False)
    assert lex("u", "x") > 0.99


def test_ibm1_toy_with_null_converges_slowly():
    # x and NULL co-occur with exactly the same targets, so NULL absorbs part of t(u|.)
    lex = align.train_ibm1(TOY, iterations=20)
    assert 0.9 < lex("u", "x") < 0.99
    assert lex("v", "y") > lex("u", "y")


def test_ibm1_single_pair_symmetry():
    lex = align.train_ibm1([(("a",), ("b",))], iterations=5)
    assert lex("b", "a") == pytest.approx(lex("b", NULL))


def test_ibm1_deterministic():
    rng = random.Random(0)
    bitext = [(tuple(rng.choices("abcd", k=3)), tuple(rng.choices("wxyz", k=3))) for _ in range(20)]
    a = align.train_ibm1(bitext, 5, seed=1)
    b = align.train_ibm1(bitext, 5, seed=2)
    assert a.prob == b.prob and a.loglik == b.loglik


def test_ibm1_rows_are_distributions():
    lex = align.train_ibm1(TOY, iterations=3)
    for row in lex.prob.values():
        assert sum(row.values()) == pytest.approx(1.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.lists(st.sampled_from("abcde"), min_size=1, max_size=4),
                          st.lists(st.sampled_from("vwxyz"), min_size=1, max_size=4)),
                min_size=1, max_size=6),
       st.booleans())
def test_ibm1_loglik_non_decreasing(bitext, null):
    lex = align.train_ibm1(bitext, iterations=8, null=null)
    h = lex.loglik
    assert all(b >= a - 1e-9 * abs(a) for a, b in zip(h, h[1:]))


def test_viterbi_toy():
    lex = align.train_ibm1(TOY, iterations=20, null=False)
    assert align.viterbi_align(("x", "y"), ("u", "v"), lex) == {(0, 0), (1, 1)}


def test_viterbi_null_and_ties():
    lex = align.LexiconTable({NULL: {"u": 0.9}, "x": {"u": 0.1}, "y": {"u": 0.1}}, [])
    assert align.viterbi_align(("x", "y"), ("u",), lex) == set()
    lex = align.LexiconTable({"a": {"u": 0.4}, "b": {"u": 0.2}}, [])
    assert align.viterbi_align(("a", "b", "a"), ("u",), lex) == {(0, 0)}


def test_gdfa_traced_examples():
    g = align.symmetrize_gdfa
    assert g({(0, 0), (1, 1)}, {(0, 0), (1, 1)}, 2, 2) == {(0, 0), (1, 1)}
    assert g({(0, 0)}, {(0, 1)}, 2, 2) == set()
    assert g({(0, 0), (1, 0)}, {(0, 0)}, 2, 2) == {(0, 0), (1, 0)}


def test_gdfa_either_mode_admits_directional_points():
    assert align.symmetrize_gdfa({(0, 0)}, {(0, 1)}, 2, 2, final="either") == {(0, 0)}
    with pytest.raises(ValueError):
        align.symmetrize_gdfa(set(), set(), 1, 1, final="nope")


def _subsets(cells):
    for mask in range(1 << len(cells)):
        yield {c for k, c in enumerate(cells) if mask >> k & 1}


def test_gdfa_bounds_exhaustive_2x2():
    cells = list(itertools.product(range(2), range(2)))
    for f in _subsets(cells):
        for b in _subsets(cells):
            for mode in ("both", "either"):
                out = align.symmetrize_gdfa(f, b, 2, 2, mode)
                assert f & b <= out <= f | b


def test_consistency():
    assert align.consistent((0, 1), (0, 1), {(0, 0), (1, 1)})
    assert not align.consistent((0, 2), (0, 2), {(0, 0), (1, 2)})
    assert not align.consistent((0, 1), (0, 1), {(2, 2)})


def test_extract_pairs():
    p = SentencePair("i", 0, 1, ("a", "b"), ("c", "d"), (((0, 2), "ab"),), (((0, 2), "cd"),))
    assert align.extract_entity_pairs(p, {(0, 0), (1, 1)}) == [("ab", "cd")]
    assert align.extract_entity_pairs(p, {(0, 0), (1, 2)}) == []


def test_translation_similarity():
    t = TranslationTable()
    t.add("i", "j", 3)
    t.add("i", "k", 1)
    assert t.p_i_given_j("i", "j") == pytest.approx(0.75)
    assert t.p_j_given_i("i", "j") == pytest.approx(1.0)
    assert align.translation_similarity("i", "j", t) == pytest.approx(0.75)
    assert align.translation_similarity("j", "i", t) == pytest.approx(0.75)
    assert align.translation_similarity("i", "zzz", t) == 0.0

    u = TranslationTable()
    u.add("a", "b", 2)
    assert align.translation_similarity("a", "b", u) == pytest.approx(1.0)


def test_transposed_table_same_similarity():
    counts = Counter({("a", "b"): 3, ("a", "c"): 1, ("b", "d"): 2})
    t, tt = TranslationTable(counts.copy()), TranslationTable(counts.copy(), transposed=True)
    for i, j in (("a", "b"), ("a", "c"), ("b", "d")):
        assert align.translation_similarity(i, j, t) == pytest.approx(align.translation_similarity(i, j, tt))


def test_table_round_trip(tmp_path):
    t = TranslationTable()
    t.add("red car", "car", 2)
    t.add("car", "sedan")
    path = tmp_path / "tt.tsv"
    with open(path, "w") as f:
        t.dump(f)
    with open(path) as f:
        back = TranslationTable.load(f)
    assert back.counts == t.counts
    assert back.marginal("car") == 3


def test_build_translation_table_on_corpus():
    stops = corpus.load_stopwords()
    images = {}
    for k, (who, what) in enumerate([("man", "horse"), ("man", "dog"), ("woman", "horse"),
                                      ("woman", "cat"), ("boy", "dog"), ("boy", "cat")]):
        lines = [f"i{k}\t{c}\t[/EN#1/people {art} {who}] {verb} [/EN#2/animals {art2} {what}]"
                 for c, (art, verb, art2) in enumerate([("a", "rides", "a"), ("the", "pets", "the"),
                                                        ("a", "feeds", "the")])]
        caps, ents = corpus.parse_annotations(lines)
        ents = [corpus.normalize_entity(e, stops) for e in ents]
        images[f"i{k}"] = corpus.ImageRecord(f"i{k}", caps, ents)
    run = align.build_translation_table(images, iterations=10)
    assert len(run.pairs) == 18
    # two images per word, three caption pairs each
    assert run.table.count("man", "man") == 6
    assert run.table.count("horse", "horse") == 6
    assert align.translation_similarity("man", "man", run.table) > 0
    assert align.translation_similarity("man", "horse", run.table) == 0.0
