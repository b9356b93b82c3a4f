import re

from hypothesis import given, settings
from hypothesis import strategies as st

from mediadiet.text import detokenize, split_sentences, tokenize


class TestTokenize:
    def test_lowercase_words_and_punct(self):
        assert tokenize("Requiring most businesses to close is necessary.") == [
            "requiring", "most", "businesses", "to", "close", "is", "necessary", "."]

    def test_punctuation_separate_tokens(self):
        assert tokenize("don't stop-go!") == ["don", "'", "t", "stop", "-", "go", "!"]

    def test_empty(self):
        assert tokenize("") == []

    def test_unicode_words(self):
        assert tokenize("café naïve") == ["café", "naïve"]

    def test_deterministic(self):
        text = "The U.S. economy shrank 3.5% in 2020."
        assert tokenize(text) == tokenize(text)

    @given(st.text(max_size=200))
    @settings(max_examples=200)
    def test_idempotent_on_any_text(self, text):
        toks = tokenize(text)
        assert tokenize(detokenize(toks)) == toks


class TestSplitSentences:
    def test_fixture_cases(self, segmentation_cases):
        assert len(segmentation_cases) == 50
        for case in segmentation_cases:
            got = split_sentences(case["text"])
            assert got == case["sentences"], f"input: {case['text']!r}"

    def test_concatenation_preserved_on_fixture(self, segmentation_cases):
        for case in segmentation_cases:
            joined = "".join(split_sentences(case["text"]))
            assert re.sub(r"\s+", "", joined) == re.sub(r"\s+", "", case["text"])

    @given(st.text(max_size=300))
    @settings(max_examples=200)
    def test_concatenation_preserved_on_any_text(self, text):
        joined = "".join(split_sentences(text))
        assert re.sub(r"\s+", "", joined) == re.sub(r"\s+", "", text)

    def test_deterministic(self):
        text = "The vote passed. Opponents objected! Will it hold? Dr. Ames thinks so."
        assert split_sentences(text) == split_sentences(text)
