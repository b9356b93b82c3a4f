"""Deterministic, model-free tokenization and sentence segmentation.

The tokenizer lowercases, keeps Unicode word characters together, and emits
each punctuation character as its own token. The sentence splitter is
rule-based around terminal punctuation with a fixed abbreviation list, so
counts are reproducible across runs and machines.
"""

import re

# Unicode word runs, or any single non-space non-word character.
_TOKEN_RE = re.compile(r"\w+|[^\w\s]", re.UNICODE)

# Candidate sentence boundary: terminal punctuation, optional closing
# quotes/brackets, then whitespace. Confirmed only when the next character
# (after optional opening quotes/brackets) is an uppercase letter or digit.
_BOUNDARY_RE = re.compile(r"([.!?]+)([\"'”’)\]]*)(\s+)")
_OPENERS = "\"'“‘(["

# Lowercased, trailing dot stripped. Internal dots kept ("u.s"). A period
# after any of these never ends a sentence.
ABBREVIATIONS = frozenset({
    "mr", "mrs", "ms", "dr", "prof", "rev", "fr", "sr", "jr", "st", "mt",
    "gen", "col", "capt", "lt", "maj", "adm", "sgt", "gov", "sen", "rep",
    "pres", "sec", "hon",
    "vs", "etc", "inc", "ltd", "co", "corp", "dept", "univ", "assn", "bros",
    "approx", "appt", "est", "min", "max", "misc",
    "no", "nos", "fig", "figs", "vol", "vols", "ch", "sec", "pp", "ed", "eds",
    "al",  # et al.
    "jan", "feb", "mar", "apr", "jun", "jul", "aug", "sep", "sept", "oct",
    "nov", "dec", "mon", "tue", "wed", "thu", "fri", "sat", "sun",
    "u.s", "u.k", "u.n", "d.c", "a.m", "p.m", "e.g", "i.e", "a.k.a",
    "ph.d", "m.d", "b.a", "m.a", "b.c", "a.d",
})


def tokenize(text: str) -> list[str]:
    """Lowercase tokens: word runs plus individual punctuation marks."""
    return _TOKEN_RE.findall(text.lower())


def detokenize(tokens: list[str]) -> str:
    """Inverse of :func:`tokenize` up to whitespace; round-trips token lists."""
    return " ".join(tokens)


def _word_before(text: str, pos: int) -> str:
    """The whitespace-delimited word ending at ``pos``, without the final dot run."""
    start = pos
    while start > 0 and not text[start - 1].isspace():
        start -= 1
    word = text[start:pos].lower()
    return word.strip("\"'“‘([")


def _is_abbreviation(word: str) -> bool:
    return bool(word) and word.rstrip(".") in ABBREVIATIONS


def _opens_sentence(text: str, pos: int) -> bool:
    while pos < len(text) and text[pos] in _OPENERS:
        pos += 1
    return pos < len(text) and (text[pos].isupper() or text[pos].isdigit())


def split_sentences(text: str) -> list[str]:
    """Split text into sentences on terminal punctuation.

    A boundary requires whitespace followed by an uppercase letter or digit
    (optionally behind opening quotes/brackets); a period after a known
    abbreviation never splits. Whitespace between sentences is dropped,
    nothing else: the concatenation of the returned sentences equals the
    input modulo whitespace. Empty input yields an empty list.
    """
    boundaries = []
    for m in _BOUNDARY_RE.finditer(text):
        if not _opens_sentence(text, m.end()):
            continue
        if m.group(1).startswith(".") and _is_abbreviation(_word_before(text, m.start())):
            continue
        boundaries.append(m.end(2))
    sentences = []
    start = 0
    for b in boundaries:
        piece = text[start:b].strip()
        if piece:
            sentences.append(piece)
        start = b
    tail = text[start:].strip()
    if tail:
        sentences.append(tail)
    return sentences
