"""Content-coverage metrics: exact and fuzzy noun/verb overlap against the
union of reference annotations, plus hedging-language (LLOP) and length stats.

Fuzzy matching fires when the squared L2 distance between unit-normalized
word vectors is at most ``phi``. Word vectors are unit-normalized at load so
the threshold is scale-free. Out-of-vocabulary words fall back to exact
string match.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Protocol, Sequence

import numpy as np

# Hedging terms used both by the prompt ablation metric (LLOP) and the
# summary uncertainty flag. Versioned here; changing it shifts reported LLOP.
UNCERTAINTY_LEXICON = frozenset(
    {
        "likely",
        "probably",
        "possibly",
        "may",
        "might",
        "unsure",
        "not sure",
        "appears",
        "seems",
    }
)


class AnnotatorError(RuntimeError):
    pass


@dataclass(frozen=True)
class LinguisticAnnotation:
    nouns: frozenset[str]
    verbs: frozenset[str]
    source_text: str


class Annotator(Protocol):
    def annotate(self, text: str) -> tuple[set[str], set[str]]:
        """Return (nouns, verbs) as lowercased lemma sets."""
        ...


# Determiners, pronouns, prepositions, copulas, etc. that never count as
# content words.
_STOPWORDS = frozenset(
    """a an the this that these those it its his her their our your my some any
    no one two three four five six seven eight nine ten and or but of in on at
    by for with to from into onto over under near next behind front back up
    down out off as is are was were be been being am do does did doing have
    has had having will would can could shall should might must not there
    here while during about against between among around through across
    other others each all both few more most very too also just only such
    so than then when where which who whom whose what how if because while
    i you he she we they them him us me possibly probably likely maybe
    perhaps""".split()
)

# Base forms of verbs common in caption text; the rule annotator tags a token
# as a verb only if one of its candidate lemmas is in this set.
_VERB_LEXICON = frozenset(
    """sit stand walk run jump ride hold play eat drink chase throw catch fly
    swim look watch wear carry drive pull push climb skate ski surf cook cut
    read write talk speak smile laugh sleep lie lay hang point reach serve
    swing hit kick feed graze perch park stare gaze pose lean wait cross
    travel race jog dance sing wave stretch bend kneel crouch grab touch
    open close fill pour slice bite chew lick sniff bark herd row sail paddle
    pedal steer land take make go come get give use show work move turn stop
    start help place put set rest top cover surround overlook face contain
    include feature display depict describe jump land""".split()
)

_WORD_RE = re.compile(r"[a-z]+(?:-[a-z]+)*")


def _verb_lemmas(token: str) -> list[str]:
    """Candidate base forms for a possibly inflected verb."""
    out = [token]
    if token.endswith("ies") and len(token) > 4:
        out.append(token[:-3] + "y")
    if token.endswith("es") and len(token) > 3:
        out.append(token[:-2])
    if token.endswith("s") and len(token) > 2:
        out.append(token[:-1])
    if token.endswith("ing") and len(token) > 4:
        stem = token[:-3]
        out.extend([stem, stem + "e"])
        if len(stem) > 2 and stem[-1] == stem[-2]:
            out.append(stem[:-1])  # running -> run
    if token.endswith("ed") and len(token) > 3:
        stem = token[:-2]
        out.extend([stem, stem[:-1] if stem.endswith("i") else stem + "e"])
        if len(stem) > 2 and stem[-1] == stem[-2]:
            out.append(stem[:-1])
    return out


def _noun_lemma(token: str) -> str:
    if token.endswith("ies") and len(token) > 4:
        return token[:-3] + "y"
    if token.endswith(("ses", "xes", "zes", "ches", "shes")) and len(token) > 4:
        return token[:-2]
    if token.endswith("s") and not token.endswith("ss") and len(token) > 3:
        return token[:-1]
    return token


class RuleAnnotator:
    """Deterministic rule-lexicon POS fallback: no external service needed.

    A token is a verb when one of its candidate lemmas is in the bundled verb
    lexicon, a noun otherwise (stopwords excluded). Crude next to a real
    tagger, but deterministic and adequate for fixtures and offline runs.
    """

    version = "rule-lexicon-1"

    def annotate(self, text: str) -> tuple[set[str], set[str]]:
        nouns: set[str] = set()
        verbs: set[str] = set()
        for token in _WORD_RE.findall(text.lower()):
            if token in _STOPWORDS:
                continue
            lemma = next((l for l in _verb_lemmas(token) if l in _VERB_LEXICON), None)
            if lemma is not None:
                verbs.add(lemma)
            else:
                nouns.add(_noun_lemma(token))
        return nouns, verbs


class HttpAnnotator:
    """POS/lemma provider backed by ``POST /v1/annotate``."""

    def __init__(self, base_url: str, client=None, timeout: float = 30.0):
        import httpx

        self._client = client or httpx.Client(base_url=base_url, timeout=timeout)

    def annotate(self, text: str) -> tuple[set[str], set[str]]:
        try:
            resp = self._client.post("/v1/annotate", json={"text": text})
            resp.raise_for_status()
        except Exception as exc:
            raise AnnotatorError(f"annotator unavailable: {exc}") from exc
        body = resp.json()
        return (
            {str(n).lower() for n in body["nouns"]},
            {str(v).lower() for v in body["verbs"]},
        )


def annotate(text: str, annotator: Annotator) -> LinguisticAnnotation:
    nouns, verbs = annotator.annotate(text)
    return LinguisticAnnotation(
        nouns=frozenset(n for n in nouns if n),
        verbs=frozenset(v for v in verbs if v),
        source_text=text,
    )


class EmbeddingTable:
    """word -> unit-normalized vector; loaded from 'word v1 ... vD' lines."""

    def __init__(self, vectors: dict[str, Sequence[float]]):
        self.dim: Optional[int] = None
        self._vecs: dict[str, np.ndarray] = {}
        for word, values in vectors.items():
            vec = np.asarray(values, dtype=float)
            if self.dim is None:
                self.dim = vec.shape[0]
            elif vec.shape[0] != self.dim:
                raise ValueError(f"vector dim mismatch for {word!r}")
            norm = np.linalg.norm(vec)
            if norm == 0:
                raise ValueError(f"zero vector for {word!r}")
            self._vecs[word] = vec / norm

    @classmethod
    def load(cls, path: str | Path) -> "EmbeddingTable":
        vectors = {}
        with Path(path).open() as fh:
            for line in fh:
                parts = line.split()
                if len(parts) < 2:
                    continue
                vectors[parts[0]] = [float(x) for x in parts[1:]]
        return cls(vectors)

    def __contains__(self, word: str) -> bool:
        return word in self._vecs

    def __getitem__(self, word: str) -> np.ndarray:
        return self._vecs[word]


def _overlap(cand_words: frozenset[str], ref_union: set[str]) -> Optional[float]:
    if not ref_union:
        return None
    hits = sum(1 for w in ref_union if w in cand_words)
    return hits / len(ref_union)


def exact_overlap(
    cand: LinguisticAnnotation, refs: Sequence[LinguisticAnnotation]
) -> tuple[Optional[float], Optional[float]]:
    """Fraction of the reference noun/verb union recalled exactly.

    Returns None for a class whose reference union is empty (excluded image).
    """
    if not refs:
        raise ValueError("refs must be non-empty")
    noun_union = set().union(*(r.nouns for r in refs))
    verb_union = set().union(*(r.verbs for r in refs))
    return _overlap(cand.nouns, noun_union), _overlap(cand.verbs, verb_union)


def _fuzzy_hit(ref_word: str, cand_words: frozenset[str], table: EmbeddingTable, phi: float) -> bool:
    """True when some candidate word recalls ``ref_word``: exact string match
    (distance zero, OOV or not) or embedding distance at most phi."""
    if ref_word in cand_words:
        return True
    if ref_word not in table:
        return False
    vec = table[ref_word]
    for word in cand_words:
        if word in table:
            dist_sq = float(np.sum((vec - table[word]) ** 2))
            if dist_sq <= phi:
                return True
    return False


def fuzzy_overlap(
    cand: LinguisticAnnotation,
    refs: Sequence[LinguisticAnnotation],
    table: EmbeddingTable,
    phi: float = 0.1,
) -> tuple[Optional[float], Optional[float]]:
    """Like exact_overlap, but a candidate word also matches any reference
    word within squared embedding distance ``phi``."""
    if not refs:
        raise ValueError("refs must be non-empty")
    if phi < 0:
        raise ValueError("phi must be >= 0")
    results = []
    for cand_words, union in (
        (cand.nouns, set().union(*(r.nouns for r in refs))),
        (cand.verbs, set().union(*(r.verbs for r in refs))),
    ):
        if not union:
            results.append(None)
            continue
        hits = sum(1 for w in union if _fuzzy_hit(w, cand_words, table, phi))
        results.append(hits / len(union))
    return results[0], results[1]


@dataclass
class CoverageReport:
    noun_exact: float
    verb_exact: float
    noun_fuzzy: float
    verb_fuzzy: float
    per_image: list[dict] = field(default_factory=list)
    excluded_count: int = 0

    def to_json_obj(self) -> dict:
        return {
            "noun_exact": self.noun_exact,
            "verb_exact": self.verb_exact,
            "noun_fuzzy": self.noun_fuzzy,
            "verb_fuzzy": self.verb_fuzzy,
            "excluded_count": self.excluded_count,
        }


def coverage_report(
    candidates: Sequence[str],
    references: Sequence[Sequence[str]],
    annotator: Annotator,
    table: EmbeddingTable,
    phi: float = 0.1,
    image_ids: Optional[Sequence[str]] = None,
) -> CoverageReport:
    """Corpus coverage: per-image exact/fuzzy noun and verb overlap, averaged
    over images whose reference union is non-empty for that class."""
    per_image = []
    sums = {"ne": [], "ve": [], "nf": [], "vf": []}
    excluded = 0
    for idx, (cand_text, ref_texts) in enumerate(zip(candidates, references)):
        cand = annotate(cand_text, annotator)
        refs = [annotate(r, annotator) for r in ref_texts]
        ne, ve = exact_overlap(cand, refs)
        nf, vf = fuzzy_overlap(cand, refs, table, phi)
        if ne is None and ve is None:
            excluded += 1
        row = {
            "image_id": image_ids[idx] if image_ids else str(idx),
            "noun_exact": ne,
            "verb_exact": ve,
            "noun_fuzzy": nf,
            "verb_fuzzy": vf,
        }
        per_image.append(row)
        for key, val in (("ne", ne), ("ve", ve), ("nf", nf), ("vf", vf)):
            if val is not None:
                sums[key].append(val)

    def mean(vals):
        return sum(vals) / len(vals) if vals else 0.0

    return CoverageReport(
        noun_exact=mean(sums["ne"]),
        verb_exact=mean(sums["ve"]),
        noun_fuzzy=mean(sums["nf"]),
        verb_fuzzy=mean(sums["vf"]),
        per_image=per_image,
        excluded_count=excluded,
    )


def llop(captions: Sequence[str], lexicon: frozenset[str] = UNCERTAINTY_LEXICON) -> float:
    """Fraction of captions containing at least one hedging term as a whole
    word (phrases in the lexicon match as whole-word sequences)."""
    if not captions:
        raise ValueError("captions must be non-empty")
    patterns = [
        re.compile(r"\b" + re.escape(term) + r"\b", re.IGNORECASE) for term in lexicon
    ]
    hits = sum(1 for cap in captions if any(p.search(cap) for p in patterns))
    return hits / len(captions)


def length_stats(captions: Sequence[str]) -> dict[str, float]:
    if not captions:
        raise ValueError("captions must be non-empty")
    return {
        "mean_chars": sum(len(c) for c in captions) / len(captions),
        "mean_commas": sum(c.count(",") for c in captions) / len(captions),
    }
