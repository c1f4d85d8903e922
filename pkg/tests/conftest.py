"""Shared fixtures: bundled tables, toy corpora, synthetic inventories."""

from __future__ import annotations

import numpy as np
import pytest

from bigphon.corpus import CorpusManifest, Utterance, augment, split_corpus
from bigphon.g2p import load_default_rules
from bigphon.ipa import (
    PhonemeSequence,
    induce_inventory,
    load_default_classification,
)

TOY_WORDS = [
    "als", "sie", "von", "dem", "schönen", "geist", "und", "wurden", "das",
    "die", "sonne", "wasser", "mann", "kind", "stadt", "haus", "berg", "tal",
    "licht", "nacht", "tag", "morgen", "abend", "wind", "regen", "schnee",
    "blume", "baum", "wald", "fluss",
]

# 24 vowels + 25 consonants = 49 atoms, all classifiable under the bundled
# table; rich enough to supply >=30 bigrams per scope.
SYNTH_VOWELS = [
    "a", "e", "i", "o", "u", "y", "ɑ", "ɐ", "ə", "ɛ", "ɪ", "ɔ", "ʊ", "ʏ",
    "ø", "œ", "a:", "e:", "i:", "o:", "u:", "y:", "ø:", "ɛ:",
]
SYNTH_CONSONANTS = [
    "b", "c", "d", "f", "g", "h", "j", "k", "l", "m", "n", "p", "q", "r",
    "s", "t", "v", "w", "x", "z", "ç", "ŋ", "ʁ", "ʃ", "ʒ",
]


@pytest.fixture(scope="session")
def classes():
    return load_default_classification()


@pytest.fixture(scope="session")
def rules():
    return load_default_rules()


def make_toy_manifest(n: int, seed: int, sizes=None, rules=None, classes=None):
    """Augmented toy manifest of German word salads."""
    rules = rules or load_default_rules()
    classes = classes or load_default_classification()
    rng = np.random.default_rng(seed)
    texts = [
        " ".join(rng.choice(TOY_WORDS, size=int(rng.integers(3, 7))))
        for _ in range(n)
    ]
    utts = tuple(Utterance(f"u{i:04d}", t) for i, t in enumerate(texts))
    manifest = augment(CorpusManifest(utts), rules, classes)
    if sizes is not None:
        manifest = split_corpus(manifest, sizes, seed)
    return manifest


def synthetic_corpus() -> list[PhonemeSequence]:
    """Sequences whose induced inventory has exactly 49 atoms."""
    words = [[s] for s in SYNTH_VOWELS + SYNTH_CONSONANTS]
    for a in SYNTH_VOWELS[:6]:
        for b in SYNTH_VOWELS[:6]:
            words.append([a, b])
    for a in SYNTH_CONSONANTS[:6]:
        for b in SYNTH_CONSONANTS[:6]:
            words.append([a, b])
    return [PhonemeSequence.from_words([w]) for w in words]


@pytest.fixture(scope="session")
def synthetic_inventory(classes):
    return induce_inventory(synthetic_corpus(), classes)
