"""Character and property tracking over story time, plus word lexicons.

Walking the sentence trees we record, per declared character: state
adjectives (from affirmative copulas and from ATTR adjectives on nodes that
reference the character), possessions and body parts (from possessor
features), and the sentence indices where the character is mentioned.

The same object carries the antonym and synonym lexicons used by state
extrapolation and lexical choice.  Body parts are told apart from other
possessions by a small closed lexeme list.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .realizer import _load_data_file
from .trees import Story, char_map, walk

BODY_PARTS = frozenset({
    "paw", "tail", "hand", "arm", "leg", "head", "wing", "foot", "claw",
    "ear", "eye", "nose", "beak", "fur", "whisker", "back", "face",
})


@dataclass
class ActorRecord:
    """What the story has asserted about one character so far."""

    id: str
    states: list = field(default_factory=list)  # (adjective, sentence index), assertion order
    possessions: set = field(default_factory=set)
    body_parts: set = field(default_factory=set)
    mentions: list = field(default_factory=list)  # sentence indices, non-decreasing

    def state_lexemes(self):
        seen = []
        for adj, _ in self.states:
            if adj not in seen:
                seen.append(adj)
        return seen

    def latest_state(self, position):
        """Most recent state asserted at or before `position`, or None."""
        best = None
        for adj, idx in self.states:
            if idx <= position:
                best = adj
        return best


@dataclass
class StoryDatabase:
    actors: dict
    characters: dict
    antonyms: dict
    synonyms: dict
    mention_order: dict = field(default_factory=dict)  # sentence idx -> [char ids in document order]


def load_word_lexicon(path=None) -> tuple:
    """(antonyms, synonyms) from the lexicon file; checked at load.

    Antonym entries are [a, b] pairs expanded into a symmetric map; a
    lexeme may appear in at most one pair.  Synonym entries carry a corpus
    frequency rank and a character length.
    """
    data = _load_data_file("word_lexicon.json", path)
    antonyms = {}
    for a, b in data.get("antonyms", []):
        if a in antonyms or b in antonyms:
            raise ValueError(f"antonym pair ({a!r}, {b!r}) conflicts with an earlier pair")
        if a == b:
            raise ValueError(f"{a!r} cannot be its own antonym")
        antonyms[a] = b
        antonyms[b] = a
    synonyms = {}
    for word, entries in data.get("synonyms", {}).items():
        rows = []
        for entry in entries:
            if entry["word"] == word:
                raise ValueError(f"{word!r} cannot be its own synonym")
            rows.append({"word": entry["word"], "freq_rank": int(entry["freq_rank"]),
                         "len": int(entry.get("len", len(entry["word"])))})
        synonyms[word] = rows
    return antonyms, synonyms


def build_database(story: Story, lexicon=None) -> StoryDatabase:
    """Deterministic pass over the story trees; every declared character
    gets a record even when never mentioned."""
    antonyms, synonyms = lexicon if lexicon is not None else load_word_lexicon()
    chars = char_map(story)
    actors = {cid: ActorRecord(cid) for cid in chars}
    mention_order = {}

    for idx, tree in enumerate(story.sentences):
        seen_here = []
        for path, node in walk(tree):
            if node.ref in actors:
                if node.ref not in seen_here:
                    seen_here.append(node.ref)
                rec = actors[node.ref]
                # attributive state: an ATTR adjective on the referring node
                for rel, child in node.children:
                    if rel == "ATTR" and child.word_class == "adjective":
                        rec.states.append((child.lexeme, idx))
            poss = node.feature("possessor")
            if poss in actors:
                rec = actors[poss]
                if node.lexeme in BODY_PARTS:
                    rec.body_parts.add(node.lexeme)
                else:
                    rec.possessions.add(node.lexeme)
                if poss not in seen_here:
                    seen_here.append(poss)
        # predicative state: affirmative "X be ADJ"
        if tree.word_class == "verb" and tree.lexeme == "be" \
                and tree.feature("polarity", "affirm") == "affirm":
            subj = tree.first("I")
            pred = tree.first("II")
            if subj is not None and pred is not None \
                    and subj.ref in actors and pred.word_class == "adjective":
                actors[subj.ref].states.append((pred.lexeme, idx))
        for cid in seen_here:
            actors[cid].mentions.append(idx)
        mention_order[idx] = seen_here

    return StoryDatabase(actors, chars, antonyms, synonyms, mention_order)


def antonym_of(db: StoryDatabase, adjective: str):
    return db.antonyms.get(adjective)


def synonyms_of(db: StoryDatabase, lexeme: str, policy: str = "any") -> list:
    """Synonym lexemes ordered per policy; empty when the word is unknown.

    any: lexicon order; max-frequency: most frequent first (lowest rank);
    min-length / max-length: by character length.  Sorts are stable, so
    lexicon order breaks ties.
    """
    rows = db.synonyms.get(lexeme, [])
    if policy == "any":
        ordered = list(rows)
    elif policy == "max-frequency":
        ordered = sorted(rows, key=lambda r: r["freq_rank"])
    elif policy == "min-length":
        ordered = sorted(rows, key=lambda r: r["len"])
    elif policy == "max-length":
        ordered = sorted(rows, key=lambda r: -r["len"])
    else:
        raise ValueError(f"unknown synonym policy {policy!r}")
    return [r["word"] for r in ordered]


def salient_referents(db: StoryDatabase, position: int, window: int) -> list:
    """Characters mentioned in the `window` sentences before `position`,
    most recent first; same-sentence ties keep document order."""
    out = []
    for idx in range(position - 1, max(position - 1 - window, -1), -1):
        for cid in db.mention_order.get(idx, []):
            if cid not in out:
                out.append(cid)
    return [(cid, db.characters[cid].gender, db.characters[cid].number) for cid in out]
