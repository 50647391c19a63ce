"""English surface realization for sentence trees.

Turns a validated tree into one sentence string: linear order, morphology,
articles and other function words, and terminal punctuation.  Coverage
targets the tree patterns this pipeline produces, not open English.

Linearization, clause level:

    [initial APPENDs] subject [pre APPENDs] [ATTR adverbs] verb-complex
    [III] [II] [other ATTRs in document order] [COORD clauses] [final APPENDs]

The verb complex handles do-support for negation ("did not expect"),
`will` futures, copular agreement, and tenseless complements as
infinitives ("to grow", "for the birds to wait").  Copular questions with
a wh predicate front the wh word ("How was the garden?"); everything else
stays in situ ("The man ran where?").

Noun phrases: article (or genitive possessor), ATTR adjectives in document
order, inflected head, then prepositional ATTRs and coordination.  NP
coordination is comma-free by default ("the chards the lettuces and the
spinach"); predicate coordination takes a comma before "and" by default
("swampy, and not productive").  Both are flags because source material is
inconsistent about them.

APPEND children carry `slot` (initial / pre / final) and `join` (comma /
space / ellipsis) features describing how markers and question tags attach.
"""

from __future__ import annotations

import json
import os
import re
from dataclasses import dataclass
from importlib import resources
from typing import Optional

from .trees import DsyntNode, walk

LEXICON_DIR_ENV = "M2D_LEXICON_DIR"
VOWELS = "aeiou"

# Pronoun lexemes whose agreement is fixed regardless of features.
_PRONOUN_AGREEMENT = {
    "I": (1, "sg"), "we": (1, "pl"), "you": (2, "sg"),
    "he": (3, "sg"), "she": (3, "sg"), "it": (3, "sg"), "they": (3, "pl"),
}


class RealizationError(ValueError):
    """The tree cannot be realized; names the offending node."""

    def __init__(self, message, node: Optional[DsyntNode] = None):
        self.node = node
        if node is not None:
            message = f"{message} (node {node.lexeme!r})"
        super().__init__(message)


@dataclass(frozen=True)
class RealizedSentence:
    """A finished sentence plus a provenance token set by the caller.

    text starts with a capital letter and ends with one terminator:
    '.', '?', '!' or the truncation dash '---' used by interrupted turns.
    """

    text: str
    source: str = ""


@dataclass(frozen=True)
class MorphLexicon:
    """Irregular morphology tables and the pronoun paradigm."""

    irregular_verbs: dict
    irregular_plurals: dict
    pronouns: dict

    def pronoun(self, gender: str, number: str, case: str, person: int = 3) -> str:
        if person == 1:
            key = "p1_sg" if number == "sg" else "p1_pl"
        elif person == 2:
            key = "p2"
        elif number == "pl":
            key = "pl"
        else:
            key = {"masc": "masc_sg", "fem": "fem_sg"}.get(gender, "neut_sg")
        return self.pronouns[key][case]


def load_morphology(path=None) -> MorphLexicon:
    """Load the morphology tables; env M2D_LEXICON_DIR can override the dir."""
    data = _load_data_file("morphology.json", path)
    tables = data.get("irregular_verbs", {})
    if len(tables) != len(set(tables)):
        raise ValueError("duplicate irregular verb base form")
    pronouns = data.get("pronouns", {})
    for key in ("p1_sg", "p1_pl", "p2", "masc_sg", "fem_sg", "neut_sg", "pl"):
        row = pronouns.get(key)
        if not row or any(c not in row for c in ("nom", "acc", "poss")):
            raise ValueError(f"pronoun paradigm incomplete for {key!r}")
    return MorphLexicon(tables, data.get("irregular_plurals", {}), pronouns)


def _load_data_file(name, explicit_path=None):
    if explicit_path is not None:
        with open(explicit_path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    override_dir = os.environ.get(LEXICON_DIR_ENV)
    if override_dir:
        candidate = os.path.join(override_dir, name)
        if os.path.exists(candidate):
            with open(candidate, "r", encoding="utf-8") as fh:
                return json.load(fh)
    ref = resources.files(__package__) / "data" / name
    return json.loads(ref.read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# inflection


def _regular_past(word: str) -> str:
    if word.endswith("e"):
        return word + "d"
    if len(word) > 1 and word.endswith("y") and word[-2] not in VOWELS:
        return word[:-1] + "ied"
    if _doubles_final(word):
        return word + word[-1] + "ed"
    return word + "ed"


def _doubles_final(word: str) -> bool:
    # consonant-vowel-consonant ending, final letter not w/x/y; only
    # monosyllables double (gather -> gathered, but plan -> planned)
    if len(word) < 3:
        return False
    a, b, c = word[-3], word[-2], word[-1]
    if not ((a not in VOWELS) and (b in VOWELS) and (c not in VOWELS) and c not in "wxy"):
        return False
    groups = len(re.findall(r"[aeiouy]+", word))
    return groups == 1


def _s_form(word: str) -> str:
    if len(word) > 1 and word.endswith("y") and word[-2] not in VOWELS:
        return word[:-1] + "ies"
    if word.endswith(("s", "x", "z", "ch", "sh", "o")):
        return word + "es"
    return word + "s"


def inflect(lexeme: str, word_class: str, features, lexicon: MorphLexicon) -> str:
    """Surface form for one word; irregular table first, regular rules after."""
    feats = features or {}
    if word_class == "verb":
        tense = feats.get("tense")
        entry = lexicon.irregular_verbs.get(lexeme, {})
        if tense == "past":
            return entry.get("past") or _regular_past(lexeme)
        if tense == "present":
            if feats.get("person", 3) == 3 and feats.get("number", "sg") == "sg":
                return entry.get("pres3") or _s_form(lexeme)
            return lexeme
        return lexeme
    if word_class == "noun":
        if feats.get("number") == "pl":
            return lexicon.irregular_plurals.get(lexeme) or _s_form(lexeme)
        return lexeme
    return lexeme


def _be_form(tense, person, number):
    if tense == "past":
        return "were" if (number == "pl" or person == 2) else "was"
    if number == "pl" or person == 2:
        return "are"
    return "am" if person == 1 else "is"


def _do_form(tense, person, number):
    if tense == "past":
        return "did"
    return "does" if (person == 3 and number == "sg") else "do"


# ---------------------------------------------------------------------------
# realization


def realize(tree: DsyntNode, lexicon: MorphLexicon, characters=None, *,
            np_commas=False, predicate_commas=True, source="") -> RealizedSentence:
    """Render one tree to a sentence.  Pure function of its arguments.

    `characters` (id -> CharacterDecl) is needed when possessor features or
    character-bearing pronouns must be realized; None is fine otherwise.
    """
    opts = {
        "lexicon": lexicon,
        "chars": characters or {},
        "np_commas": np_commas,
        "predicate_commas": predicate_commas,
    }
    if tree.word_class == "verb":
        tokens = _clause_tokens(tree, opts, allow_bare=False)
    elif tree.word_class == "adjective":
        tokens = _fragment_tokens(tree, opts)
    else:
        tokens = _np_tokens(tree, opts)
    body = _join(tokens)
    if not body:
        raise RealizationError("tree realized to nothing", tree)
    punct = tree.feature("punct")
    if punct is None:
        punct = "question" if tree.feature("mood") == "quest" else "period"
    if punct == "dash":
        text = body + " ---"
    else:
        mark = {"period": ".", "question": "?", "exclaim": "!"}[punct]
        text = body + mark
    text = text[0].upper() + text[1:]
    return RealizedSentence(text, source)


def _split_appends(node):
    initial, pre, final = [], [], []
    for rel, child in node.children:
        if rel != "APPEND":
            continue
        slot = child.feature("slot", "final")
        (initial if slot == "initial" else pre if slot == "pre" else final).append(child)
    return initial, pre, final


def _marker_tokens(node, position, opts):
    words = list(node.lexeme.split())
    join = node.feature("join", "comma")
    if position == "leading":
        if join == "comma":
            return words + [","]
        if join == "ellipsis":
            return words + ["..."]
        return words
    # trailing
    if join == "comma":
        return [","] + words
    return words


def _agreement(subject):
    """(person, number) for verb agreement; defaults to 3sg."""
    if subject is None:
        return 3, "sg"
    if subject.word_class == "pronoun":
        fixed = _PRONOUN_AGREEMENT.get(subject.lexeme)
        if fixed:
            return fixed
    person = subject.feature("person", 3)
    number = subject.feature("number", "sg")
    if any(rel == "COORD" for rel, _ in subject.children):
        number = "pl"
    return person, number


def _clause_tokens(v, opts, *, allow_bare, inherited_agr=None):
    """Tokens for a verb-rooted clause.

    allow_bare permits a missing subject (VP conjuncts, imperatives);
    inherited_agr carries the main clause agreement into such conjuncts.
    """
    initial, pre, final = _split_appends(v)
    subject = v.first("I")
    obj2 = v.first("II")
    obj3 = v.first("III")
    attr_advs = [c for rel, c in v.children if rel == "ATTR" and c.word_class == "adverb"]
    attr_rest = [c for rel, c in v.children
                 if rel == "ATTR" and c.word_class in ("preposition", "conjunction")]
    coords = v.by_relation("COORD")
    feats = v.features
    finite = "tense" in feats
    negative = feats.get("polarity") == "neg"
    mood = feats.get("mood", "decl")

    tokens = []
    for m in initial:
        tokens += _marker_tokens(m, "leading", opts)

    # fronted copular wh question: "How was the garden?"
    if (finite and v.lexeme == "be" and mood == "quest"
            and obj2 is not None and obj2.feature("wh")):
        person, number = _agreement(subject)
        tokens.append(obj2.lexeme)
        tokens.append(_be_form(feats["tense"], person, number))
        if subject is not None:
            tokens += _np_tokens(subject, opts)
        for m in final:
            tokens += _marker_tokens(m, "trailing", opts)
        return tokens

    if not finite and mood != "imper":
        # infinitive clause: "to grow" / "for the birds to wait"
        if subject is not None:
            tokens += ["for"] + _np_tokens(subject, opts)
        for m in pre:
            tokens += _marker_tokens(m, "leading", opts)
        if negative:
            tokens.append("not")
        tokens += ["to", v.lexeme]
    else:
        if subject is None and mood == "decl" and not allow_bare:
            raise RealizationError("declarative clause has no subject", v)
        if subject is not None:
            tokens += _np_tokens(subject, opts)
        for m in pre:
            tokens += _marker_tokens(m, "leading", opts)
        for adv in attr_advs:
            tokens.append(adv.lexeme)
        attr_advs = []
        person, number = inherited_agr or _agreement(subject)
        lexicon = opts["lexicon"]
        if mood == "imper":
            tokens += (["do", "not"] if negative else []) + [v.lexeme]
        elif v.lexeme == "be":
            if feats["tense"] == "future":
                tokens += ["will"] + (["not"] if negative else []) + ["be"]
            else:
                tokens.append(_be_form(feats["tense"], person, number))
                if negative:
                    tokens.append("not")
        elif feats["tense"] == "future":
            tokens += ["will"] + (["not"] if negative else []) + [v.lexeme]
        elif negative:
            tokens += [_do_form(feats["tense"], person, number), "not", v.lexeme]
        else:
            tokens.append(inflect(v.lexeme, "verb",
                                  {"tense": feats["tense"], "person": person, "number": number},
                                  lexicon))

    for adv in attr_advs:  # adverbs trailing an infinitive core
        tokens.append(adv.lexeme)
    if obj3 is not None:
        tokens += _np_tokens(obj3, opts)
    if obj2 is not None:
        tokens += _complement_tokens(obj2, opts)
    for child in attr_rest:
        tokens += _adjunct_tokens(child, opts)
    for i, conj in enumerate(coords):
        sub_agr = None if conj.first("I") is not None else _agreement(subject)
        tokens.append("and")
        tokens += _clause_tokens(conj, opts, allow_bare=True, inherited_agr=sub_agr)
    for m in final:
        tokens += _marker_tokens(m, "trailing", opts)
    return tokens


def _complement_tokens(node, opts):
    if node.word_class == "adjective":
        return _adjective_tokens(node, opts, negated=False)
    if node.word_class == "verb":
        return _clause_tokens(node, opts, allow_bare=True)
    if node.word_class == "adverb":
        return [node.lexeme]
    return _np_tokens(node, opts)


def _adjunct_tokens(node, opts):
    comp = node.first("II")
    if node.word_class == "preposition":
        if comp is not None and comp.feature("wh") and comp.lexeme == "where":
            return ["where"]  # locative preposition is absorbed by the wh word
        words = node.lexeme.split()
        if comp is None:
            return words
        if comp.word_class == "verb":
            return words + _clause_tokens(comp, opts, allow_bare=True)
        return words + _np_tokens(comp, opts)
    # conjunction: "because <clause>", "in order for X to Y"
    words = node.lexeme.split()
    if comp is not None:
        words = words + _clause_tokens(comp, opts, allow_bare=True)
    return words


def _adjective_tokens(adj, opts, *, negated):
    initial, pre, final = _split_appends(adj)
    tokens = []
    if negated:
        tokens.append("not")
    for m in initial + pre:
        tokens += _marker_tokens(m, "leading", opts)
    for rel, child in adj.children:
        if rel == "ATTR" and child.word_class == "adverb":
            tokens.append(child.lexeme)
    tokens.append(adj.lexeme)
    coords = adj.by_relation("COORD")
    for i, conj in enumerate(coords):
        if opts["predicate_commas"]:
            tokens.append(",")
        tokens.append("and")
        tokens += _adjective_tokens(conj, opts, negated=conj.feature("polarity") == "neg")
    for m in final:
        tokens += _marker_tokens(m, "trailing", opts)
    return tokens


def _fragment_tokens(adj, opts):
    # adjective-rooted fragment such as an affirmation interjection
    return _adjective_tokens(adj, opts, negated=adj.feature("polarity") == "neg")


def _genitive(char, lexicon):
    base = inflect(char.lexeme, "noun", {"number": char.number}, lexicon)
    return base + ("'" if base.endswith("s") else "'s")


def _np_tokens(n, opts):
    lexicon = opts["lexicon"]
    chars = opts["chars"]
    if n.word_class == "pronoun" or n.feature("wh"):
        toks = [n.lexeme]
        for rel, child in n.children:
            if rel == "ATTR" and child.word_class == "preposition":
                toks += _adjunct_tokens(child, opts)
        return toks
    if n.word_class in ("adjective", "adverb"):
        return _adjective_tokens(n, opts, negated=n.feature("polarity") == "neg")

    tokens = []
    poss = n.feature("possessor")
    head = inflect(n.lexeme, "noun", n.features, lexicon)

    adj_tokens = []
    prep_tokens = []
    for rel, child in n.children:
        if rel == "ATTR" and child.word_class in ("adjective", "numeral"):
            adj_tokens += _adjective_tokens(child, opts, negated=False)
        elif rel == "ATTR" and child.word_class == "preposition":
            prep_tokens += _adjunct_tokens(child, opts)

    if poss is not None:
        char = chars.get(poss)
        if char is None:
            raise RealizationError(f"possessor {poss!r} not declared", n)
        if n.feature("possessor_form") == "pronoun":
            tokens.append(lexicon.pronoun(char.gender, char.number, "poss"))
        else:
            if not char.proper:
                tokens.append("the")
            tokens.append(_genitive(char, lexicon))
        tokens += adj_tokens + [head]
    else:
        article = n.feature("article")
        rest = adj_tokens + [head]
        if article == "def":
            tokens.append("the")
        elif article == "indef":
            tokens.append("an" if rest[0][0].lower() in VOWELS else "a")
        tokens += rest

    tokens += prep_tokens

    coords = n.by_relation("COORD")
    if coords:
        for conj in coords[:-1]:
            if opts["np_commas"]:
                tokens.append(",")
            tokens += _np_tokens(conj, opts)
        if opts["np_commas"]:
            tokens.append(",")
        tokens.append("and")
        tokens += _np_tokens(coords[-1], opts)
    return tokens


def _join(tokens):
    text = " ".join(t for t in tokens if t)
    text = re.sub(r" +,", ",", text)
    text = re.sub(r" +", " ", text).strip()
    return text


# ---------------------------------------------------------------------------
# postprocessing

# Ordered contraction table.  Applied anywhere in the sentence; tag
# questions rely on "did not they" -> "didn't they".
CONTRACTIONS = [
    ("will not", "won't"),
    ("can not", "can't"),
    ("do not", "don't"),
    ("does not", "doesn't"),
    ("did not", "didn't"),
    ("is not", "isn't"),
    ("are not", "aren't"),
    ("was not", "wasn't"),
    ("were not", "weren't"),
    ("has not", "hasn't"),
    ("have not", "haven't"),
    ("had not", "hadn't"),
    ("it is", "it's"),
    ("that is", "that's"),
    ("I am", "I'm"),
]

_POSSESSIVE_RE = re.compile(r"\bthe (\w+) of the (\w+)\b")


def _contract_one(text, src, dst):
    pattern = re.compile(r"\b" + re.escape(src) + r"\b", flags=re.IGNORECASE if src[0] != "I" else 0)

    def fix(match):
        found = match.group(0)
        if found[0].isupper():
            return dst[0].upper() + dst[1:]
        return dst

    return pattern.sub(fix, text)


def postprocess(text: str) -> str:
    """Contractions, possessive rewriting, whitespace and casing repair.

    Idempotent: postprocess(postprocess(s)) == postprocess(s).
    """
    out = re.sub(r"[ \t]+", " ", text).strip()
    prev = None
    while prev != out:
        prev = out
        out = _POSSESSIVE_RE.sub(lambda m: f"the {m.group(2)}'s {m.group(1)}", out)
    for src, dst in CONTRACTIONS:
        out = _contract_one(out, src, dst)
    out = re.sub(r" +([,;])", r"\1", out)
    out = re.sub(r" +([.?!])$", r"\1", out)
    if out and out[0].islower():
        out = out[0].upper() + out[1:]
    return out
