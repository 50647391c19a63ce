"""Story documents as dependency trees.

A story is an ordered list of sentence trees plus a character declaration
block.  Each tree node carries a base-form lexeme, a word class, a small
feature map, an optional reference to a declared character, and an ordered
list of (relation, child) edges.  The relation inventory is I (subject),
II (direct object / predicate / complement), III (indirect object), ATTR
(modifier), APPEND (parenthetical, used for pragmatic markers and tags) and
COORD (coordination).

All values here are immutable after construction; rewrites elsewhere build
new trees that share unchanged subtrees.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Iterator, Mapping, Optional

RELATIONS = ("I", "II", "III", "ATTR", "APPEND", "COORD")
WORD_CLASSES = (
    "verb",
    "noun",
    "adjective",
    "adverb",
    "preposition",
    "conjunction",
    "pronoun",
    "numeral",
)
GENDERS = ("masc", "fem", "neut")
NUMBERS = ("sg", "pl")

# Feature keys the schema accepts, with their value domains.  `possessor`
# takes a declared character id and is checked against the story block.
# `slot`/`join` position APPEND-attached material (markers, question tags),
# `wh` flags an interrogative placeholder word, and `possessor_form` selects
# between a genitive noun phrase and a possessive pronoun at realization.
FEATURE_DOMAINS: dict[str, Optional[frozenset]] = {
    "tense": frozenset({"past", "present", "future"}),
    "number": frozenset({"sg", "pl"}),
    "person": frozenset({1, 2, 3}),
    "article": frozenset({"def", "indef", "none"}),
    "polarity": frozenset({"affirm", "neg"}),
    "mood": frozenset({"decl", "quest", "imper"}),
    "punct": frozenset({"period", "question", "exclaim", "dash"}),
    "possessor": None,
    "possessor_form": frozenset({"np", "pronoun"}),
    "wh": frozenset({True}),
    "slot": frozenset({"initial", "pre", "final"}),
    "join": frozenset({"comma", "space", "ellipsis"}),
}

NodePath = tuple  # tuple of child indices from the root


class ParseError(ValueError):
    """Raised for malformed story documents.

    Carries ``line``/``col`` for JSON syntax errors and ``path`` (a dotted
    location such as ``sentences[3].children[0].rel``) for schema errors.
    """

    def __init__(self, message, line=None, col=None, path=None):
        self.line = line
        self.col = col
        self.path = path
        where = ""
        if line is not None:
            where = f" (line {line}, column {col})"
        elif path:
            where = f" (at {path})"
        super().__init__(message + where)


class InvalidPath(ValueError):
    """A NodePath does not address a prunable node in the given tree."""


class StoryWarning(UserWarning):
    """Non-fatal document issues reported in lax parsing mode."""


@dataclass(frozen=True)
class DsyntNode:
    """One lexical node of a sentence tree."""

    lexeme: str
    word_class: str
    features: Mapping = field(default_factory=dict)
    ref: Optional[str] = None
    children: tuple = ()  # tuple of (relation, DsyntNode)

    def feature(self, key, default=None):
        return self.features.get(key, default)

    def first(self, relation):
        """First child attached by `relation`, or None."""
        for rel, child in self.children:
            if rel == relation:
                return child
        return None

    def by_relation(self, relation):
        return [child for rel, child in self.children if rel == relation]


@dataclass(frozen=True)
class CharacterDecl:
    id: str
    lexeme: str
    gender: str
    number: str = "sg"
    proper: bool = False


@dataclass(frozen=True)
class Story:
    title: str
    characters: tuple = ()
    sentences: tuple = ()


@dataclass(frozen=True)
class Diagnostic:
    rule: str
    path: NodePath
    message: str


def char_map(story: Story) -> dict:
    return {c.id: c for c in story.characters}


# ---------------------------------------------------------------------------
# traversal and editing


def walk(tree: DsyntNode) -> Iterator[tuple]:
    """Yield (path, node) pairs in depth-first pre-order."""
    stack = [((), tree)]
    while stack:
        path, node = stack.pop()
        yield path, node
        for i in range(len(node.children) - 1, -1, -1):
            stack.append((path + (i,), node.children[i][1]))


def node_at(tree: DsyntNode, path: NodePath) -> DsyntNode:
    node = tree
    for i in path:
        try:
            node = node.children[i][1]
        except (IndexError, TypeError):
            raise InvalidPath(f"no node at path {path!r}")
    return node


def node_count(tree: DsyntNode) -> int:
    return sum(1 for _ in walk(tree))


def find_nodes(tree: DsyntNode, predicate: Callable[[DsyntNode], bool]) -> list:
    """Paths of all nodes satisfying `predicate`, in pre-order."""
    return [path for path, node in walk(tree) if predicate(node)]


def replace_node(tree: DsyntNode, path: NodePath, new: DsyntNode) -> DsyntNode:
    """New tree with the node at `path` swapped for `new`."""
    if not path:
        return new
    head, rest = path[0], path[1:]
    if head >= len(tree.children):
        raise InvalidPath(f"no node at path {path!r}")
    kids = list(tree.children)
    rel, child = kids[head]
    kids[head] = (rel, replace_node(child, rest, new))
    return replace(tree, children=tuple(kids))


def add_child(tree: DsyntNode, path: NodePath, relation: str, child: DsyntNode) -> DsyntNode:
    target = node_at(tree, path)
    grown = replace(target, children=target.children + ((relation, child),))
    return replace_node(tree, path, grown)


def prune(tree: DsyntNode, paths) -> DsyntNode:
    """New tree with the addressed subtrees removed.

    The root cannot be pruned and no path may be an ancestor of another.
    """
    pset = {tuple(p) for p in paths}
    if () in pset:
        raise InvalidPath("cannot prune the root")
    for p in pset:
        node_at(tree, p)
    for a in pset:
        for b in pset:
            if a != b and b[: len(a)] == a:
                raise InvalidPath(f"path {a!r} is an ancestor of {b!r}")

    def rebuild(node, prefix):
        kids = []
        for i, (rel, child) in enumerate(node.children):
            p = prefix + (i,)
            if p in pset:
                continue
            kids.append((rel, rebuild(child, p)))
        return replace(node, children=tuple(kids))

    return rebuild(tree, ())


# ---------------------------------------------------------------------------
# validation


def _check_feature(key, value):
    """None when legal, else an error string."""
    if key not in FEATURE_DOMAINS:
        return f"unknown feature key {key!r}"
    domain = FEATURE_DOMAINS[key]
    if domain is not None and value not in domain:
        return f"illegal value {value!r} for feature {key!r}"
    return None


def validate_tree(tree: DsyntNode, characters=None) -> list:
    """Diagnostics for every invariant violation; empty when clean.

    `characters` is an optional id -> CharacterDecl mapping; when given,
    ref and possessor values are checked against it.
    """
    out = []
    seen_ids = set()
    for path, node in walk(tree):
        if id(node) in seen_ids:
            out.append(Diagnostic("shared-node", path, "node object appears twice in the tree"))
        seen_ids.add(id(node))
        if node.word_class not in WORD_CLASSES:
            out.append(Diagnostic("unknown-class", path, f"unknown word class {node.word_class!r}"))
        subjects = sum(1 for rel, _ in node.children if rel == "I")
        if subjects > 1:
            out.append(Diagnostic("duplicate-subject", path, "more than one I child"))
        for rel, _ in node.children:
            if rel not in RELATIONS:
                out.append(Diagnostic("unknown-relation", path, f"unknown relation {rel!r}"))
        for key, value in node.features.items():
            err = _check_feature(key, value)
            if err:
                out.append(Diagnostic("unknown-feature", path, err))
                continue
            if key == "tense" and node.word_class != "verb":
                out.append(Diagnostic(
                    "feature-class-mismatch", path,
                    f"tense on {node.word_class} node {node.lexeme!r}"))
            if key in ("article", "number") and node.word_class not in ("noun", "pronoun"):
                out.append(Diagnostic(
                    "feature-class-mismatch", path,
                    f"{key} on {node.word_class} node {node.lexeme!r}"))
        if characters is not None:
            if node.ref is not None and node.ref not in characters:
                out.append(Diagnostic("undeclared-ref", path, f"undeclared character {node.ref!r}"))
            poss = node.feature("possessor")
            if poss is not None and poss not in characters:
                out.append(Diagnostic("undeclared-ref", path, f"undeclared possessor {poss!r}"))
    return out


# ---------------------------------------------------------------------------
# parsing


_NODE_KEYS = {"lexeme", "class", "features", "ref", "children"}
_EDGE_KEYS = {"rel", "node"}
_STORY_KEYS = {"title", "characters", "sentences"}
_CHAR_KEYS = {"id", "lexeme", "gender", "number", "proper"}


def _unknown_keys(obj, allowed, path, strict):
    extra = sorted(set(obj) - allowed)
    if not extra:
        return
    msg = f"unknown keys {extra}"
    if strict:
        raise ParseError(msg, path=path)
    warnings.warn(f"{msg} at {path}", StoryWarning, stacklevel=3)


def _parse_node(obj, path, strict) -> DsyntNode:
    if not isinstance(obj, dict):
        raise ParseError("node must be an object", path=path)
    _unknown_keys(obj, _NODE_KEYS, path, strict)
    try:
        lexeme = obj["lexeme"]
        word_class = obj["class"]
    except KeyError as exc:
        raise ParseError(f"node missing required key {exc.args[0]!r}", path=path)
    if word_class not in WORD_CLASSES:
        raise ParseError(f"unknown word class {word_class!r}", path=path)
    features = dict(obj.get("features") or {})
    for key, value in features.items():
        err = _check_feature(key, value)
        if err:
            raise ParseError(err, path=f"{path}.features")
    children = []
    for i, edge in enumerate(obj.get("children") or []):
        epath = f"{path}.children[{i}]"
        if not isinstance(edge, dict):
            raise ParseError("child edge must be an object", path=epath)
        _unknown_keys(edge, _EDGE_KEYS, epath, strict)
        rel = edge.get("rel")
        if rel not in RELATIONS:
            raise ParseError(f"unknown relation {rel!r}", path=epath)
        children.append((rel, _parse_node(edge.get("node"), f"{epath}.node", strict)))
    return DsyntNode(lexeme, word_class, features, obj.get("ref"), tuple(children))


def parse_story(data, strict=True, validate=True) -> Story:
    """Parse a UTF-8 story document (bytes or str) into a Story.

    Every sentence tree is validated; any invariant violation is a
    ParseError.  Unknown keys are an error in strict mode and a
    StoryWarning otherwise.  validate=False skips the tree-invariant gate
    (schema errors still raise); the validate command uses this to report
    diagnostics instead of dying on the first one.
    """
    if isinstance(data, bytes):
        try:
            data = data.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, line=exc.lineno, col=exc.colno)
    if not isinstance(doc, dict):
        raise ParseError("top level must be an object")
    _unknown_keys(doc, _STORY_KEYS, "$", strict)

    characters = []
    seen = set()
    for i, obj in enumerate(doc.get("characters") or []):
        cpath = f"characters[{i}]"
        _unknown_keys(obj, _CHAR_KEYS, cpath, strict)
        try:
            cid = obj["id"]
            lexeme = obj["lexeme"]
            gender = obj["gender"]
        except KeyError as exc:
            raise ParseError(f"character missing key {exc.args[0]!r}", path=cpath)
        if gender not in GENDERS:
            raise ParseError(f"unknown gender {gender!r}", path=cpath)
        number = obj.get("number", "sg")
        if number not in NUMBERS:
            raise ParseError(f"unknown number {number!r}", path=cpath)
        if cid in seen:
            raise ParseError(f"duplicate character id {cid!r}", path=cpath)
        seen.add(cid)
        characters.append(CharacterDecl(cid, lexeme, gender, number, bool(obj.get("proper", False))))

    raw_sentences = doc.get("sentences")
    if not raw_sentences:
        raise ParseError("story has no sentences", path="sentences")
    chars = {c.id: c for c in characters}
    sentences = []
    for i, obj in enumerate(raw_sentences):
        spath = f"sentences[{i}]"
        tree = _parse_node(obj, spath, strict)
        if validate:
            diags = validate_tree(tree, chars)
            if diags:
                d = diags[0]
                raise ParseError(f"{d.rule}: {d.message}", path=f"{spath} node path {list(d.path)}")
        sentences.append(tree)

    return Story(doc.get("title", ""), tuple(characters), tuple(sentences))


# ---------------------------------------------------------------------------
# serialization


def _node_obj(node: DsyntNode) -> dict:
    out = {"lexeme": node.lexeme, "class": node.word_class}
    if node.features:
        out["features"] = dict(node.features)
    if node.ref is not None:
        out["ref"] = node.ref
    if node.children:
        out["children"] = [{"rel": rel, "node": _node_obj(child)} for rel, child in node.children]
    return out


def serialize_story(story: Story) -> bytes:
    """Canonical UTF-8 document: sorted keys, two-space indent, final newline.

    parse_story inverts this for every valid story, and structurally equal
    stories serialize byte-identically.
    """
    doc = {
        "title": story.title,
        "characters": [
            {"id": c.id, "lexeme": c.lexeme, "gender": c.gender, "number": c.number, "proper": c.proper}
            for c in story.characters
        ],
        "sentences": [_node_obj(t) for t in story.sentences],
    }
    return (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode("utf-8")
