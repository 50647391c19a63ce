"""Sentence-level rewrites: splitting, merging, pronouns, synonyms, markers.

All operations leave their inputs untouched and return new trees; anything
random takes an explicit seeded source.  Pragmatic markers become APPEND
nodes rather than string pastes so realization and postprocessing still
see them.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .realizer import _load_data_file
from .storydb import StoryDatabase, synonyms_of
from .trees import DsyntNode, node_count, replace_node, validate_tree, walk

MARKER_SLOTS = ("sentence-initial", "pre-adjective", "pre-verb", "sentence-final")
SUBSTITUTABLE_CLASSES = ("noun", "verb", "adjective", "adverb")


class ConstraintViolation(ValueError):
    """A marker's syntactic constraint failed; carries the predicate id."""

    def __init__(self, predicate: str, marker: str = ""):
        self.predicate = predicate
        self.marker = marker
        super().__init__(f"constraint {predicate!r} not satisfied"
                         + (f" for marker {marker!r}" if marker else ""))


@dataclass(frozen=True)
class MarkerSpec:
    """One pragmatic marker: surface text, insertion slot, attachment
    punctuation, syntactic constraint, and frequency group."""

    id: str
    surface: str
    slot: str
    join: str
    constraint: str
    group: str


@dataclass
class SalienceContext:
    """Referents available for pronominalization at the current sentence.

    recent: (id, gender, number) triples, most recent first, built from
    dialog order.  pronominalized: referents already turned into pronouns
    in the current turn; they stay eligible even after the recency window
    slides past them.
    """

    recent: list = field(default_factory=list)
    pronominalized: set = field(default_factory=set)
    characters: dict = field(default_factory=dict)
    morphology: object = None


# ---------------------------------------------------------------------------
# constraints


def _is_declarative(tree: DsyntNode) -> bool:
    return (tree.feature("mood", "decl") == "decl"
            and tree.feature("punct", "period") in ("period", "exclaim"))


def _has_adjective(tree: DsyntNode) -> bool:
    return any(n.word_class == "adjective" for _, n in walk(tree))


CONSTRAINTS = {
    "none": lambda tree: True,
    "requires-declarative": _is_declarative,
    "requires-adjective": _has_adjective,
}


def check_constraint(tree: DsyntNode, spec: MarkerSpec) -> bool:
    return CONSTRAINTS[spec.constraint](tree)


def load_markers(path=None) -> dict:
    """Marker inventory keyed by id; slot/constraint consistency is
    enforced here (a pre-adjective slot implies requires-adjective)."""
    data = _load_data_file("markers.json", path)
    out = {}
    for row in data:
        spec = MarkerSpec(row["id"], row["surface"], row["slot"], row["join"],
                          row["constraint"], row["group"])
        if spec.slot not in MARKER_SLOTS:
            raise ValueError(f"marker {spec.id!r}: unknown slot {spec.slot!r}")
        if spec.join not in ("comma", "space", "ellipsis"):
            raise ValueError(f"marker {spec.id!r}: unknown join {spec.join!r}")
        if spec.constraint not in CONSTRAINTS:
            raise ValueError(f"marker {spec.id!r}: unknown constraint {spec.constraint!r}")
        if spec.slot == "pre-adjective" and spec.constraint != "requires-adjective":
            raise ValueError(f"marker {spec.id!r}: pre-adjective slot needs requires-adjective")
        if spec.id in out:
            raise ValueError(f"duplicate marker id {spec.id!r}")
        out[spec.id] = spec
    return out


def marker_node(spec: MarkerSpec) -> DsyntNode:
    slot = {"sentence-initial": "initial", "sentence-final": "final"}.get(spec.slot, "pre")
    return DsyntNode(spec.surface, "adverb", {"slot": slot, "join": spec.join})


def _attach_append(tree, path, node):
    target = node_lookup(tree, path)
    grown = replace(target, children=target.children + (("APPEND", node),))
    return replace_node(tree, path, grown)


def node_lookup(tree, path):
    node = tree
    for i in path:
        node = node.children[i][1]
    return node


def _predicate_adjective_path(tree):
    for i, (rel, child) in enumerate(tree.children):
        if rel == "II" and child.word_class == "adjective":
            return (i,)
    return None


def insert_marker(tree: DsyntNode, spec: MarkerSpec) -> DsyntNode:
    """Attach the marker at its slot; raises ConstraintViolation when the
    marker's predicate fails on this tree."""
    if not check_constraint(tree, spec):
        raise ConstraintViolation(spec.constraint, spec.id)
    node = marker_node(spec)
    if spec.slot in ("sentence-initial", "sentence-final", "pre-verb"):
        return _attach_append(tree, (), node)
    # pre-adjective: prefer the predicate adjective, else first adjective
    target = _predicate_adjective_path(tree)
    if target is None:
        for path, n in walk(tree):
            if n.word_class == "adjective":
                target = path
                break
    return _attach_append(tree, target, node)


# ---------------------------------------------------------------------------
# splitting and merging


def _subordinate_indices(tree):
    """Indices of detachable children at the root: "because"-class finite
    subordinate clauses and COORD verb clauses."""
    out = []
    for i, (rel, child) in enumerate(tree.children):
        if rel == "ATTR" and child.word_class == "conjunction" and child.lexeme == "because":
            comp = child.first("II")
            if comp is not None and comp.word_class == "verb" and "tense" in comp.features:
                out.append((i, "because"))
        elif rel == "COORD" and child.word_class == "verb" and "tense" in child.features:
            out.append((i, "coord"))
    return out


def _as_sentence(clause, subject=None):
    feats = dict(clause.features)
    feats.pop("mood", None)
    feats["punct"] = "period"
    clause = replace(clause, features=feats)
    if clause.first("I") is None and subject is not None:
        clause = replace(clause, children=(("I", subject),) + clause.children)
    return clause


def split_long(tree: DsyntNode, max_nodes: int) -> list:
    """Deaggregate a long sentence into standalone clauses.

    Under the threshold the tree passes through unchanged.  Over it, every
    detachable subordinate is recursively pulled out; subjects are copied
    into subjectless conjuncts.  Surface order is preserved and each output
    is re-validated (a failed rewrite falls back to the input).
    """
    if node_count(tree) <= max_nodes:
        return [tree]

    pieces = []

    def extract(clause):
        targets = _subordinate_indices(clause)
        if not targets:
            pieces.append(clause)
            return
        drop = {i for i, _ in targets}
        kids = [(rel, c) for j, (rel, c) in enumerate(clause.children) if j not in drop]
        core = replace(clause, children=tuple(kids))
        pieces.append(core)
        subject = core.first("I")
        for i, kind in targets:
            child = clause.children[i][1]
            inner = child.first("II") if kind == "because" else child
            extract(_as_sentence(inner, subject if kind == "coord" else None))

    extract(tree)
    if len(pieces) == 1:
        return [tree]
    if any(validate_tree(p) for p in pieces):
        return [tree]
    return pieces


def merge_pair(a: DsyntNode, b: DsyntNode):
    """Aggregate two same-subject declaratives, or None when blocked.

    Copular predicates coordinate ("X was P, and Q", each conjunct keeping
    its own polarity); otherwise the second clause coordinates as a verb
    phrase with its subject dropped.
    """
    for t in (a, b):
        if t.word_class != "verb" or "tense" not in t.features:
            return None
        if t.feature("mood", "decl") != "decl" or t.feature("punct", "period") == "question":
            return None
    sa, sb = a.first("I"), b.first("I")
    if sa is None or sb is None:
        return None
    if sa.lexeme != sb.lexeme or sa.ref != sb.ref:
        return None

    pa, pb = a.first("II"), b.first("II")
    if (a.lexeme == "be" and b.lexeme == "be"
            and pa is not None and pa.word_class == "adjective"
            and pb is not None and pb.word_class == "adjective"):
        conjunct = replace(pb, features={**pb.features, "polarity": b.feature("polarity", "affirm")})
        new_pred = replace(pa, children=pa.children + (("COORD", conjunct),))
        kids = tuple((rel, new_pred if rel == "II" and c is pa else c) for rel, c in a.children)
        return replace(a, children=kids)

    vp_children = tuple((rel, c) for rel, c in b.children if rel != "I")
    vp = replace(b, children=vp_children, features={k: v for k, v in b.features.items() if k != "punct"})
    return replace(a, children=a.children + (("COORD", vp),))


# ---------------------------------------------------------------------------
# pronominalization


def _mention_case(tree, path):
    """Grammatical case of a referring node, from its attachment."""
    if not path:
        return None
    parent = node_lookup(tree, path[:-1])
    rel = parent.children[path[-1]][0]
    if rel == "I":
        if parent.word_class == "verb" and "tense" not in parent.features:
            return "acc"  # for-to clause subject: "for them to grow"
        return "nom"
    if rel in ("II", "III"):
        return "acc"
    if rel == "COORD":
        return _mention_case(tree, path[:-1])
    return None


def pronominalize(tree: DsyntNode, ctx: SalienceContext) -> DsyntNode:
    """Replace non-first mentions with pronouns when unambiguous.

    A mention is replaced only when exactly one salient referent matches
    its gender and number; mentions earlier in the same sentence extend the
    salience list, so "the gardener ... the gardener's orchard" can yield
    "his" within one sentence.  Referents absent from the context (first
    mentions) are never replaced.
    """
    recent = list(ctx.recent)
    morph = ctx.morphology
    out = tree
    replaced = []

    def sig(cid):
        c = ctx.characters[cid]
        return c.gender, c.number

    def eligible(cid):
        if cid not in ctx.characters or not any(r[0] == cid for r in recent):
            return False
        if cid in ctx.pronominalized:
            return True
        matches = [r for r in recent if (r[1], r[2]) == sig(cid)]
        return len(matches) == 1 and matches[0][0] == cid

    def note_mention(cid):
        if cid in ctx.characters:
            entry = (cid,) + sig(cid)
            if entry in recent:
                recent.remove(entry)
            recent.insert(0, entry)

    for path, node in walk(tree):
        if any(path[: len(r)] == r for r in replaced):
            continue  # inside a subtree that became a pronoun
        if node.ref is not None and node.word_class == "noun":
            case = _mention_case(tree, path)
            if case is not None and eligible(node.ref):
                gender, number = sig(node.ref)
                char = ctx.characters[node.ref]
                pron = DsyntNode(morph.pronoun(gender, number, case), "pronoun",
                                 {"number": char.number, "person": 3}, ref=node.ref)
                out = replace_node(out, path, pron)
                ctx.pronominalized.add(node.ref)
                replaced.append(path)
                note_mention(node.ref)
                continue
            note_mention(node.ref)
        poss = node.feature("possessor")
        if poss is not None and node.feature("possessor_form", "np") == "np":
            if eligible(poss):
                current = node_lookup(out, path)
                feats = {**current.features, "possessor_form": "pronoun"}
                out = replace_node(out, path, replace(current, features=feats))
                ctx.pronominalized.add(poss)
            note_mention(poss)
    return out


# ---------------------------------------------------------------------------
# lexical choice


def substitute_synonym(tree: DsyntNode, db: StoryDatabase, policy: str, rng) -> DsyntNode:
    """Swap at most one content word for a synonym chosen per policy.

    The target node is drawn by rng among all lexicon hits; ties between
    equally ranked synonyms are also broken by rng.  No hits, no change.
    """
    hits = [(path, node) for path, node in walk(tree)
            if node.word_class in SUBSTITUTABLE_CLASSES
            and node.feature("slot") is None
            and db.synonyms.get(node.lexeme)]
    if not hits:
        return tree
    path, node = hits[rng.randrange(len(hits))] if len(hits) > 1 else hits[0]
    candidates = synonyms_of(db, node.lexeme, policy)
    if policy == "any":
        choice = candidates[rng.randrange(len(candidates))] if len(candidates) > 1 else candidates[0]
    else:
        rows = db.synonyms[node.lexeme]
        key = {"max-frequency": lambda r: r["freq_rank"],
               "min-length": lambda r: r["len"],
               "max-length": lambda r: -r["len"]}[policy]
        best = min(key(r) for r in rows)
        leaders = [r["word"] for r in rows if key(r) == best]
        choice = leaders[rng.randrange(len(leaders))] if len(leaders) > 1 else leaders[0]
    return replace_node(tree, path, replace(node, lexeme=choice))
