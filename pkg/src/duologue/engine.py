"""Monolog-to-dialog conversion.

The pipeline allocates the source sentences between two speakers, samples
elaborations and extrapolations per the speaker profiles, merges within
turns, pronominalizes against a dialog-order salience context, applies
lexical choice and pragmatic markers, and realizes everything to text.
Stage order is fixed; every random draw comes from a stream derived from
the run seed, so a (story, params, seed) triple maps to exactly one
transcript.

Speaker roles for the interactive features: a speaker's own frequency
governs the moves that speaker makes.  Repetition, paraphrase, questions
with answers, corrections and adjective affirmations all target the other
speaker's sentences (the mover reacts to them); tags, exclamations and
state changes apply to the speaker's own sentences.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field, replace

from . import transforms
from .params import (ELABORATION_ORDER, MARKER_GROUP_ORDER, ParameterSet,
                     FeatureDecision, FeatureSampler, SPEAKERS)
from .realizer import (MorphLexicon, RealizedSentence, load_morphology,
                       postprocess, realize)
from .storydb import StoryDatabase, antonym_of, build_database, synonyms_of
from .transforms import (SalienceContext, insert_marker, marker_node,
                         merge_pair, pronominalize, split_long,
                         substitute_synonym)
from .trees import DsyntNode, Story, char_map, node_count, replace_node, walk

LOCATIVE_PREPS = frozenset({
    "to", "at", "in", "on", "over", "off", "from", "into", "onto", "under",
    "near", "behind", "above", "below", "toward", "towards", "inside", "outside",
})

REBUTTAL_PREFACE = "I don't think that's quite right, actually."

PROVOKING_LINES = (
    "I don't really remember this part, can you tell it?",
    "What happened next? I can't quite recall.",
    "You tell this part, you remember it better than I do.",
    "I always lose track here, can you take over?",
)

CONTENT_KINDS = {"source", "split", "merge"}


class UnsupportedTarget(ValueError):
    """The addressed node cannot anchor this question type."""


@dataclass
class DialogTurn:
    speaker: str
    sentences: list  # of RealizedSentence
    trace: list      # parallel per-sentence records (dicts)


@dataclass
class Dialog:
    turns: list
    params: ParameterSet
    seed: int
    plan: "AllocationPlan"
    decisions: list = field(default_factory=list)

    def sentences(self):
        for turn in self.turns:
            for sent, rec in zip(turn.sentences, turn.trace):
                yield turn.speaker, sent, rec


@dataclass(frozen=True)
class AllocationPlan:
    """Speaker per source sentence, plus the derived turn boundaries."""

    speakers: tuple

    def count(self, speaker):
        return sum(1 for s in self.speakers if s == speaker)

    def runs(self):
        out = []
        for i, spk in enumerate(self.speakers):
            if out and out[-1][0] == spk:
                out[-1][1].append(i)
            else:
                out.append((spk, [i]))
        return out


def _other(speaker):
    return "S2" if speaker == "S1" else "S1"


def allocate(story: Story, ratio: float, chunk: int, rng) -> AllocationPlan:
    """Greedy quota walk in document order.

    The floor holder keeps runs of rng-chosen length up to `chunk`; at a
    run boundary the floor passes only if the other speaker still has quota
    room, and mid-run the floor is taken away as soon as the holder's share
    would exceed its quota plus the 1/n slack.  Ratios outside [0.1, 0.9]
    are clamped, and the second speaker always gets at least one sentence.
    """
    n = len(story.sentences)
    ratio = min(max(ratio, 0.1), 0.9)
    share = {"S1": ratio, "S2": 1.0 - ratio}
    counts = {"S1": 0, "S2": 0}
    current = "S1"
    run_left = rng.randint(1, max(chunk, 1))
    plan = []

    def has_room(speaker):
        return (counts[speaker] + 1) / n <= share[speaker] + 1.0 / n

    for _ in range(n):
        if run_left == 0:
            if has_room(_other(current)):
                current = _other(current)
            run_left = rng.randint(1, max(chunk, 1))
        elif not has_room(current):
            current = _other(current)
            run_left = rng.randint(1, max(chunk, 1))
        plan.append(current)
        counts[current] += 1
        run_left -= 1

    if n >= 2:
        for spk in SPEAKERS:
            if counts[spk] == 0:
                plan[-1 if spk == "S2" else 0] = spk
    return AllocationPlan(tuple(plan))


# ---------------------------------------------------------------------------
# question generation


def _wh_node(word):
    return DsyntNode(word, "pronoun" if word != "how" else "adverb", {"wh": True})


def _questionize(tree):
    feats = {**tree.features, "mood": "quest", "punct": "question"}
    return replace(tree, features=feats)


def _animate(node, characters):
    char = (characters or {}).get(node.ref)
    return char is not None and char.gender in ("masc", "fem")


def wh_targets(tree: DsyntNode, characters=None) -> list:
    """Paths usable as make_wh_question targets, deterministic order:
    predicate adjective first, then prepositional complements, then
    objects, then the subject."""
    out = []
    for i, (rel, child) in enumerate(tree.children):
        if rel == "II" and child.word_class == "adjective":
            out.append((i,))
    for path, node in walk(tree):
        if node.word_class == "noun" and path:
            parent = transforms.node_lookup(tree, path[:-1])
            rel = parent.children[path[-1]][0]
            if parent.word_class == "preposition" and rel == "II":
                out.append(path)
    for i, (rel, child) in enumerate(tree.children):
        if rel in ("II", "III") and child.word_class == "noun":
            out.append((i,))
    for i, (rel, child) in enumerate(tree.children):
        if rel == "I" and child.word_class == "noun":
            out.append((i,))
    return out


def make_wh_question(tree: DsyntNode, target, characters=None):
    """(question tree, answer tree) built by class-driven pruning.

    Nouns inside prepositional phrases become in-situ wh words, with
    locative prepositions absorbed ("The man ran where?"); a predicate
    adjective becomes a fronted "how" copular question; subjects and
    objects become who/what in place.  The answer is the original tree.
    """
    node = transforms.node_lookup(tree, target)
    if node.word_class == "preposition":
        comp = node.first("II")
        if comp is None or comp.word_class != "noun":
            raise UnsupportedTarget("preposition without a noun complement")
        target = target + tuple(i for i, (rel, c) in enumerate(node.children) if c is comp)[:1]
        node = comp
    if node.word_class in ("verb", "conjunction", "adverb", "pronoun", "numeral"):
        raise UnsupportedTarget(f"cannot question a {node.word_class} node")

    if node.word_class == "adjective":
        if target != _predicate_path(tree):
            raise UnsupportedTarget("only predicate adjectives can be questioned")
        q = replace_node(tree, target, _wh_node("how"))
        return _questionize(q), tree

    parent = transforms.node_lookup(tree, target[:-1]) if target else None
    rel = parent.children[target[-1]][0] if parent is not None else None
    if parent is not None and parent.word_class == "preposition":
        if _animate(node, characters):
            word = "who"
        elif parent.lexeme in LOCATIVE_PREPS:
            word = "where"
        else:
            word = "what"
    elif rel == "I":
        word = "who" if _animate(node, characters) else "what"
    else:
        word = "who" if _animate(node, characters) else "what"
    q = replace_node(tree, target, _wh_node(word))
    return _questionize(q), tree


def _predicate_path(tree):
    for i, (rel, child) in enumerate(tree.children):
        if rel == "II" and child.word_class == "adjective":
            return (i,)
    return None


def _tag_pronoun(subject, characters, lexicon: MorphLexicon):
    if subject.word_class == "pronoun":
        return {"me": "I", "us": "we", "them": "they", "him": "he", "her": "she"}.get(
            subject.lexeme, subject.lexeme)
    char = (characters or {}).get(subject.ref)
    if any(rel == "COORD" for rel, _ in subject.children):
        return lexicon.pronoun("neut", "pl", "nom")
    if char is not None:
        return lexicon.pronoun(char.gender, char.number, "nom")
    return lexicon.pronoun("neut", subject.feature("number", "sg"), "nom")


def make_tag_question(tree: DsyntNode, characters=None, lexicon=None):
    """Append a polarity-flipped tag ("..., was not it?" before
    postprocessing) and switch to question punctuation."""
    lexicon = lexicon or load_morphology()
    if tree.word_class != "verb" or "tense" not in tree.features:
        raise UnsupportedTarget("tag questions need a finite verbal root")
    if tree.feature("mood", "decl") != "decl" or tree.feature("punct", "period") == "question":
        raise UnsupportedTarget("tag questions attach to declaratives only")
    subject = tree.first("I")
    if subject is None:
        raise UnsupportedTarget("tag questions need an overt subject")

    from .realizer import _agreement, _be_form, _do_form  # shared agreement rules
    person, number = _agreement(subject)
    tense = tree.features["tense"]
    if tree.lexeme == "be":
        aux = "will" if tense == "future" else _be_form(tense, person, number)
    elif tense == "future":
        aux = "will"
    else:
        aux = _do_form(tense, person, number)
    flip_to_negative = tree.feature("polarity", "affirm") == "affirm"
    words = [aux] + (["not"] if flip_to_negative else []) + [_tag_pronoun(subject, characters, lexicon)]
    tag = DsyntNode(" ".join(words), "verb", {"slot": "final", "join": "comma"})
    out = replace(tree, children=tree.children + (("APPEND", tag),))
    return replace(out, features={**out.features, "punct": "question"})


class ProvokingDeck:
    """Canned floor-handoff questions, drawn without replacement until the
    inventory is exhausted, then refilled."""

    def __init__(self, lines=PROVOKING_LINES):
        self._lines = tuple(lines)
        self._remaining = list(self._lines)

    def draw(self, rng) -> str:
        if not self._remaining:
            self._remaining = list(self._lines)
        return self._remaining.pop(rng.randrange(len(self._remaining)))


def make_provoking_question(rng, deck: ProvokingDeck = None) -> str:
    return (deck or ProvokingDeck()).draw(rng)


# ---------------------------------------------------------------------------
# elaboration and extrapolation builders


def _ack(tree, marker_id):
    return insert_marker(tree, transforms.load_markers()[marker_id])


def make_repetition(tree: DsyntNode, mode: str, db: StoryDatabase, rng,
                    policy: str = "max-frequency") -> DsyntNode:
    """Copy a declarative for the other speaker, acknowledgment first.

    verbatim leads with "yeah"; paraphrase substitutes a synonym and leads
    with "right", degrading to a plain copy (still under "right") when the
    lexicon has no hits.
    """
    if mode == "paraphrase":
        swapped = substitute_synonym(tree, db, policy, rng)
        return _ack(swapped, "ack_right")
    return _ack(tree, "ack_yeah")


def make_state_change(db: StoryDatabase, character_id: str, position: int,
                      characters=None):
    """"Now, the X is <antonym of latest state>." or None without one."""
    record = db.actors.get(character_id)
    if record is None:
        return None
    state = record.latest_state(position)
    if state is None:
        return None
    flipped = antonym_of(db, state)
    if flipped is None:
        return None
    char = (characters or db.characters)[character_id]
    subject = DsyntNode(char.lexeme, "noun",
                        {"article": "none" if char.proper else "def", "number": char.number},
                        ref=character_id)
    now = DsyntNode("now", "adverb", {"slot": "initial", "join": "comma"})
    return DsyntNode("be", "verb", {"tense": "present", "punct": "period"}, children=(
        ("APPEND", now),
        ("I", subject),
        ("II", DsyntNode(flipped, "adjective")),
    ))


def _stative(tree):
    pred = tree.first("II")
    return (tree.word_class == "verb" and tree.lexeme == "be"
            and "tense" in tree.features
            and tree.feature("mood", "decl") == "decl"
            and pred is not None and pred.word_class == "adjective")


def make_correction_pair(tree: DsyntNode):
    """(false statement, corrective assertion) or None for non-statives.

    The false version flips the predicate polarity; the correction embeds
    the original under "I think" and is spoken after REBUTTAL_PREFACE by
    the other speaker.
    """
    if not _stative(tree):
        return None
    flipped = "neg" if tree.feature("polarity", "affirm") == "affirm" else "affirm"
    false = replace(tree, features={**tree.features, "polarity": flipped})
    embedded = replace(tree, features={k: v for k, v in tree.features.items() if k != "punct"})
    speaker_i = DsyntNode("I", "pronoun", {"person": 1, "number": "sg"})
    correction = DsyntNode("think", "verb", {"tense": "present", "punct": "period"}, children=(
        ("I", speaker_i),
        ("II", embedded),
    ))
    return false, correction


@dataclass(frozen=True)
class AffirmationParts:
    truncated: DsyntNode
    interjection: DsyntNode
    resume: DsyntNode = None


def make_affirmation(tree: DsyntNode, db: StoryDatabase, rng,
                     policy: str = "max-frequency"):
    """Interrupt a stative sentence after its predicate adjective.

    The owner's sentence is cut with a trailing dash, the other speaker
    interjects "Just <synonym>, really.", and any coordinated continuation
    comes back as "Yeah, and ...".  None when the predicate has no synonym.
    """
    if not _stative(tree):
        return None
    pred = tree.first("II")
    synonyms = synonyms_of(db, pred.lexeme, policy)
    if not synonyms:
        return None
    synonym = synonyms[0]

    coords = [(i, c) for i, (rel, c) in enumerate(tree.children)
              if rel == "COORD" and c.word_class == "verb"]
    kids = tuple((rel, c) for rel, c in tree.children
                 if not (rel == "COORD" and c.word_class == "verb"))
    dangling_and = DsyntNode("and", "conjunction", {"slot": "final", "join": "space"})
    truncated = replace(tree, children=kids + (("APPEND", dangling_and),),
                        features={**tree.features, "punct": "dash"})

    interjection = DsyntNode(synonym, "adjective", {"punct": "period"}, children=(
        ("APPEND", DsyntNode("just", "adverb", {"slot": "initial", "join": "space"})),
        ("APPEND", DsyntNode("really", "adverb", {"slot": "final", "join": "comma"})),
    ))

    resume = None
    if coords:
        first = coords[0][1]
        rest = tuple(("COORD", c) for _, c in coords[1:])
        if first.first("I") is None:
            subject = tree.first("I")
            if subject is not None:
                first = replace(first, children=(("I", subject),) + first.children)
        feats = {**first.features, "punct": "period"}
        resume = replace(first, children=(
            ("APPEND", DsyntNode("yeah", "adverb", {"slot": "initial", "join": "comma"})),
            ("APPEND", DsyntNode("and", "conjunction", {"slot": "initial", "join": "space"})),
        ) + first.children + rest, features=feats)
    return AffirmationParts(truncated, interjection, resume)


# ---------------------------------------------------------------------------
# the pipeline


@dataclass
class _Unit:
    speaker: str
    sources: tuple
    kind: str
    tree: DsyntNode = None
    canned: str = None
    transforms: list = field(default_factory=list)
    claimed: bool = False


def _content_candidates(units, speaker):
    return [i for i, u in enumerate(units)
            if u.speaker == speaker and u.kind in CONTENT_KINDS and not u.claimed]


def _exclaimable(tree):
    return (tree.feature("mood", "decl") == "decl"
            and tree.feature("punct", "period") == "period")


def build_dialog(story: Story, params: ParameterSet, seed: int,
                 lexicon: MorphLexicon = None, db: StoryDatabase = None) -> Dialog:
    """Run the full conversion; pure function of (story, params, seed)."""
    lexicon = lexicon or load_morphology()
    db = db or build_database(story)
    chars = char_map(story)
    markers = transforms.load_markers()
    decisions = []

    def stream(name):
        return random.Random(f"{seed}|{name}")

    sampler = FeatureSampler(seed, params.profiles)
    plan = allocate(story, params.ratio, params.chunk, stream("alloc"))

    # --- deaggregate ------------------------------------------------------
    units = []
    for idx, tree in enumerate(story.sentences):
        speaker = plan.speakers[idx]
        profile = params.profile(speaker)
        pieces = [tree]
        if stream(f"split|{idx}").random() < profile.freq("split_long"):
            pieces = split_long(tree, params.split_threshold)
        for piece in pieces:
            tags = ["split_long"] if len(pieces) > 1 else []
            units.append(_Unit(speaker, (idx,), "split" if len(pieces) > 1 else "source",
                               tree=piece, transforms=tags))

    # --- elaborate / extrapolate -----------------------------------------
    inserts = []  # (anchor unit index, sequence, _Unit)
    seq = 0

    def put(anchor, unit, after=True):
        nonlocal seq
        inserts.append((anchor + (1 if after else 0), seq, unit))
        seq += 1

    for fid in ELABORATION_ORDER:
        for speaker in SPEAKERS:
            mover = speaker
            own = fid in ("tag_questions", "state_change", "exclamation")
            targets = _content_candidates(units, mover if own else _other(mover))
            if not targets:
                continue
            picker = stream(f"pick|{fid}|{speaker}")

            def ok(unit):
                t = unit.tree
                if fid == "tag_questions":
                    return (t.lexeme != "" and t.word_class == "verb" and "tense" in t.features
                            and t.feature("mood", "decl") == "decl"
                            and t.feature("punct", "period") == "period"
                            and t.first("I") is not None)
                if fid == "wh_with_answer":
                    return bool(wh_targets(t, chars)) and _exclaimable(t)
                if fid in ("repetition", "paraphrase"):
                    return _exclaimable(t)
                if fid == "state_change":
                    subj = t.first("I")
                    if subj is None or subj.ref is None:
                        return False
                    rec = db.actors.get(subj.ref)
                    state = rec.latest_state(unit.sources[0]) if rec else None
                    return state is not None and antonym_of(db, state) is not None
                if fid == "corrections":
                    return make_correction_pair(t) is not None
                if fid == "affirm_adjective":
                    return make_affirmation(t, db, None) is not None
                if fid == "exclamation":
                    return _exclaimable(t)
                return False

            cands = [(i, ok(units[i])) for i in targets]
            for dec in sampler.decide(speaker, fid, cands):
                decisions.append(dec)
                if not dec.accepted:
                    continue
                unit = units[dec.target]
                if fid == "tag_questions":
                    unit.tree = make_tag_question(unit.tree, chars, lexicon)
                    unit.transforms.append("tag_question")
                    unit.claimed = True
                elif fid == "wh_with_answer":
                    paths = wh_targets(unit.tree, chars)
                    target = paths[picker.randrange(len(paths))] if len(paths) > 1 else paths[0]
                    q, _ = make_wh_question(unit.tree, target, chars)
                    put(dec.target, _Unit(speaker, unit.sources, "wh_question", tree=q,
                                          transforms=["wh_question"]), after=False)
                    unit.transforms.append("wh_answer")
                    unit.claimed = True
                elif fid in ("repetition", "paraphrase"):
                    profile = params.profile(speaker)
                    rep = make_repetition(unit.tree, "paraphrase" if fid == "paraphrase" else "verbatim",
                                          db, picker, profile.synonym_policy())
                    put(dec.target, _Unit(speaker, unit.sources, fid, tree=rep, transforms=[fid]))
                    unit.claimed = True
                elif fid == "state_change":
                    subj = unit.tree.first("I")
                    sc = make_state_change(db, subj.ref, unit.sources[0], chars)
                    put(dec.target, _Unit(speaker, unit.sources, "state_change", tree=sc,
                                          transforms=["state_change"]))
                    unit.claimed = True
                elif fid == "corrections":
                    false, correction = make_correction_pair(unit.tree)
                    unit.tree = false
                    unit.transforms.append("correction_false")
                    unit.claimed = True
                    put(dec.target, _Unit(speaker, unit.sources, "correction_preface",
                                          canned=REBUTTAL_PREFACE, transforms=["correction"]))
                    put(dec.target, _Unit(speaker, unit.sources, "correction", tree=correction,
                                          transforms=["correction"]))
                elif fid == "affirm_adjective":
                    profile = params.profile(speaker)
                    parts = make_affirmation(unit.tree, db, picker, profile.synonym_policy())
                    owner = unit.speaker
                    unit.tree = parts.truncated
                    unit.transforms.append("affirm_truncate")
                    unit.claimed = True
                    put(dec.target, _Unit(speaker, unit.sources, "affirm_interject",
                                          tree=parts.interjection, transforms=["affirm_adjective"]))
                    if parts.resume is not None:
                        put(dec.target, _Unit(owner, unit.sources, "affirm_resume",
                                              tree=parts.resume, transforms=["affirm_resume"]))
                elif fid == "exclamation":
                    unit.tree = replace(unit.tree,
                                        features={**unit.tree.features, "punct": "exclaim"})
                    unit.transforms.append("exclamation")
                    unit.claimed = True

    units = _weave(units, inserts)

    # --- provoking questions at turn handoffs ----------------------------
    deck = ProvokingDeck()
    inserts, seq = [], 0
    runs = _runs(units)
    for speaker in SPEAKERS:
        boundaries = [run[-1] for spk, run in runs[:-1] if spk == speaker]
        if not boundaries:
            continue
        picker = stream(f"pick|provoking|{speaker}")
        cands = [(i, True) for i in boundaries]
        for dec in sampler.decide(speaker, "provoking", cands):
            decisions.append(dec)
            if dec.accepted:
                line = make_provoking_question(picker, deck)
                inserts.append((dec.target + 1, seq,
                                _Unit(speaker, units[dec.target].sources, "provoking",
                                      canned=line, transforms=["provoking"])))
                seq += 1
    units = _weave(units, inserts)

    # --- aggregate within turns ------------------------------------------
    merged = []
    for unit in units:
        prev = merged[-1] if merged else None
        if (prev is not None and prev.speaker == unit.speaker
                and prev.kind in CONTENT_KINDS and unit.kind in CONTENT_KINDS
                and not prev.claimed and not unit.claimed
                and stream(f"merge|{len(merged)}").random() < params.profile(unit.speaker).freq("merge_short")
                and node_count(prev.tree) + node_count(unit.tree) <= params.split_threshold):
            fused = merge_pair(prev.tree, unit.tree)
            if fused is not None:
                prev.tree = fused
                prev.sources = tuple(dict.fromkeys(prev.sources + unit.sources))
                prev.kind = "merge"
                prev.transforms.append("merge_short")
                continue
        merged.append(unit)
    units = merged

    # --- pronominalize -----------------------------------------------------
    window = params.salience_window
    mention_log = []  # per processed unit: refs in document order
    turn_pronominalized = set()
    prev_speaker = None
    for pos, unit in enumerate(units):
        if unit.speaker != prev_speaker:
            turn_pronominalized = set()
            prev_speaker = unit.speaker
        if unit.tree is None:
            mention_log.append([])
            continue
        recent = []
        for back in mention_log[-window:][::-1]:
            for cid in back:
                if all(r[0] != cid for r in recent):
                    c = chars[cid]
                    recent.append((cid, c.gender, c.number))
        if stream(f"pron|{pos}").random() < params.profile(unit.speaker).freq("pronominalize"):
            ctx = SalienceContext(recent, turn_pronominalized, chars, lexicon)
            before = unit.tree
            unit.tree = pronominalize(unit.tree, ctx)
            if unit.tree != before:
                unit.transforms.append("pronominalize")
        mentions = []
        for _, node in walk(unit.tree):
            if node.ref in chars and node.ref not in mentions:
                mentions.append(node.ref)
            poss = node.feature("possessor")
            if poss in chars and poss not in mentions:
                mentions.append(poss)
        mention_log.append(mentions)

    # --- lexical choice ----------------------------------------------------
    for speaker in SPEAKERS:
        profile = params.profile(speaker)
        targets = [i for i, u in enumerate(units) if u.speaker == speaker and u.tree is not None
                   and u.kind not in ("paraphrase",)]
        if not targets:
            continue
        picker = stream(f"pick|lexical_choice|{speaker}")

        def has_hit(tree):
            if profile.synonym_breadth == "low":
                return any(len(db.synonyms.get(n.lexeme, [])) == 1 or db.synonyms.get(n.lexeme)
                           for _, n in walk(tree) if n.word_class in transforms.SUBSTITUTABLE_CLASSES)
            return any(db.synonyms.get(n.lexeme) for _, n in walk(tree)
                       if n.word_class in transforms.SUBSTITUTABLE_CLASSES)

        cands = [(i, has_hit(units[i].tree)) for i in targets]
        for dec in sampler.decide(speaker, "lexical_choice", cands):
            decisions.append(dec)
            if dec.accepted:
                unit = units[dec.target]
                policy = "max-frequency" if profile.synonym_breadth == "low" else profile.synonym_policy()
                swapped = substitute_synonym(unit.tree, db, policy, picker)
                if swapped != unit.tree:
                    unit.tree = swapped
                    unit.transforms.append("lexical_choice")

    # --- pragmatic markers ---------------------------------------------------
    by_group = {}
    for spec in markers.values():
        by_group.setdefault(spec.group, []).append(spec)
    marker_features = list(MARKER_GROUP_ORDER) + ["adjective_softeners"]
    explicit = sorted(fid for spk in SPEAKERS
                      for fid in params.profile(spk).frequencies
                      if fid in markers)
    marker_features += [f for f in dict.fromkeys(explicit) if f not in marker_features]

    for fid in marker_features:
        for speaker in SPEAKERS:
            profile = params.profile(speaker)
            if profile.freq(fid) <= 0:
                continue
            targets = [i for i, u in enumerate(units)
                       if u.speaker == speaker and u.tree is not None]
            if not targets:
                continue
            picker = stream(f"pick|{fid}|{speaker}")
            if fid == "adjective_softeners":
                group_specs = [s for s in by_group.get("downtoners", [])
                               if s.slot == "pre-adjective"]
            elif fid in markers:
                group_specs = [markers[fid]]
            else:
                group_specs = by_group.get(fid, [])

            def eligible_specs(tree):
                if fid == "adjective_softeners":
                    if not _attributive_adjective_path(tree):
                        return []
                return [s for s in group_specs if transforms.check_constraint(tree, s)]

            cands = [(i, bool(eligible_specs(units[i].tree))) for i in targets]
            for dec in sampler.decide(speaker, fid, cands):
                if dec.accepted:
                    unit = units[dec.target]
                    specs = eligible_specs(unit.tree)
                    spec = specs[picker.randrange(len(specs))] if len(specs) > 1 else specs[0]
                    if fid == "adjective_softeners":
                        unit.tree = _soften_attributive(unit.tree, spec)
                    else:
                        unit.tree = insert_marker(unit.tree, spec)
                    unit.transforms.append(f"marker:{spec.id}")
                    dec = replace(dec, detail=spec.id)
                decisions.append(dec)

    # --- realize and postprocess ------------------------------------------
    turns = []
    for pos, unit in enumerate(units):
        token = f"{unit.kind}:{','.join(map(str, unit.sources))}"
        if unit.canned is not None:
            text = unit.canned
        else:
            text = realize(unit.tree, lexicon, chars,
                           np_commas=params.np_commas,
                           predicate_commas=params.predicate_commas,
                           source=token).text
        if params.postprocess:
            text = postprocess(text)
        record = {"text": text, "sources": list(unit.sources), "kind": unit.kind,
                  "transforms": list(unit.transforms)}
        if turns and turns[-1].speaker == unit.speaker:
            turns[-1].sentences.append(RealizedSentence(text, token))
            turns[-1].trace.append(record)
        else:
            turns.append(DialogTurn(unit.speaker, [RealizedSentence(text, token)], [record]))

    return Dialog(turns, params, seed, plan, decisions)


def _weave(units, inserts):
    if not inserts:
        return units
    out = []
    keyed = sorted(inserts, key=lambda t: (t[0], t[1]))
    by_pos = {}
    for pos, s, unit in keyed:
        by_pos.setdefault(pos, []).append(unit)
    for i in range(len(units) + 1):
        out.extend(by_pos.get(i, []))
        if i < len(units):
            out.append(units[i])
    return out


def _runs(units):
    runs = []
    for i, u in enumerate(units):
        if runs and runs[-1][0] == u.speaker:
            runs[-1][1].append(i)
        else:
            runs.append((u.speaker, [i]))
    return runs


def _attributive_adjective_path(tree):
    for path, node in walk(tree):
        if node.word_class == "noun":
            for i, (rel, child) in enumerate(node.children):
                if rel == "ATTR" and child.word_class == "adjective":
                    return path + (i,)
    return None


def _soften_attributive(tree, spec):
    path = _attributive_adjective_path(tree)
    target = transforms.node_lookup(tree, path)
    grown = replace(target, children=target.children + (("APPEND", marker_node(spec)),))
    return replace_node(tree, path, grown)
