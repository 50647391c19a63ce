"""Conversion parameters: per-speaker feature frequencies, grouped caps,
allocation knobs, and the named presets.

Feature frequencies live in [0, 1] and are drawn per candidate sentence.
Features belong to groups that share a per-speaker, per-dialog insertion
budget (the distributed limit): a draw can succeed and still be rejected
because its group budget is spent.  Individual marker ids are legal
frequency keys next to their group, for forcing one marker on.

Ordinal preset levels map to numbers as high=0.8, low=0.1, default=0.3;
the mapping is deliberately exposed through config overrides so it can be
swept in experiments.
"""

from __future__ import annotations

import functools
import json
import os
import random
from dataclasses import dataclass, field

from .realizer import LEXICON_DIR_ENV
from .transforms import load_markers

SPEAKERS = ("S1", "S2")
RATIO_MIN, RATIO_MAX = 0.1, 0.9
HIGH, LOW, DEFAULT = 0.8, 0.1, 0.3

# Pipeline-stage features, in the fixed evaluation order.  Mutating features
# claim their sentence exclusively; inserting features also claim it so one
# source sentence grows at most one elaboration.
ELABORATION_ORDER = (
    "tag_questions",
    "wh_with_answer",
    "repetition",
    "paraphrase",
    "state_change",
    "corrections",
    "affirm_adjective",
    "exclamation",
)

MARKER_GROUP_ORDER = (
    "acknowledgments_casual",
    "acknowledgments_formal",
    "downtoners",
    "downtoners_like",
    "uncertainty",
    "filled_pauses",
    "emphasizers",
    "ingroup",
    "attitudinal",
)

STRUCTURE_FEATURES = ("split_long", "merge_short", "pronominalize")

FEATURE_GROUPS = {
    "tag_questions": "questions",
    "wh_with_answer": "questions",
    "provoking": "questions",
    "repetition": "repetitions",
    "paraphrase": "repetitions",
    "state_change": "extrapolations",
    "corrections": "interactions",
    "affirm_adjective": "interactions",
    "exclamation": "exclamations",
    "adjective_softeners": "downtoners",
    "lexical_choice": "lexical",
}
FEATURE_GROUPS.update({g: g for g in MARKER_GROUP_ORDER})
FEATURE_GROUPS.update({f: "structure" for f in STRUCTURE_FEATURES})

DEFAULT_CAP = 3
UNCAPPED_GROUPS = ("structure",)


class UnknownPreset(ValueError):
    pass


class ConfigError(ValueError):
    """Bad parameter document; names the offending field path."""

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{message}" + (f" (at {path})" if path else ""))


@functools.lru_cache(maxsize=4)
def _cached_markers(env_dir):
    return load_markers()


def _marker_inventory():
    # cache key includes the override dir so env changes are honored
    return _cached_markers(os.environ.get(LEXICON_DIR_ENV))


def known_feature_ids():
    ids = set(FEATURE_GROUPS)
    inventory = _marker_inventory()
    ids.update(inventory)
    return ids


def group_of(feature_id: str) -> str:
    if feature_id in FEATURE_GROUPS:
        return FEATURE_GROUPS[feature_id]
    spec = _marker_inventory().get(feature_id)
    if spec is not None:
        return spec.group
    raise KeyError(feature_id)


@dataclass
class FeatureProfile:
    """One speaker's style: frequencies, group budgets, vocabulary policy."""

    frequencies: dict = field(default_factory=dict)
    group_caps: dict = field(default_factory=dict)
    synonym_breadth: str = "high"   # low restricts candidates to the most frequent synonym
    word_length: str = "any"        # any | long | short

    def freq(self, feature_id: str) -> float:
        return self.frequencies.get(feature_id, 0.0)

    def cap(self, group_id: str) -> int:
        if group_id in UNCAPPED_GROUPS:
            return 10 ** 9
        return self.group_caps.get(group_id, DEFAULT_CAP)

    def synonym_policy(self) -> str:
        return {"long": "max-length", "short": "min-length"}.get(self.word_length, "max-frequency")


@dataclass
class ParameterSet:
    """Everything a conversion run needs beyond the story itself."""

    ratio: float = 0.5
    chunk: int = 1
    split_threshold: int = 14
    salience_window: int = 2
    postprocess: bool = False
    np_commas: bool = False
    predicate_commas: bool = True
    profiles: dict = field(default_factory=lambda: {s: FeatureProfile() for s in SPEAKERS})
    preset_name: str = "custom"
    warnings: list = field(default_factory=list, compare=False)

    def profile(self, speaker: str) -> FeatureProfile:
        return self.profiles[speaker]


@dataclass(frozen=True)
class FeatureDecision:
    """One sampled insertion decision, kept for the run trace."""

    speaker: str
    feature: str
    target: int
    accepted: bool
    reason: str = ""       # frequency-draw | group-cap | constraint
    detail: str = ""       # e.g. the marker id chosen for a group feature

    def __post_init__(self):
        if self.accepted and self.reason:
            raise ValueError("accepted decisions carry no rejection reason")


class FeatureSampler:
    """Draws insertion decisions with per-feature rng streams.

    Each (speaker, feature) pair reads from its own stream and consumes
    exactly one draw per candidate, so raising one feature's frequency can
    never shuffle another feature's draws, and the accepted count for a
    feature is monotone in its own frequency.  Group counters persist for
    the sampler's lifetime: one dialog side.
    """

    def __init__(self, seed, profiles: dict):
        self._seed = seed
        self._profiles = profiles
        self._counters = {}
        self._streams = {}

    def _stream(self, speaker, feature):
        key = (speaker, feature)
        if key not in self._streams:
            self._streams[key] = random.Random(f"{self._seed}|draw|{feature}|{speaker}")
        return self._streams[key]

    def used(self, speaker, group):
        return self._counters.get((speaker, group), 0)

    def decide(self, speaker, feature, candidates) -> list:
        """candidates: (target index, constraint_ok) pairs in a fixed order."""
        profile = self._profiles[speaker]
        freq = profile.freq(feature)
        group = group_of(feature)
        cap = profile.cap(group)
        rng = self._stream(speaker, feature)
        out = []
        for target, ok in candidates:
            draw = rng.random()
            if draw >= freq:
                out.append(FeatureDecision(speaker, feature, target, False, "frequency-draw"))
            elif not ok:
                out.append(FeatureDecision(speaker, feature, target, False, "constraint"))
            elif self.used(speaker, group) >= cap:
                out.append(FeatureDecision(speaker, feature, target, False, "group-cap"))
            else:
                self._counters[(speaker, group)] = self.used(speaker, group) + 1
                out.append(FeatureDecision(speaker, feature, target, True))
        return out


def sample_features(profile: FeatureProfile, candidates, seed, feature: str,
                    speaker: str = "S1") -> list:
    """Standalone sampling entry point for one feature over candidates."""
    sampler = FeatureSampler(seed, {speaker: profile})
    return sampler.decide(speaker, feature, candidates)


# ---------------------------------------------------------------------------
# presets


def _zero_profile():
    return FeatureProfile(frequencies={}, group_caps={})


def _structure_on(profile):
    profile.frequencies.update({"split_long": 1.0, "merge_short": 1.0, "pronominalize": 1.0})
    return profile


def _chatty_profile():
    p = _structure_on(_zero_profile())
    p.frequencies.update({
        "tag_questions": 0.3,
        "wh_with_answer": 0.25,
        "provoking": 0.15,
        "repetition": 0.2,
        "paraphrase": 0.2,
        "state_change": 0.15,
        "corrections": 0.1,
        "affirm_adjective": 0.1,
        "exclamation": 0.2,
        "adjective_softeners": 0.1,
        "lexical_choice": 0.2,
        "acknowledgments_casual": 0.35,
        "acknowledgments_formal": 0.25,
        "downtoners": 0.25,
        "downtoners_like": 0.1,
        "uncertainty": 0.2,
        "filled_pauses": 0.2,
        "emphasizers": 0.3,
        "ingroup": 0.15,
        "attitudinal": 0.1,
    })
    return p


def _default_profile():
    p = _structure_on(_zero_profile())
    for fid in list(FEATURE_GROUPS):
        if fid in STRUCTURE_FEATURES:
            continue
        p.frequencies[fid] = DEFAULT
    return p


def _extravert_profile():
    p = _structure_on(_zero_profile())
    p.frequencies.update({
        "exclamation": HIGH,
        "tag_questions": HIGH,
        "wh_with_answer": HIGH,
        "provoking": LOW,
        "repetition": LOW,
        "paraphrase": HIGH,
        "state_change": DEFAULT,
        "corrections": HIGH,
        "affirm_adjective": HIGH,
        "adjective_softeners": LOW,
        "lexical_choice": HIGH,
        "acknowledgments_casual": HIGH,
        "acknowledgments_formal": LOW,
        "downtoners": LOW,
        "downtoners_like": HIGH,
        "uncertainty": LOW,
        "filled_pauses": LOW,
        "emphasizers": HIGH,
        "ingroup": HIGH,
        "attitudinal": DEFAULT,
    })
    p.group_caps.update({
        "questions": 6, "repetitions": 3, "extrapolations": 2, "interactions": 4,
        "exclamations": 6, "lexical": 6,
        "acknowledgments_casual": 6, "acknowledgments_formal": 1,
        "downtoners": 1, "downtoners_like": 3, "uncertainty": 1,
        "filled_pauses": 1, "emphasizers": 6, "ingroup": 4, "attitudinal": 2,
    })
    p.synonym_breadth = "high"
    p.word_length = "long"
    return p


def _introvert_profile():
    p = _structure_on(_zero_profile())
    p.frequencies.update({
        "exclamation": LOW,
        "tag_questions": LOW,
        "wh_with_answer": LOW,
        "provoking": HIGH,
        "repetition": HIGH,
        "paraphrase": LOW,
        "state_change": DEFAULT,
        "corrections": LOW,
        "affirm_adjective": LOW,
        "adjective_softeners": HIGH,
        "lexical_choice": LOW,
        "acknowledgments_casual": LOW,
        "acknowledgments_formal": HIGH,
        "downtoners": HIGH,
        "downtoners_like": LOW,
        "uncertainty": HIGH,
        "filled_pauses": HIGH,
        "emphasizers": LOW,
        "ingroup": LOW,
        "attitudinal": DEFAULT,
    })
    p.group_caps.update({
        "questions": 2, "repetitions": 6, "extrapolations": 2, "interactions": 1,
        "exclamations": 1, "lexical": 2,
        "acknowledgments_casual": 1, "acknowledgments_formal": 6,
        "downtoners": 6, "downtoners_like": 1, "uncertainty": 6,
        "filled_pauses": 6, "emphasizers": 1, "ingroup": 1, "attitudinal": 2,
    })
    p.synonym_breadth = "low"
    p.word_length = "short"
    return p


def preset(name: str) -> ParameterSet:
    """Named configurations: a faithful pass-through (est), minimal
    naturalization (basic), interactive style (chatty), and the two
    personality pairings against a default-styled partner."""
    if name == "est":
        return ParameterSet(ratio=0.5, chunk=1, postprocess=False,
                            profiles={s: _zero_profile() for s in SPEAKERS},
                            preset_name=name)
    if name == "basic":
        return ParameterSet(ratio=0.5, chunk=1, postprocess=True,
                            profiles={s: _structure_on(_zero_profile()) for s in SPEAKERS},
                            preset_name=name)
    if name == "chatty":
        return ParameterSet(ratio=0.5, chunk=2, postprocess=True,
                            profiles={s: _chatty_profile() for s in SPEAKERS},
                            preset_name=name)
    if name == "extravert_vs_default":
        return ParameterSet(ratio=0.7, chunk=2, postprocess=True,
                            profiles={"S1": _extravert_profile(), "S2": _default_profile()},
                            preset_name=name)
    if name == "introvert_vs_default":
        return ParameterSet(ratio=0.3, chunk=2, postprocess=True,
                            profiles={"S1": _introvert_profile(), "S2": _default_profile()},
                            preset_name=name)
    raise UnknownPreset(f"unknown preset {name!r}")


# ---------------------------------------------------------------------------
# config loading


_GLOBAL_OVERRIDES = {
    "ratio": float,
    "chunk": int,
    "split_threshold": int,
    "salience_window": int,
    "postprocess": bool,
    "np_commas": bool,
    "predicate_commas": bool,
}
_PROFILE_KEYS = {"features", "caps", "synonym_breadth", "word_length"}


def _clamp_ratio(params: ParameterSet):
    if params.ratio < RATIO_MIN or params.ratio > RATIO_MAX:
        clamped = min(max(params.ratio, RATIO_MIN), RATIO_MAX)
        params.warnings.append(
            f"ratio {params.ratio} outside [{RATIO_MIN}, {RATIO_MAX}], clamped to {clamped}")
        params.ratio = clamped
    if params.chunk < 1:
        params.warnings.append(f"chunk {params.chunk} raised to 1")
        params.chunk = 1


def _apply_profile_overrides(profile: FeatureProfile, obj, path, known_ids):
    for key in obj:
        if key not in _PROFILE_KEYS:
            raise ConfigError(f"unknown key {key!r}", f"{path}.{key}")
    for fid, value in (obj.get("features") or {}).items():
        if fid not in known_ids:
            raise ConfigError(f"unknown feature id {fid!r}", f"{path}.features.{fid}")
        try:
            value = float(value)
        except (TypeError, ValueError):
            raise ConfigError("frequency must be a number", f"{path}.features.{fid}")
        if not 0.0 <= value <= 1.0:
            raise ConfigError("frequency must be within [0, 1]", f"{path}.features.{fid}")
        profile.frequencies[fid] = value
    for gid, value in (obj.get("caps") or {}).items():
        if gid not in {group_of(f) for f in known_ids}:
            raise ConfigError(f"unknown group id {gid!r}", f"{path}.caps.{gid}")
        profile.group_caps[gid] = int(value)
    if "synonym_breadth" in obj:
        if obj["synonym_breadth"] not in ("low", "high"):
            raise ConfigError("synonym_breadth must be low or high", f"{path}.synonym_breadth")
        profile.synonym_breadth = obj["synonym_breadth"]
    if "word_length" in obj:
        if obj["word_length"] not in ("any", "long", "short"):
            raise ConfigError("word_length must be any, long or short", f"{path}.word_length")
        profile.word_length = obj["word_length"]


def load_params(data) -> ParameterSet:
    """Build a ParameterSet from a config document (bytes, str or dict).

    Unspecified fields take the preset's defaults; an out-of-range ratio is
    clamped with a warning recorded on the result.
    """
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    if isinstance(data, str):
        try:
            data = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc.msg}")
    if not isinstance(data, dict):
        raise ConfigError("config must be an object")
    for key in data:
        if key not in {"preset", "seed", "overrides", "speaker_overrides"}:
            raise ConfigError(f"unknown key {key!r}", key)

    params = preset(data.get("preset", "basic"))
    known_ids = known_feature_ids()

    overrides = data.get("overrides") or {}
    for key, value in overrides.items():
        if key in _GLOBAL_OVERRIDES:
            try:
                setattr(params, key, _GLOBAL_OVERRIDES[key](value))
            except (TypeError, ValueError):
                raise ConfigError("bad value", f"overrides.{key}")
        elif key in _PROFILE_KEYS:
            for spk in SPEAKERS:
                _apply_profile_overrides(params.profiles[spk], {key: value},
                                         f"overrides", known_ids)
        else:
            raise ConfigError(f"unknown key {key!r}", f"overrides.{key}")

    for spk, obj in (data.get("speaker_overrides") or {}).items():
        if spk not in SPEAKERS:
            raise ConfigError(f"unknown speaker {spk!r}", f"speaker_overrides.{spk}")
        _apply_profile_overrides(params.profiles[spk], obj or {},
                                 f"speaker_overrides.{spk}", known_ids)

    _clamp_ratio(params)
    return params


def config_seed(data, fallback=0) -> int:
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    if isinstance(data, str):
        data = json.loads(data)
    return int(data.get("seed", fallback))
