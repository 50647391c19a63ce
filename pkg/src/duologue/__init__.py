"""duologue: retell a tree-encoded story as a two-speaker dialog."""

from .engine import (AllocationPlan, Dialog, DialogTurn, allocate,
                     build_dialog, make_affirmation, make_correction_pair,
                     make_provoking_question, make_repetition,
                     make_state_change, make_tag_question, make_wh_question)
from .params import (ConfigError, FeatureDecision, FeatureProfile,
                     ParameterSet, UnknownPreset, load_params, preset,
                     sample_features)
from .realizer import (MorphLexicon, RealizationError, RealizedSentence,
                       inflect, load_morphology, postprocess, realize)
from .storydb import (ActorRecord, StoryDatabase, antonym_of, build_database,
                      load_word_lexicon, salient_referents, synonyms_of)
from .transforms import (ConstraintViolation, MarkerSpec, SalienceContext,
                         insert_marker, load_markers, merge_pair,
                         pronominalize, split_long, substitute_synonym)
from .trees import (CharacterDecl, Diagnostic, DsyntNode, InvalidPath,
                    ParseError, Story, find_nodes, node_at, node_count,
                    parse_story, prune, serialize_story, validate_tree, walk)

__version__ = "0.1.0"
