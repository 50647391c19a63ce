"""Command-line front end: generate transcripts, compare presets, validate
story files.

Exit codes: 0 success, 1 validation failure, 2 I/O, parse or usage failure.
The env var M2D_LEXICON_DIR points at a directory whose morphology.json,
word_lexicon.json and markers.json override the shipped lexicons.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass, field

from .engine import Dialog, build_dialog
from .params import ConfigError, ParameterSet, load_params, preset, config_seed
from .realizer import load_morphology
from .storydb import build_database
from .trees import ParseError, char_map, parse_story, validate_tree

QUESTION_TRANSFORMS = ("tag_question", "wh_question", "provoking")
MARKER_PREFIX = "marker:"


@dataclass
class SpeakerStats:
    sentences: int = 0
    tokens: int = 0
    feature_counts: dict = field(default_factory=dict)
    transforms_total: int = 0

    def bump(self, key, by=1):
        self.feature_counts[key] = self.feature_counts.get(key, 0) + by


@dataclass
class RunReport:
    preset: str
    seed: int
    achieved_ratio: float
    speakers: dict

    def to_json(self):
        return {
            "preset": self.preset,
            "seed": self.seed,
            "achieved_ratio": self.achieved_ratio,
            "speakers": {
                spk: {
                    "sentences": st.sentences,
                    "tokens": st.tokens,
                    "transforms_total": st.transforms_total,
                    "feature_counts": dict(sorted(st.feature_counts.items())),
                }
                for spk, st in self.speakers.items()
            },
        }


def build_report(dialog: Dialog, preset_name: str) -> RunReport:
    """Counts recomputed from the dialog trace; nothing cached elsewhere."""
    stats = {"S1": SpeakerStats(), "S2": SpeakerStats()}
    for speaker, sent, rec in dialog.sentences():
        st = stats[speaker]
        st.sentences += 1
        st.tokens += len(sent.text.split())
        for t in rec["transforms"]:
            st.transforms_total += 1
            if t.startswith(MARKER_PREFIX):
                st.bump("markers")
                st.bump(t[len(MARKER_PREFIX):])
            else:
                st.bump(t)
            if t in QUESTION_TRANSFORMS:
                st.bump("questions")
        if sent.text.endswith("!"):
            st.bump("exclaim_marks")
    total = len(dialog.plan.speakers)
    ratio = dialog.plan.count("S1") / total if total else 0.0
    return RunReport(preset_name, dialog.seed, ratio, stats)


def render_transcript(dialog: Dialog) -> str:
    lines = []
    for turn in dialog.turns:
        lines.append(f"{turn.speaker}: " + " ".join(s.text for s in turn.sentences))
    return "\n".join(lines) + "\n"


def trace_payload(dialog: Dialog, preset_name: str) -> dict:
    return {
        "preset": preset_name,
        "seed": dialog.seed,
        "allocation": list(dialog.plan.speakers),
        "turns": [
            {"speaker": turn.speaker, "sentences": turn.trace}
            for turn in dialog.turns
        ],
        "decisions": [
            {"speaker": d.speaker, "feature": d.feature, "target": d.target,
             "accepted": d.accepted, "reason": d.reason, "detail": d.detail}
            for d in dialog.decisions
        ],
        "report": build_report(dialog, preset_name).to_json(),
    }


def _read_story(path, lax=False):
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise SystemExit(_fail(f"cannot read story file {path}: {exc.strerror}"))
    return parse_story(raw, strict=not lax)


def _fail(message, code=2):
    print(f"error: {message}", file=sys.stderr)
    return code


def cmd_generate(args) -> int:
    try:
        story = _read_story(args.story, args.lax)
    except ParseError as exc:
        return _fail(f"story {args.story}: {exc}")
    if args.config:
        try:
            with open(args.config, "rb") as fh:
                raw = fh.read()
            params = load_params(raw)
            seed = config_seed(raw)
        except OSError as exc:
            return _fail(f"cannot read config file {args.config}: {exc.strerror}")
        except ConfigError as exc:
            return _fail(f"config {args.config}: {exc}")
        preset_name = params.preset_name
    else:
        params = preset(args.preset)
        seed = 0
        preset_name = args.preset
    if args.seed is not None:
        seed = args.seed
    for warning in params.warnings:
        print(f"warning: {warning}", file=sys.stderr)

    dialog = build_dialog(story, params, seed)
    transcript = render_transcript(dialog)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(transcript)
    else:
        sys.stdout.write(transcript)
    if args.trace:
        with open(args.trace, "w", encoding="utf-8") as fh:
            json.dump(trace_payload(dialog, preset_name), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_compare(args) -> int:
    names = [p.strip() for p in args.presets.split(",") if p.strip()]
    if len(names) < 2:
        return _fail("compare needs at least two presets")
    try:
        story = _read_story(args.story, args.lax)
    except ParseError as exc:
        return _fail(f"story {args.story}: {exc}")
    lexicon = load_morphology()
    db = build_database(story)

    reports = []
    for name in names:
        try:
            params = preset(name)
        except ValueError as exc:
            return _fail(str(exc))
        dialog = build_dialog(story, params, args.seed, lexicon, db)
        reports.append(build_report(dialog, name))

    metrics = ["sentences", "tokens", "markers", "questions", "exclaim_marks",
               "repetition", "corrections", "transforms_total"]
    header = ["metric"] + [f"{r.preset}" for r in reports]
    rows = [["achieved_ratio"] + [f"{r.achieved_ratio:.2f}" for r in reports]]
    for metric in metrics:
        row = [metric]
        for r in reports:
            vals = []
            for spk in ("S1", "S2"):
                st = r.speakers[spk]
                if metric in ("sentences", "tokens", "transforms_total"):
                    vals.append(getattr(st, metric))
                else:
                    vals.append(st.feature_counts.get(metric, 0))
            row.append("/".join(str(v) for v in vals))
        rows.append(row)
    widths = [max(len(str(r[i])) for r in [header] + rows) for i in range(len(header))]
    out = ["  ".join(str(c).ljust(w) for c, w in zip(header, widths))]
    out += ["  ".join(str(c).ljust(w) for c, w in zip(row, widths)) for row in rows]
    print("\n".join(out))

    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump([r.to_json() for r in reports], fh, indent=2, sort_keys=True)
            fh.write("\n")
    return 0


def cmd_validate(args) -> int:
    try:
        with open(args.story, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        return _fail(f"cannot read story file {args.story}: {exc.strerror}")
    try:
        story = parse_story(raw, strict=not args.lax, validate=False)
    except ParseError as exc:
        return _fail(f"story {args.story}: {exc}")
    total = 0
    cm = char_map(story)
    for i, tree in enumerate(story.sentences):
        for diag in validate_tree(tree, cm):
            total += 1
            print(f"sentence {i} at {list(diag.path)}: {diag.rule}: {diag.message}")
    print(f"{total} diagnostics")
    return 0 if total == 0 else 1


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="duologue",
                                     description="Convert a tree-encoded story into a two-speaker dialog")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("generate", help="run the conversion and print the transcript")
    gen.add_argument("--story", required=True)
    gen.add_argument("--config", help="JSON parameter file")
    gen.add_argument("--preset", default="basic", help="preset when no config is given")
    gen.add_argument("--seed", type=int)
    gen.add_argument("--out", help="write the transcript here instead of stdout")
    gen.add_argument("--trace", help="write a JSON trace of every transformation")
    gen.add_argument("--lax", action="store_true", help="warn instead of failing on unknown keys")
    gen.set_defaults(func=cmd_generate)

    cmp_ = sub.add_parser("compare", help="feature-count table across presets")
    cmp_.add_argument("--story", required=True)
    cmp_.add_argument("--presets", required=True, help="comma-separated preset names")
    cmp_.add_argument("--seed", type=int, default=0)
    cmp_.add_argument("--json", help="also write reports as JSON")
    cmp_.add_argument("--lax", action="store_true")
    cmp_.set_defaults(func=cmd_compare)

    val = sub.add_parser("validate", help="print diagnostics for a story file")
    val.add_argument("--story", required=True)
    val.add_argument("--lax", action="store_true")
    val.set_defaults(func=cmd_validate)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SystemExit as exc:
        code = exc.code
        return code if isinstance(code, int) else 2


if __name__ == "__main__":
    sys.exit(main())
