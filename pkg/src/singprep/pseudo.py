"""Pseudo-singing generation and speech annotation.

Aligned speech becomes training-style data two ways: annotate_speech wraps
the alignment into a speech-style record (notes averaged per word), and
make_pseudo_singing swaps the natural pitch for a rendered melody, then
resynthesizes and annotates the result as pseudo-singing.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .annotation import AnnotationRecord
from .dsp.pitch import (
    DEFAULT_HOP,
    F0Contour,
    average_f0_by_segments,
    extract_f0,
    hz_from_midi,
)
from .dsp.vocoder import analyze, replace_f0, synthesize
from .dsp.audio import Waveform
from .errors import InputError, ParseError, ValidationError
from .lexicon import CMU_PHONES, ENGLISH, MANDARIN, _is_han
from .score import PSEUDO_SINGING, SILENCE_LABELS, SPEECH, PhonemeEvent
from .textgrid import AlignmentTier, Interval

DEFAULT_BANK_RESOURCE = "melodies.json"

_ALIGN_TOLERANCE = 0.05  # seconds of admissible waveform/alignment mismatch


@dataclass(frozen=True)
class MelodyTemplate:
    """A short pitch sequence: MIDI notes with relative step lengths."""

    template_id: str
    steps: tuple[tuple[int, float], ...]

    def __post_init__(self):
        if not self.template_id:
            raise InputError("melody template id must be nonempty")
        if not self.steps:
            raise InputError(f"melody {self.template_id!r}: steps must be nonempty")
        total = 0.0
        for midi, length in self.steps:
            if not isinstance(midi, int) or isinstance(midi, bool) or midi <= 0:
                raise InputError(
                    f"melody {self.template_id!r}: note {midi!r} is not a positive integer"
                )
            if length <= 0:
                raise InputError(
                    f"melody {self.template_id!r}: step length {length!r} must be positive"
                )
            total += length
        # normalize so relative lengths sum to 1
        object.__setattr__(
            self,
            "steps",
            tuple((midi, length / total) for midi, length in self.steps),
        )


@dataclass(frozen=True)
class MelodyBank:
    templates: tuple[MelodyTemplate, ...]

    def __post_init__(self):
        seen = set()
        for t in self.templates:
            if t.template_id in seen:
                raise InputError(f"duplicate melody id {t.template_id!r}")
            seen.add(t.template_id)

    def __len__(self) -> int:
        return len(self.templates)

    def get(self, template_id: str) -> MelodyTemplate:
        for t in self.templates:
            if t.template_id == template_id:
                return t
        raise InputError(f"no melody named {template_id!r}")


def load_melody_bank(path=None) -> MelodyBank:
    """Load a melody bank from JSON; with no path, the bundled default."""
    if path is None:
        text = (
            resources.files("singprep.data").joinpath(DEFAULT_BANK_RESOURCE).read_text("utf-8")
        )
    else:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"melody bank is not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("templates"), list):
        raise ParseError("melody bank must be an object with a 'templates' list")
    templates = []
    for entry in doc["templates"]:
        if not isinstance(entry, dict) or "id" not in entry or "steps" not in entry:
            raise ParseError(f"malformed melody entry: {entry!r}")
        steps = []
        for step in entry["steps"]:
            if not isinstance(step, (list, tuple)) or len(step) != 2:
                raise ParseError(f"melody {entry['id']!r}: step {step!r} is not a pair")
            steps.append((step[0], float(step[1])))
        templates.append(MelodyTemplate(str(entry["id"]), tuple(steps)))
    if not templates:
        raise ParseError("melody bank contains no templates")
    return MelodyBank(tuple(templates))


def choose_melody(bank: MelodyBank, seed: int) -> MelodyTemplate:
    """Uniform pick from the bank, reproducible for a given seed."""
    if len(bank) == 0:
        raise InputError("melody bank is empty")
    return bank.templates[random.Random(seed).randrange(len(bank))]


def _step_frames(template: MelodyTemplate, n_frames: int) -> list[int]:
    """Frames per step: round(length * n) half-up, last absorbs the remainder."""
    counts = [int(np.floor(length * n_frames + 0.5)) for _, length in template.steps[:-1]]
    counts.append(n_frames - sum(counts))
    # pathological length vectors can over-round; shave the largest steps
    while counts[-1] < 0:
        counts[counts.index(max(counts[:-1]))] -= 1
        counts[-1] += 1
    return counts


def _step_spans(template: MelodyTemplate, n_frames: int) -> list[tuple[int, int, int]]:
    spans = []
    start = 0
    for (midi, _), count in zip(template.steps, _step_frames(template, n_frames)):
        spans.append((start, start + count, midi))
        start += count
    return spans


def render_melody(template: MelodyTemplate, n_frames: int, hop: float = DEFAULT_HOP) -> F0Contour:
    """Expand a template to a frame-rate F0 contour of exactly n_frames."""
    if n_frames <= 0:
        raise InputError(f"n_frames must be positive, got {n_frames}")
    values = np.empty(n_frames)
    for start, end, midi in _step_spans(template, n_frames):
        values[start:end] = hz_from_midi(midi)
    return F0Contour(values, hop)


def _word_language(label: str) -> int:
    return MANDARIN if any(_is_han(ch) for ch in label) else ENGLISH


def _normalize_phone(label: str) -> str:
    ph = label.strip().upper()
    if ph and ph[-1] in "012":
        ph = ph[:-1]
    if ph not in CMU_PHONES:
        raise InputError(f"phone tier label {label!r} is not a recognized phone")
    return ph


def _speech_phone_events(
    word_tier: AlignmentTier, phone_tier: AlignmentTier
) -> list[tuple[Interval, str, Interval]]:
    """Pair each non-silent phone with the word containing its midpoint."""
    words = word_tier.labelled(drop=SILENCE_LABELS)
    out = []
    for iv in phone_tier.labelled(drop=SILENCE_LABELS):
        mid = (iv.start + iv.end) / 2.0
        parent = next((w for w in words if w.start - 1e-9 <= mid < w.end + 1e-9), None)
        if parent is None:
            raise InputError(
                f"phone {iv.label!r} at {iv.start:.3f}s lies outside every word interval"
            )
        out.append((iv, _normalize_phone(iv.label), parent))
    return out


def annotate_speech(
    waveform: Waveform,
    word_tier: AlignmentTier,
    phone_tier: AlignmentTier,
    utt_id: str,
    audio_path: str = "",
    singer_id: str = "",
    hop: float = DEFAULT_HOP,
) -> AnnotationRecord:
    """Speech-style annotation: per-word notes from averaged pitch.

    Phone events come from the alignment (silences dropped); every phone in a
    word shares that word's note, with note_dur equal to the word duration.
    """
    contour = extract_f0(waveform, hop=hop)
    words = word_tier.labelled(drop=SILENCE_LABELS)
    notes = {
        id(w): note
        for w, (_, note) in zip(
            words, average_f0_by_segments(contour, [(w.start, w.end) for w in words])
        )
    }
    events = []
    for iv, ph, word in _speech_phone_events(word_tier, phone_tier):
        events.append(
            PhonemeEvent(
                phoneme=ph,
                ph_dur=iv.end - iv.start,
                note_midi=notes[id(word)],
                note_dur=word.end - word.start,
                is_slur=False,
                language_token=_word_language(word.label),
                style_token=SPEECH,
            )
        )
    return AnnotationRecord(utt_id, audio_path, events, singer_id, None)


def make_pseudo_singing(
    waveform: Waveform,
    word_tier: AlignmentTier,
    phone_tier: AlignmentTier,
    melody: MelodyTemplate,
    seed: int,
    utt_id: str,
    audio_path: str = "",
    singer_id: str = "",
    hop: float = DEFAULT_HOP,
) -> tuple[Waveform, AnnotationRecord]:
    """Swap speech pitch for a melody and annotate the result as style 2.

    The source is analyzed, the melody is rendered over the same frame grid
    and masked by the original voicing, and the vocoder resynthesizes with
    the swapped contour. Each annotation event takes the melody step active
    at its temporal midpoint. Deterministic for a given seed.
    """
    span = max(word_tier.xmax, phone_tier.xmax)
    if abs(span - waveform.duration) > _ALIGN_TOLERANCE:
        raise InputError(
            f"alignment spans {span:.3f}s but audio lasts {waveform.duration:.3f}s"
        )

    analysis = analyze(waveform, hop=hop)
    n = analysis.n_frames
    target = render_melody(melody, n, hop)
    masked = F0Contour(np.where(analysis.f0.voiced, target.values, 0.0), hop)
    rendered = synthesize(replace_f0(analysis, masked), rng=np.random.default_rng(seed))

    spans = _step_spans(melody, n)
    events = []
    for iv, ph, word in _speech_phone_events(word_tier, phone_tier):
        mid_frame = (iv.start + iv.end) / 2.0 / hop
        start, end, midi = next(
            (s for s in spans if s[0] <= mid_frame < s[1]), spans[-1]
        )
        events.append(
            PhonemeEvent(
                phoneme=ph,
                ph_dur=iv.end - iv.start,
                note_midi=midi,
                note_dur=(end - start) * hop,
                is_slur=False,
                language_token=_word_language(word.label),
                style_token=PSEUDO_SINGING,
            )
        )
    if not events:
        raise ValidationError(["alignment yields no phone events"])
    record = AnnotationRecord(utt_id, audio_path, events, singer_id, None)
    return rendered, record
