"""Batch command-line interface.

Subcommands: g2p, transcode, adapt, pseudo, plan-svc, eval. Logs go to
stderr; data goes to stdout or to files. Exit codes: 0 success, 1 internal
error, 2 input or validation error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .annotation import AnnotationRecord, read_manifest, write_annotation, write_manifest
from .config import STRATEGIES, PipelineConfig, resolve_config
from .dsp.audio import read_wav, write_wav
from .errors import InputError, ParseError, ValidationError
from .lexicon import Lexicon, LyricToken, default_lexicon, g2p, segment_lyrics, _is_han
from .metrics import EvalReport, evaluate_pair, read_embedding, tokenize_transcript
from .pseudo import choose_melody, load_melody_bank, make_pseudo_singing
from .score import (
    RatioTable,
    ScoreEvent,
    adapt_average,
    adapt_proportional,
    extract_ratios,
    transform_score,
)
from .svc import build_job_manifest
from .textgrid import read_textgrid

log = logging.getLogger("singprep")

EXIT_OK = 0
EXIT_INTERNAL = 1
EXIT_INPUT = 2


def derive_seed(seed: int, utt_id: str) -> int:
    """Stable per-utterance seed, independent of processing order."""
    digest = hashlib.blake2s(f"{seed}:{utt_id}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def _build_lexicon(cfg: PipelineConfig) -> Lexicon:
    if cfg.cmu_dict is None and cfg.pinyin_map is None and cfg.hanzi_table is None:
        return default_lexicon()
    base = default_lexicon()
    lex = Lexicon()
    if cfg.cmu_dict is not None:
        with open(cfg.cmu_dict, encoding="utf-8") as fh:
            lex.load_cmu_dict(fh)
    else:
        lex.english_entries.update(base.english_entries)
    if cfg.pinyin_map is not None:
        with open(cfg.pinyin_map, encoding="utf-8") as fh:
            lex.load_pinyin_map(fh)
    else:
        lex.pinyin_entries.update(base.pinyin_entries)
    if cfg.hanzi_table is not None:
        with open(cfg.hanzi_table, encoding="utf-8") as fh:
            lex.load_hanzi_table(fh)
    else:
        lex.hanzi_readings.update(base.hanzi_readings)
    return lex


def _write_text(text: str, path: str | None) -> None:
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _read_entries(path, list_key: str, required: tuple[str, ...]) -> list[dict]:
    """A JSON manifest: either {list_key: [...]} or a bare list of objects."""
    with open(path, encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"{path}: invalid JSON: {exc}") from None
    if isinstance(doc, dict) and isinstance(doc.get(list_key), list):
        entries = doc[list_key]
    elif isinstance(doc, list):
        entries = doc
    else:
        raise InputError(f"{path}: expected a list or an object with {list_key!r}")
    out = []
    for i, entry in enumerate(entries):
        if not isinstance(entry, dict):
            raise InputError(f"{path}: entry {i} is not an object")
        missing = [k for k in required if k not in entry]
        if missing:
            raise InputError(f"{path}: entry {i} missing fields: {', '.join(missing)}")
        out.append(entry)
    return out


# -- g2p ----------------------------------------------------------------------

def cmd_g2p(args, cfg: PipelineConfig) -> int:
    if args.input is not None:
        text = Path(args.input).read_text(encoding="utf-8")
    elif args.text:
        text = " ".join(args.text)
    else:
        text = sys.stdin.read()
    lexicon = _build_lexicon(cfg)
    seq = g2p(segment_lyrics(text), lexicon)
    body = " ".join(seq.phonemes) + "\n" + " ".join(str(t) for t in seq.language_tokens) + "\n"
    _write_text(body, args.output)
    return EXIT_OK


# -- transcode ----------------------------------------------------------------

def _score_events(path) -> list[ScoreEvent]:
    entries = _read_entries(path, "events", ("note", "dur"))
    events = []
    for i, entry in enumerate(entries):
        lyric = entry.get("lyric")
        slur = bool(entry.get("slur", False))
        if lyric in (None, ""):
            if not slur:
                raise InputError(f"{path}: event {i} has no lyric and is not a slur")
            token = None
        else:
            lang = entry.get("lang")
            if lang is None:
                lang = "cn" if any(_is_han(ch) for ch in lyric) else "en"
            if lang not in ("cn", "en"):
                raise InputError(f"{path}: event {i} has unknown lang {lang!r}")
            token = LyricToken(lyric, 1 if lang == "cn" else 0)
        events.append(ScoreEvent(token, int(entry["note"]), float(entry["dur"]), slur))
    return events


def cmd_transcode(args, cfg: PipelineConfig) -> int:
    lexicon = _build_lexicon(cfg)
    result = transform_score(_score_events(args.score), lexicon)
    _write_text(json.dumps(result.to_dict(), ensure_ascii=False, indent=2) + "\n", args.output)
    return EXIT_OK


# -- adapt --------------------------------------------------------------------

def _expected_units(record: AnnotationRecord, lexicon: Lexicon):
    expected = []
    for ev in record.events:
        if ev.is_rest() or ev.is_slur:
            continue
        try:
            expansion = lexicon.expand_unit(ev.phoneme)
        except InputError:
            expansion = (ev.phoneme,)
        expected.append((ev.phoneme, expansion))
    return expected


def _corpus_ratios(records, alignment_dir, lexicon: Lexicon) -> RatioTable:
    tables = []
    for record in records:
        tg_path = Path(alignment_dir) / f"{record.utterance_id}.TextGrid"
        if not tg_path.exists():
            log.warning("no alignment for %s, skipping", record.utterance_id)
            continue
        tiers = [t for t in read_textgrid(tg_path) if "phone" in t.name.lower()]
        if not tiers:
            log.warning("%s: no phone tier", tg_path)
            continue
        tables.append(extract_ratios(tiers[0], _expected_units(record, lexicon)))
    if not tables:
        raise InputError(f"{alignment_dir}: no usable alignments found")
    return RatioTable.average(tables)


def cmd_adapt(args, cfg: PipelineConfig) -> int:
    lexicon = _build_lexicon(cfg)
    records = read_manifest(args.input)
    if not records:
        raise InputError(f"{args.input}: no records to adapt")
    strategy = cfg.strategy
    ratios = None
    if strategy == "proportional":
        if args.ratios is not None:
            ratios = RatioTable.load(args.ratios)
        elif args.alignment_dir is not None:
            ratios = _corpus_ratios(records, args.alignment_dir, lexicon)
        else:
            raise InputError(
                "proportional adaptation needs --ratios or --alignment-dir"
            )
    adapted = []
    for record in records:
        if strategy == "average":
            events = adapt_average(record.events, lexicon)
        else:
            events = adapt_proportional(record.events, lexicon, ratios)
        before = sum(e.ph_dur for e in record.events)
        after = sum(e.ph_dur for e in events)
        log.info(
            "%s: %d -> %d events, duration %.6f -> %.6f (drift %.3e)",
            record.utterance_id, len(record.events), len(events),
            before, after, abs(after - before),
        )
        adapted.append(
            AnnotationRecord(
                record.utterance_id, record.audio_path, events,
                record.singer_id, record.voice_part,
            )
        )
    if args.output is None or args.output == "-":
        doc = {"records": [r.to_document() for r in adapted]}
        sys.stdout.write(json.dumps(doc, ensure_ascii=False, indent=2) + "\n")
    else:
        write_manifest(adapted, args.output)
    return EXIT_OK


# -- pseudo -------------------------------------------------------------------

def _find_tiers(tiers, path):
    word = next((t for t in tiers if "word" in t.name.lower()), None)
    phone = next((t for t in tiers if "phone" in t.name.lower()), None)
    if word is None or phone is None:
        names = ", ".join(t.name for t in tiers) or "none"
        raise InputError(f"{path}: need word and phone tiers, found: {names}")
    return word, phone


def _pseudo_worker(payload: tuple) -> tuple[str, str, str]:
    """One utterance: returns (utt_id, melody id or '', error or '')."""
    entry, bank_path, seed, out_dir, hop = payload
    utt_id = entry["utt_id"]
    try:
        wave = read_wav(entry["audio"], downmix=True)
        word_tier, phone_tier = _find_tiers(read_textgrid(entry["textgrid"]), entry["textgrid"])
        utt_seed = derive_seed(seed, utt_id)
        melody = choose_melody(load_melody_bank(bank_path), utt_seed)
        rendered, record = make_pseudo_singing(
            wave, word_tier, phone_tier, melody, utt_seed,
            utt_id=utt_id, audio_path=f"{utt_id}.wav",
            singer_id=entry.get("singer", ""), hop=hop,
        )
        write_wav(rendered, Path(out_dir) / f"{utt_id}.wav")
        write_annotation(record, Path(out_dir) / f"{utt_id}.json")
        return utt_id, melody.template_id, ""
    except Exception as exc:  # per-file isolation under keep-going
        return utt_id, "", f"{type(exc).__name__}: {exc}"


def cmd_pseudo(args, cfg: PipelineConfig) -> int:
    entries = _read_entries(args.manifest, "utterances", ("utt_id", "audio", "textgrid"))
    seen = set()
    for entry in entries:
        if entry["utt_id"] in seen:
            raise InputError(f"duplicate utt_id {entry['utt_id']!r} in manifest")
        seen.add(entry["utt_id"])
    out_dir = Path(args.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    bank_path = args.melody_bank if args.melody_bank is not None else cfg.melody_bank
    load_melody_bank(bank_path)  # validate before fanning out
    payloads = [(e, bank_path, cfg.seed, str(out_dir), cfg.hop) for e in entries]

    results: list[tuple[str, str, str]] = []
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for res in pool.map(_pseudo_worker, payloads):
                results.append(res)
                if res[2] and not args.keep_going:
                    break
    else:
        for payload in payloads:
            res = _pseudo_worker(payload)
            results.append(res)
            if res[2] and not args.keep_going:
                break

    summary: dict = {
        "seed": cfg.seed,
        "melody_bank": bank_path if bank_path is not None else "builtin",
        "utterances": {},
    }
    failures = 0
    for utt_id, melody_id, error in sorted(results):
        if error:
            failures += 1
            log.error("%s: %s", utt_id, error)
            summary["utterances"][utt_id] = {"status": "error", "error": error}
        else:
            log.info("%s: melody %s", utt_id, melody_id)
            summary["utterances"][utt_id] = {"status": "ok", "melody": melody_id}
    (out_dir / "summary.json").write_text(
        json.dumps(summary, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    if failures:
        log.error("%d of %d utterances failed", failures, len(results))
        return EXIT_INPUT
    return EXIT_OK


# -- plan-svc -----------------------------------------------------------------

def cmd_plan_svc(args, cfg: PipelineConfig) -> int:
    src_entries = _read_entries(args.sources, "sources", ("utt_id", "audio", "voice_part"))
    tgt_entries = _read_entries(args.targets, "targets", ("singer", "voice_part"))
    jobs = build_job_manifest(
        [(e["utt_id"], e["audio"], e["voice_part"]) for e in src_entries],
        [(e["singer"], e["voice_part"]) for e in tgt_entries],
    )
    log.info("%d sources x %d targets -> %d jobs", len(src_entries), len(tgt_entries), len(jobs))
    doc = {"jobs": [j.to_document() for j in jobs]}
    _write_text(json.dumps(doc, ensure_ascii=False, indent=2) + "\n", args.output)
    return EXIT_OK


# -- eval ---------------------------------------------------------------------

def _eval_worker(payload: tuple) -> tuple[str, dict]:
    utt_id, ref_entry, hyp_entry = payload
    ref = read_wav(ref_entry["audio"], downmix=True)
    hyp = read_wav(hyp_entry["audio"], downmix=True)
    ref_tokens = hyp_tokens = None
    if "text" in ref_entry and "text" in hyp_entry:
        ref_tokens = tokenize_transcript(ref_entry["text"])
        hyp_tokens = tokenize_transcript(hyp_entry["text"])
    ref_emb = hyp_emb = None
    if "embedding" in ref_entry and "embedding" in hyp_entry:
        ref_emb = read_embedding(ref_entry["embedding"])
        hyp_emb = read_embedding(hyp_entry["embedding"])
    return utt_id, evaluate_pair(ref, hyp, ref_tokens, hyp_tokens, ref_emb, hyp_emb)


def cmd_eval(args, cfg: PipelineConfig) -> int:
    refs = {e["utt_id"]: e for e in _read_entries(args.ref, "utterances", ("utt_id", "audio"))}
    hyps = {e["utt_id"]: e for e in _read_entries(args.hyp, "utterances", ("utt_id", "audio"))}
    if set(refs) != set(hyps):
        only_ref = sorted(set(refs) - set(hyps))
        only_hyp = sorted(set(hyps) - set(refs))
        raise InputError(
            f"manifest mismatch; only in ref: {only_ref}; only in hyp: {only_hyp}"
        )
    payloads = [(utt_id, refs[utt_id], hyps[utt_id]) for utt_id in sorted(refs)]
    report = EvalReport()
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            for utt_id, values in pool.map(_eval_worker, payloads):
                report.add(utt_id, values)
    else:
        for payload in payloads:
            utt_id, values = _eval_worker(payload)
            report.add(utt_id, values)
    if args.output is not None and args.output != "-":
        Path(args.output).write_text(report.dumps(), encoding="utf-8")
        sys.stdout.write(report.table() if args.table else "")
    else:
        sys.stdout.write(report.table() if args.table else report.dumps())
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="singprep",
        description="Bilingual singing-voice data preparation and evaluation.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="FILE", help="YAML config file")
    common.add_argument("--seed", type=int, help="random seed")
    common.add_argument("--workers", type=int, help="parallel worker count")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    p = sub.add_parser("g2p", parents=[common], help="lyrics to phoneme and language-token lines")
    p.add_argument("text", nargs="*", help="lyric text (default: stdin)")
    p.add_argument("--input", metavar="FILE", help="read lyrics from a file")
    p.add_argument("--output", metavar="FILE", help="write the two lines here instead of stdout")
    p.set_defaults(func=cmd_g2p)

    p = sub.add_parser("transcode", parents=[common], help="score events to phoneme-level sequences")
    p.add_argument("--score", required=True, metavar="FILE", help="score JSON (events list)")
    p.add_argument("--output", metavar="FILE")
    p.set_defaults(func=cmd_transcode)

    p = sub.add_parser("adapt", parents=[common], help="rewrite annotation to phoneme granularity")
    p.add_argument("--input", required=True, metavar="FILE", help="annotation manifest JSON")
    p.add_argument("--strategy", choices=STRATEGIES, help="duration split strategy")
    p.add_argument("--ratios", metavar="FILE", help="saved duration-ratio table")
    p.add_argument("--alignment-dir", metavar="DIR", help="TextGrid dir for ratio extraction")
    p.add_argument("--output", metavar="FILE")
    p.set_defaults(func=cmd_adapt)

    p = sub.add_parser("pseudo", parents=[common], help="speech to pseudo-singing audio + annotation")
    p.add_argument("--manifest", required=True, metavar="FILE", help="speech utterance manifest")
    p.add_argument("--output-dir", required=True, metavar="DIR")
    p.add_argument("--melody-bank", metavar="FILE", help="melody bank JSON (default: builtin)")
    p.add_argument(
        "--fail-fast", dest="keep_going", action="store_false",
        help="stop at the first failing utterance",
    )
    p.set_defaults(func=cmd_pseudo, keep_going=True)

    p = sub.add_parser("plan-svc", parents=[common], help="plan voice-conversion jobs")
    p.add_argument("--sources", required=True, metavar="FILE")
    p.add_argument("--targets", required=True, metavar="FILE")
    p.add_argument("--output", metavar="FILE")
    p.set_defaults(func=cmd_plan_svc)

    p = sub.add_parser("eval", parents=[common], help="objective metrics for ref/hyp pairs")
    p.add_argument("--ref", required=True, metavar="FILE")
    p.add_argument("--hyp", required=True, metavar="FILE")
    p.add_argument("--output", metavar="FILE", help="write the JSON report here")
    p.add_argument("--table", action="store_true", help="print an aligned text table")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    args = build_parser().parse_args(argv)
    overrides = {
        "seed": getattr(args, "seed", None),
        "workers": getattr(args, "workers", None),
        "strategy": getattr(args, "strategy", None),
    }
    try:
        cfg = resolve_config(getattr(args, "config", None), overrides)
        return args.func(args, cfg)
    except ValidationError as exc:
        for failure in exc.failures:
            log.error("%s", failure)
        return EXIT_INPUT
    except (InputError, ParseError, FileNotFoundError, NotADirectoryError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except Exception:  # noqa: BLE001 - last-resort boundary
        log.exception("internal error")
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
