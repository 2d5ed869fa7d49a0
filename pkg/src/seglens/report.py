"""Static HTML/CSV/JSON report bundle.

Everything is rendered from in-memory results; no network resources are
referenced, and output bytes depend only on the inputs (a timestamp is added
only when ``stamp=True``).
"""

from __future__ import annotations

import csv
import io
import json
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from html import escape
from pathlib import Path
from typing import Any, Mapping, Sequence

from seglens.aggregation import CLASS0, CLASS1, TokenImportanceTable, fmt_value, tables_to_csv
from seglens.diagnostics import FN, FP, ConfusionMatrix, ErrorTable, RepresentativeExample, f1_or_none
from seglens.errors import AlignmentError, ConfigError, SeglensError
from seglens.grouping import BiasRow

_HEX = re.compile(r"^#[0-9a-fA-F]{6}$")

SECTIONS = (
    ("performance", "Model performance by segment"),
    ("importance", "Token importance by meaning, sentiment and part of speech"),
    ("unique_tokens", "Top tokens unique to a segment"),
    ("gender_bias", "Potential gender bias"),
    ("error_grids", "FP/FN rates by segment"),
    ("false_positives", "Representative false positives"),
    ("false_negatives", "Representative false negatives"),
)

HIGHLIGHT_FLOOR = 0.10


def _rgb(hex_color: str) -> tuple[int, int, int]:
    return int(hex_color[1:3], 16), int(hex_color[3:5], 16), int(hex_color[5:7], 16)


@dataclass(frozen=True)
class Palette:
    class1_color: str = "#1f5fbf"  # blue: pushes toward class 1
    class0_color: str = "#d62728"  # red: pushes toward class 0
    max_alpha: float = 0.8
    annotation_colors: Mapping[str, Mapping[str, str]] = field(default_factory=lambda: {
        "meaning": {"4": "#9bc2e6", "3": "#bdd7ee", "2": "#ddebf7", "1": "#fce4d6"},
        "sentiment": {"negative": "#9bc2e6", "positive": "#f8cbad"},
        "pos": {"adjective_family": "#9bc2e6", "adverb": "#bdd7ee", "verb_family": "#ddebf7",
                "plural_noun": "#f8cbad", "noun": "#f4b084"},
        "bias": {"toward_a": "#9bc2e6", "toward_b": "#f8cbad"},
    })

    def __post_init__(self):
        colors = [self.class1_color, self.class0_color]
        colors += [c for group in self.annotation_colors.values() for c in group.values()]
        bad = [c for c in colors if not _HEX.match(c)]
        if bad:
            raise ConfigError(f"invalid colour(s), expected #rrggbb: {bad}")
        if not 0.0 < self.max_alpha <= 1.0:
            raise ConfigError(f"max_alpha must be in (0, 1], got {self.max_alpha}")


def token_opacity(scores: Sequence[float], max_alpha: float = 0.8,
                  floor: float = HIGHLIGHT_FLOOR) -> list[float]:
    """Linear opacity in ``|score|`` relative to the message max; tiny scores get 0."""
    peak = max((abs(s) for s in scores), default=0.0)
    if peak == 0.0:
        return [0.0] * len(scores)
    out = []
    for s in scores:
        rel = abs(s) / peak
        out.append(0.0 if rel < floor else max_alpha * rel)
    return out


def render_highlighted_message(tokens: Sequence[str], scores: Sequence[float],
                               palette: Palette = Palette()) -> str:
    if len(tokens) != len(scores):
        raise AlignmentError(f"{len(tokens)} tokens but {len(scores)} scores")
    parts = []
    for tok, s, a in zip(tokens, scores, token_opacity(scores, palette.max_alpha)):
        text = escape(tok)
        if a == 0.0:
            parts.append(text)
            continue
        r, g, b = _rgb(palette.class1_color if s > 0 else palette.class0_color)
        parts.append(f'<span class="hl" style="background-color: rgba({r},{g},{b},{a:.3f})" '
                     f'title="{s:.6f}">{text}</span>')
    return '<span class="msg">' + " ".join(parts) + "</span>"


def render_importance_table(
    tables: TokenImportanceTable | Sequence[TokenImportanceTable],
    annotations: Mapping[str, str] | Sequence[Mapping[str, str]] | None = None,
    palette: Palette = Palette(),
    mode: str = "sentiment",
    k: int | None = None,
) -> tuple[str, str]:
    """Side-by-side ranked token columns, one per table; returns ``(html, csv)``.

    ``annotations`` maps token -> annotation key (bucket, sentiment tag, POS
    group...) looked up in ``palette.annotation_colors[mode]``; a list gives
    one map per table. Tokens without a colour are left plain.
    """
    if isinstance(tables, TokenImportanceTable):
        tables = [tables]
    tables = list(tables)
    if annotations is None or isinstance(annotations, Mapping):
        per_col = [annotations or {}] * len(tables)
    else:
        per_col = list(annotations)
    colors = palette.annotation_colors.get(mode, {})
    shown = [t.rows if k is None else t.rows[:k] for t in tables]
    depth = max((len(rows) for rows in shown), default=0)
    out = ['<table class="imp">', "<thead><tr><th>rank</th>"]
    out += [f"<th>{escape(t.segment)}</th>" for t in tables]
    out.append("</tr></thead><tbody>")
    for rank in range(depth):
        out.append(f"<tr><td>{rank}</td>")
        for rows, ann in zip(shown, per_col):
            if rank >= len(rows):
                out.append("<td></td>")
                continue
            r = rows[rank]
            key = ann.get(r.token)
            style = f' style="background-color: {colors[str(key)]}"' if str(key) in colors else ""
            title = (f"total={fmt_value(r.total_relevance)}; mean={fmt_value(r.mean_relevance)}; "
                     f"df={r.doc_frequency}")
            out.append(f'<td{style} title="{title}">{escape(r.token)}</td>')
        out.append("</tr>")
    out.append("</tbody></table>")
    csv_text = tables_to_csv(
        TokenImportanceTable(t.segment, t.direction, tuple(rows), t.threshold, t.rank_by)
        for t, rows in zip(tables, shown)
    )
    rows_csv = list(csv.reader(io.StringIO(csv_text)))
    lookup = {t.segment: ann for t, ann in zip(tables, per_col)}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(rows_csv[0] + ["annotation"])
    for r in rows_csv[1:]:
        w.writerow(r + [str(lookup[r[0]].get(r[3], ""))])
    return "\n".join(out), buf.getvalue()


# --------------------------------------------------------------------------
# bundle
# --------------------------------------------------------------------------


@dataclass
class ReportInputs:
    """Everything the bundle renders. Mappings are rendered in their own order."""

    title: str = "Segment diagnostics"
    confusion: Mapping[str, Mapping[str, ConfusionMatrix]] = field(default_factory=dict)
    importance: Mapping[str, tuple[TokenImportanceTable, TokenImportanceTable]] = field(default_factory=dict)
    # token -> bucket or "no-embedding"; or segment -> that map for per-segment anchors
    meaning: Mapping[str, Any] = field(default_factory=dict)
    sentiment: Mapping[str, str] = field(default_factory=dict)
    pos: Mapping[str, str] = field(default_factory=dict)
    unique: Mapping[str, Mapping[str, list[tuple[int, str]]]] = field(default_factory=dict)
    bias: Mapping[str, Mapping[str, list[BiasRow]]] = field(default_factory=dict)  # direction -> seg -> rows
    error_tables: Mapping[str, ErrorTable] = field(default_factory=dict)
    examples: Mapping[str, Mapping[str, list[RepresentativeExample]]] = field(default_factory=dict)
    notes: Sequence[str] = ()
    k: int = 20


_CSS = """body{font-family:sans-serif;margin:2em;max-width:72em}
table{border-collapse:collapse;margin:1em 0}td,th{border:1px solid #999;padding:2px 6px;font-size:90%}
th{background:#acb9ca}.hl{border-radius:3px;padding:0 1px}.msg{line-height:1.8}
.na{color:#888}.min{background:#9bc2e6}.max{background:#ffc000}.note{font-size:85%;color:#444}"""


def _page(title: str, body: str, stamp: str | None) -> str:
    foot = f'<p class="note">generated {escape(stamp)}</p>' if stamp else ""
    return (f'<!DOCTYPE html>\n<html><head><meta charset="utf-8"><title>{escape(title)}</title>'
            f"<style>{_CSS}</style></head><body>\n"
            f'<p><a href="index.html">index</a></p><h1>{escape(title)}</h1>\n{body}\n{foot}</body></html>\n')


def _none() -> str:
    return '<p class="na">none</p>'


def _performance(inp: ReportInputs) -> tuple[str, dict]:
    body, tables = [], {}
    for scheme, mats in inp.confusion.items():
        body.append(f"<h2>{escape(scheme)}</h2><table><tr><th>segment</th><th>TP</th><th>FP</th>"
                    "<th>TN</th><th>FN</th><th>F1</th></tr>")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["segment", "tp", "fp", "tn", "fn", "f1"])
        for seg, cm in mats.items():
            f1 = f1_or_none(cm)
            f1s = "n/a" if f1 is None else f"{f1:.4f}"
            body.append(f"<tr><td>{escape(seg)}</td><td>{cm.tp}</td><td>{cm.fp}</td><td>{cm.tn}</td>"
                        f"<td>{cm.fn}</td><td>{f1s}</td></tr>")
            w.writerow([seg, cm.tp, cm.fp, cm.tn, cm.fn, f1s])
        body.append("</table>")
        tables[f"confusion_{_slug(scheme)}.csv"] = buf.getvalue()
    return "\n".join(body) or _none(), tables


def _importance(inp: ReportInputs, palette: Palette) -> tuple[str, dict]:
    body, tables = [], {}
    if not inp.importance:
        return _none(), tables
    modes = (("meaning", inp.meaning, "embedding similarity to top tokens"),
             ("sentiment", inp.sentiment, "binary sentiment lexicon"),
             ("pos", inp.pos, "part-of-speech group"))
    for direction, idx, label in ((CLASS1, 0, "toward class 1"), (CLASS0, 1, "toward class 0")):
        cols = [pair[idx] for pair in inp.importance.values()]
        for mode, ann, desc in modes:
            if ann and all(isinstance(v, Mapping) for v in ann.values()):
                ann = [ann.get(t.segment, {}) for t in cols]  # one map per segment
            html, csv_text = render_importance_table(cols, ann, palette, mode, inp.k)
            body.append(f"<h2>Tokens {label}, coloured by {desc}</h2>\n{html}")
            tables[f"importance_{direction}_{mode}.csv"] = csv_text
    legend = ", ".join(f'<span style="background:{c}">{escape(k)}</span>'
                       for m in palette.annotation_colors.values() for k, c in m.items())
    body.append(f'<p class="note">colour keys: {legend}</p>')
    return "\n".join(body), tables


def _unique(inp: ReportInputs) -> tuple[str, dict]:
    body, buf = [], io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["direction", "segment", "rank", "token"])
    for direction, per_seg in inp.unique.items():
        body.append(f"<h2>{escape(direction)}</h2>")
        segs = list(per_seg)
        depth = max((len(v) for v in per_seg.values()), default=0)
        if depth == 0:
            body.append(_none())
            continue
        body.append("<table><tr>" + "".join(f"<th>{escape(s)}</th>" for s in segs) + "</tr>")
        for i in range(depth):
            cells = []
            for s in segs:
                items = per_seg[s]
                cells.append(f"<td>{items[i][0]}.{escape(items[i][1])}</td>" if i < len(items) else "<td></td>")
            body.append("<tr>" + "".join(cells) + "</tr>")
        body.append("</table>")
        for s in segs:
            for rank, tok in per_seg[s]:
                w.writerow([direction, s, rank, tok])
    return "\n".join(body) or _none(), {"unique_tokens.csv": buf.getvalue()}


def _bias(inp: ReportInputs, palette: Palette) -> tuple[str, dict]:
    body, buf = [], io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["direction", "segment", "token", "rank", "sim_male", "sim_female", "difference", "flag"])
    colors = palette.annotation_colors.get("bias", {})
    for direction, per_seg in inp.bias.items():
        body.append(f"<h2>{escape(direction)}</h2>")
        any_rows = False
        for seg, rows in per_seg.items():
            for r in rows:
                w.writerow([direction, seg, r.token, r.rank, f"{r.sim_a:.6f}", f"{r.sim_b:.6f}",
                            f"{r.difference:.6f}", r.flag])
            shown = [r for r in rows if r.flag != "none"]
            if not shown:
                continue
            any_rows = True
            body.append(f"<h3>{escape(seg)}</h3><table><tr><th>rank</th><th>token</th><th>male sim</th>"
                        "<th>female sim</th><th>difference</th><th>flag</th></tr>")
            for r in shown:
                c = colors.get(r.direction)
                style = f' style="background-color: {c}"' if c else ""
                body.append(f"<tr><td>{r.rank}</td><td{style}>{escape(r.token)}</td><td>{r.sim_a:.3f}</td>"
                            f"<td>{r.sim_b:.3f}</td><td>{r.difference:+.3f}</td><td>{r.flag}</td></tr>")
            body.append("</table>")
        if not any_rows:
            body.append(_none())
    return "\n".join(body) or _none(), {"gender_bias.csv": buf.getvalue()}


def _errors(inp: ReportInputs) -> tuple[str, dict]:
    body, tables = [], {}
    for name, et in inp.error_tables.items():
        body.append(f"<h2>{escape(name)}</h2><table><tr><th>error</th><th>segment</th>"
                    + "".join(f"<th>{escape(c)}</th>" for c in et.col_order) + "<th>N of errors</th></tr>")
        for kind in (FP, FN):
            for r in et.row_order:
                cells = []
                for c in et.col_order:
                    cell = et.cell(kind, r, c)
                    txt = "n/a" if cell.rate is None else f"{100 * cell.rate:.2f}%"
                    cls = f' class="{cell.mark}"' if cell.mark else ""
                    cells.append(f"<td{cls}>{txt}</td>")
                body.append(f"<tr><td>{kind}</td><td>{escape(r)}</td>{''.join(cells)}"
                            f"<td>{et.row_totals[(kind, r)]}</td></tr>")
        body.append("</table>")
        den = ("actual negatives (FP) / actual positives (FN) in the cell" if et.denominator == "class"
               else "all messages in the cell")
        body.append(f'<p class="note">rate denominator: {den}; lowest rate per row in blue, highest in orange.</p>')
        tables[f"errors_{_slug(name)}.csv"] = et.to_csv()
    return "\n".join(body) or _none(), tables


def _examples(inp: ReportInputs, kind: str, palette: Palette) -> tuple[str, dict]:
    per_seg = inp.examples.get(kind, {})
    body = []
    for seg, exs in per_seg.items():
        body.append(f"<h2>{escape(seg)}</h2>")
        if not exs:
            body.append(_none())
            continue
        body.append("<table><tr><th>id</th><th>act</th><th>pred</th><th>prob</th><th>text</th></tr>")
        for ex in exs:
            body.append(f"<tr><td>{escape(ex.id)}</td><td>{ex.actual}</td><td>{ex.predicted}</td>"
                        f"<td>{ex.prob:.3f}</td><td>{render_highlighted_message(ex.tokens, ex.scores, palette)}</td></tr>")
        body.append("</table>")
    return "\n".join(body) or _none(), {}


def _slug(s: str) -> str:
    return re.sub(r"[^a-z0-9]+", "_", s.lower()).strip("_") or "x"


def emit_report(inp: ReportInputs, out_dir: str | Path, palette: Palette = Palette(),
                stamp: bool = False) -> Path:
    """Write ``index.html``, one page per section, ``tables/*.csv`` and ``data/*.json``."""
    out = Path(out_dir)
    stamp_text = datetime.now(timezone.utc).isoformat(timespec="seconds") if stamp else None
    sections = {
        "performance": _performance(inp),
        "importance": _importance(inp, palette),
        "unique_tokens": _unique(inp),
        "gender_bias": _bias(inp, palette),
        "error_grids": _errors(inp),
        "false_positives": _examples(inp, FP, palette),
        "false_negatives": _examples(inp, FN, palette),
    }
    files: dict[str, str] = {}
    for name, title in SECTIONS:
        body, tables = sections[name]
        files[f"{name}.html"] = _page(title, body, stamp_text)
        files.update({f"tables/{k}": v for k, v in tables.items()})
    notes = "".join(f"<li>{escape(n)}</li>" for n in inp.notes)
    links = "".join(f'<li><a href="{n}.html">{escape(t)}</a></li>' for n, t in SECTIONS)
    index_body = f"<ul>{links}</ul>" + (f'<h2>Notes</h2><ul class="note">{notes}</ul>' if notes else "")
    files["index.html"] = _page(inp.title, index_body, stamp_text)
    files["data/examples.json"] = _json({k: {s: [e.to_dict() for e in v] for s, v in segs.items()}
                                         for k, segs in inp.examples.items()})
    files["data/unique_tokens.json"] = _json({d: {s: [list(x) for x in v] for s, v in segs.items()}
                                              for d, segs in inp.unique.items()})
    files["data/annotations.json"] = _json({"meaning": dict(inp.meaning), "sentiment": dict(inp.sentiment),
                                            "pos": dict(inp.pos)})
    for rel, text in files.items():
        path = out / rel
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(text, encoding="utf-8")
        except OSError as exc:
            raise SeglensError(f"cannot write {path}: {exc.strerror or exc}") from exc
    return out / "index.html"


def _json(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=1, ensure_ascii=False) + "\n"
