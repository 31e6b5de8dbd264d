"""Markdown tables and SVG heatmaps for analysis outputs.

SVG is generated directly (no plotting library) so report bytes are a pure
function of the records, which keeps report runs reproducible.
"""

from __future__ import annotations

from .evaluation import CONFIGURATIONS, ConfusionMatrix, ConsistencyReport


def _fmt(value: float | None, digits: int = 2) -> str:
    return "n/a" if value is None else f"{value:.{digits}f}"


def em_table(summary: dict[str, dict[str, float | None]]) -> str:
    lines = [
        "| Type | n | Hop1 | Hop2 | Multi-hop |",
        "| --- | ---: | ---: | ---: | ---: |",
    ]
    order = ["overall"] + sorted(k for k in summary if k != "overall")
    for key in order:
        row = summary[key]
        lines.append(
            f"| {key} | {int(row['n'])} | {_fmt(row['hop1'])} | {_fmt(row['hop2'])} | {_fmt(row['multi'])} |"
        )
    return "\n".join(lines)


def consistency_table(reports: dict[str, ConsistencyReport]) -> str:
    lines = [
        "| Type | n | Hop1 consistency | Hop2 consistency |",
        "| --- | ---: | ---: | ---: |",
    ]
    order = ["overall"] + sorted(k for k in reports if k != "overall")
    for key in order:
        rep = reports[key]
        lines.append(f"| {key} | {rep.n} | {_fmt(rep.hop1_pct)} | {_fmt(rep.hop2_pct)} |")
    return "\n".join(lines)


def confusion_table(matrix: ConfusionMatrix) -> str:
    header = "| | " + " | ".join(CONFIGURATIONS) + " |"
    rule = "| --- |" + " ---: |" * len(CONFIGURATIONS)
    rows = [header, rule]
    for s in (1, 0):
        cells = " | ".join(_fmt(matrix.joint[(s, cfg)]) for cfg in CONFIGURATIONS)
        rows.append(f"| P(s={s}, s1s2) % | {cells} |")
    cond = " | ".join(_fmt(matrix.conditional[cfg], 3) for cfg in CONFIGURATIONS)
    rows.append(f"| P(s=1 \\| s1s2) | {cond} |")
    return "\n".join(rows)


def _cell_color(pct: float, base: tuple[int, int, int]) -> str:
    # Linear blend from white toward the base color by joint percentage.
    frac = min(1.0, pct / 100.0)
    r = round(255 + (base[0] - 255) * frac)
    g = round(255 + (base[1] - 255) * frac)
    b = round(255 + (base[2] - 255) * frac)
    return f"rgb({r},{g},{b})"


_BLUE = (70, 130, 180)
_ORANGE = (230, 140, 60)

_CELL_W = 110
_CELL_H = 46
_LEFT = 130
_TOP = 40


def confusion_svg(matrix: ConfusionMatrix, title: str) -> str:
    """Render the 2x4 joint grid with a conditional footer row."""
    width = _LEFT + _CELL_W * len(CONFIGURATIONS) + 10
    height = _TOP + _CELL_H * 3 + 30
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'font-family="sans-serif" font-size="13">',
        f'<text x="{_LEFT}" y="20" font-size="15">{title} (n={matrix.n})</text>',
    ]
    for col, cfg in enumerate(CONFIGURATIONS):
        x = _LEFT + col * _CELL_W + _CELL_W // 2
        parts.append(f'<text x="{x}" y="{_TOP - 6}" text-anchor="middle">s1s2={cfg}</text>')
    row_labels = ["P(s=1) %", "P(s=0) %", "P(s=1|s1s2)"]
    for row, label in enumerate(row_labels):
        y = _TOP + row * _CELL_H + _CELL_H // 2 + 5
        parts.append(f'<text x="{_LEFT - 8}" y="{y}" text-anchor="end">{label}</text>')
    for row, s in enumerate((1, 0)):
        base = _BLUE if s == 1 else _ORANGE
        for col, cfg in enumerate(CONFIGURATIONS):
            pct = matrix.joint[(s, cfg)]
            x = _LEFT + col * _CELL_W
            y = _TOP + row * _CELL_H
            parts.append(
                f'<rect x="{x}" y="{y}" width="{_CELL_W}" height="{_CELL_H}" '
                f'fill="{_cell_color(pct, base)}" stroke="#444"/>'
            )
            parts.append(
                f'<text x="{x + _CELL_W // 2}" y="{y + _CELL_H // 2 + 5}" '
                f'text-anchor="middle">{pct:.2f}</text>'
            )
    y = _TOP + 2 * _CELL_H
    for col, cfg in enumerate(CONFIGURATIONS):
        x = _LEFT + col * _CELL_W
        parts.append(
            f'<rect x="{x}" y="{y}" width="{_CELL_W}" height="{_CELL_H}" fill="#f2f2f2" stroke="#444"/>'
        )
        parts.append(
            f'<text x="{x + _CELL_W // 2}" y="{y + _CELL_H // 2 + 5}" '
            f'text-anchor="middle">{_fmt(matrix.conditional[cfg], 3)}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
