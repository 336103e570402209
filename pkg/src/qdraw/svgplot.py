"""Self-contained SVG figures: time series, elite-map snapshots, grids.

No plotting dependency: a tiny element builder emits static SVG, with
raster thumbnails embedded as base64 PNG data URIs.
"""

from __future__ import annotations

import base64
import io

import numpy as np
from PIL import Image

from .errors import ValidationError

_FONT = "font-family=\"sans-serif\""


def _png_data_uri(img: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(img, mode="L").save(buf, format="PNG")
    return "data:image/png;base64," + base64.b64encode(buf.getvalue()).decode("ascii")


class SVGCanvas:
    def __init__(self, width: int, height: int):
        self.width = width
        self.height = height
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
            f'height="{height}" viewBox="0 0 {width} {height}">',
            f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        ]

    def line(self, x1, y1, x2, y2, stroke="black", width=1.0):
        self.parts.append(
            f'<line x1="{x1:.2f}" y1="{y1:.2f}" x2="{x2:.2f}" y2="{y2:.2f}" '
            f'stroke="{stroke}" stroke-width="{width}"/>'
        )

    def polyline(self, points, stroke, width=1.5):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        self.parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{stroke}" stroke-width="{width}"/>'
        )

    def polygon(self, points, fill, opacity=0.25):
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
        self.parts.append(f'<polygon points="{pts}" fill="{fill}" fill-opacity="{opacity}"/>')

    def rect(self, x, y, w, h, fill="none", stroke="black", width=1.0):
        self.parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'fill="{fill}" stroke="{stroke}" stroke-width="{width}"/>'
        )

    def text(self, x, y, s, size=12, anchor="start"):
        self.parts.append(
            f'<text x="{x:.2f}" y="{y:.2f}" font-size="{size}" '
            f'text-anchor="{anchor}" {_FONT}>{s}</text>'
        )

    def image(self, x, y, w, h, img: np.ndarray):
        self.parts.append(
            f'<image x="{x:.2f}" y="{y:.2f}" width="{w:.2f}" height="{h:.2f}" '
            f'href="{_png_data_uri(img)}"/>'
        )

    def to_string(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_string())


def _axes(svg, x0, y0, w, h, gens, title):
    svg.rect(x0, y0, w, h, fill="none", stroke="#333333")
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y0 + h * (1.0 - frac)
        svg.line(x0 - 4, y, x0, y, stroke="#333333")
        svg.text(x0 - 8, y + 4, f"{frac:.2f}", size=10, anchor="end")
    ticks = sorted({1, gens // 2 if gens > 1 else 1, gens})
    for g in ticks:
        x = x0 + (w * (g - 1) / max(gens - 1, 1))
        svg.line(x, y0 + h, x, y0 + h + 4, stroke="#333333")
        svg.text(x, y0 + h + 16, str(g), size=10, anchor="middle")
    svg.text(x0 + w / 2, y0 - 10, title, size=13, anchor="middle")
    svg.text(x0 + w / 2, y0 + h + 32, "generation", size=11, anchor="middle")


def _band_and_mean(svg, x0, y0, w, h, series: np.ndarray, color):
    """series: (runs, gens) in [0,1]; draws mean line and +-1 std band."""
    gens = series.shape[1]
    xs = x0 + w * np.arange(gens) / max(gens - 1, 1)
    mean = series.mean(axis=0)
    std = series.std(axis=0)
    upper = np.clip(mean + std, 0.0, 1.0)
    lower = np.clip(mean - std, 0.0, 1.0)
    band = [(x, y0 + h * (1.0 - v)) for x, v in zip(xs, upper)]
    band += [(x, y0 + h * (1.0 - v)) for x, v in zip(xs[::-1], lower[::-1])]
    svg.polygon(band, fill=color)
    svg.polyline([(x, y0 + h * (1.0 - v)) for x, v in zip(xs, mean)], stroke=color)


def timeseries_figure(fitness: np.ndarray, diversity: np.ndarray) -> SVGCanvas:
    """Aggregate mean+-std curves over runs; both inputs (runs, gens)."""
    fitness = np.atleast_2d(np.asarray(fitness, dtype=np.float64))
    diversity = np.atleast_2d(np.asarray(diversity, dtype=np.float64))
    if fitness.shape != diversity.shape:
        raise ValidationError("fitness and diversity series have mismatched shapes")
    gens = fitness.shape[1]
    svg = SVGCanvas(720, 480)
    x0, y0, w, h = 60, 40, 600, 380
    _axes(svg, x0, y0, w, h, gens, "elite fitness and diversity across runs")
    _band_and_mean(svg, x0, y0, w, h, fitness, "#1f5fbf")
    _band_and_mean(svg, x0, y0, w, h, diversity, "#e08020")
    svg.rect(x0 + w - 170, y0 + 10, 12, 12, fill="#1f5fbf", stroke="none")
    svg.text(x0 + w - 152, y0 + 21, "mean elite fitness", size=11)
    svg.rect(x0 + w - 170, y0 + 30, 12, 12, fill="#e08020", stroke="none")
    svg.text(x0 + w - 152, y0 + 41, "diversity ratio", size=11)
    return svg


def snapshot_figure(panels: list) -> SVGCanvas:
    """Elite maps at chosen generations.

    panels: list of (generation, entries) where entries are
    (map_pos (2,), thumbnail raster) pairs; thumbnails are placed at
    their map position over the unit square.
    """
    if not panels:
        raise ValidationError("no snapshot panels to draw")
    side, margin, thumb = 360, 48, 40
    svg = SVGCanvas(margin + len(panels) * (side + margin), side + 2 * margin)
    for p, (gen, entries) in enumerate(panels):
        x0 = margin + p * (side + margin)
        y0 = margin
        svg.rect(x0, y0, side, side, fill="none", stroke="#333333")
        svg.text(x0 + side / 2, y0 - 12, f"generation {gen}", size=13, anchor="middle")
        for pos, img in entries:
            cx = x0 + float(pos[0]) * side
            cy = y0 + (1.0 - float(pos[1])) * side
            svg.image(cx - thumb / 2, cy - thumb / 2, thumb, thumb, img)
    return svg


def grid_figure(images: list, captions: list, columns: int = 5) -> SVGCanvas:
    """Plain image grid (champion montage)."""
    if not images:
        raise ValidationError("no images to draw")
    if len(images) != len(captions):
        raise ValidationError("images and captions differ in length")
    cell, pad = 128, 24
    columns = min(columns, len(images))
    rows = -(-len(images) // columns)
    svg = SVGCanvas(pad + columns * (cell + pad), pad + rows * (cell + pad + 16))
    for i, (img, caption) in enumerate(zip(images, captions)):
        r, c = divmod(i, columns)
        x = pad + c * (cell + pad)
        y = pad + r * (cell + pad + 16)
        svg.image(x, y, cell, cell, img)
        svg.rect(x, y, cell, cell, fill="none", stroke="#999999")
        svg.text(x + cell / 2, y + cell + 13, caption, size=10, anchor="middle")
    return svg
